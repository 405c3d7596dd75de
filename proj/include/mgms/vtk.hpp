#pragma once

#include "fine_solver.hpp"

#include <ostream>

namespace mgms {

/// Cell data for a legacy VTK export. Velocities are given as RT0 flux DOF
/// vectors and written as centroid vectors.
struct VtkExport
{
    std::string title = "mgms";
    std::vector<std::pair<std::string, Vec>> cell_scalars;
    std::vector<std::pair<std::string, Vec>> cell_velocities;
};

/// Legacy ASCII UNSTRUCTURED_GRID: POINTS (z = 0), CELLS, CELL_TYPES (5,
/// triangle), then CELL_DATA with one SCALARS block per scalar field and one
/// VECTORS block per velocity field, in the order given.
inline void write_vtk(std::ostream& out, const FineMesh& mesh, const VtkExport& data)
{
    using detail::format_double;
    const int n = mesh.num_nodes(), m = mesh.num_cells();
    for (const auto& [name, v] : data.cell_scalars)
        if (v.size() != m) throw std::invalid_argument("VTK scalar '" + name + "' has wrong size");
    for (const auto& [name, v] : data.cell_velocities)
        if (v.size() != mesh.num_edges()) throw std::invalid_argument("VTK velocity '" + name + "' has wrong size");

    out << "# vtk DataFile Version 3.0\n" << data.title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << n << " double\n";
    for (int i = 0; i < n; ++i) out << format_double(mesh.node(i).x()) << ' ' << format_double(mesh.node(i).y()) << " 0\n";
    out << "CELLS " << m << ' ' << 4 * m << '\n';
    for (const auto& c : mesh.cells()) out << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    out << "CELL_TYPES " << m << '\n';
    for (int c = 0; c < m; ++c) out << "5\n";
    out << "CELL_DATA " << m << '\n';
    for (const auto& [name, v] : data.cell_scalars) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int c = 0; c < m; ++c) out << format_double(v[c]) << '\n';
    }
    for (const auto& [name, u] : data.cell_velocities) {
        out << "VECTORS " << name << " double\n";
        for (int c = 0; c < m; ++c) {
            const Point v = evaluate_cell_velocity(mesh, u, c);
            out << format_double(v.x()) << ' ' << format_double(v.y()) << " 0\n";
        }
    }
}

} // namespace mgms
