#pragma once

#include "rt0.hpp"
#include "saddle.hpp"

namespace mgms {

/// One flux DOF per edge, one pressure DOF per cell; wall fluxes are
/// constrained to zero.
struct DofMap
{
    int num_velocity = 0;
    int num_pressure = 0;
    std::vector<int> constrained;

    static DofMap of(const FineMesh& mesh)
    {
        DofMap d;
        d.num_velocity = mesh.num_edges();
        d.num_pressure = mesh.num_cells();
        for (int e = 0; e < mesh.num_edges(); ++e)
            if (mesh.on_boundary(e) && mesh.tag(e) == BoundaryTag::wall) d.constrained.push_back(e);
        return d;
    }
};

/// Velocity mass matrix (kappa^-1 weighted) and divergence matrix
/// B[T, e] = int_T div psi_e = +-1.
struct MixedOperators
{
    SpMat mass;
    SpMat divergence;
};

/// Operators restricted to `cells`; `edge_map` sends global edges to local
/// columns (-1 when absent). Divergence rows follow the order of `cells`.
inline MixedOperators assemble_operators(const FineMesh& mesh, const CoefficientField& kappa,
                                         std::span<const int> cells, std::span<const int> edge_map,
                                         int num_local_edges)
{
    if (kappa.size() != mesh.num_cells()) throw InputError("coefficient size does not match the mesh");
    std::vector<Triplet> tm, tb;
    tm.reserve(9 * cells.size());
    tb.reserve(3 * cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const int c = cells[r];
        const Eigen::Matrix3d m = rt0::oriented_mass(mesh, c, 1.0 / kappa[c]);
        std::array<int, 3> dof{};
        for (int k = 0; k < 3; ++k) {
            dof[k] = edge_map[mesh.cell_edges(c)[k]];
            if (dof[k] < 0) throw std::invalid_argument("edge map misses an edge of an assembled cell");
        }
        for (int k = 0; k < 3; ++k) {
            tb.emplace_back(static_cast<int>(r), dof[k], mesh.orientation(c, k));
            for (int l = 0; l < 3; ++l) tm.emplace_back(dof[k], dof[l], m(k, l));
        }
    }
    MixedOperators ops;
    ops.mass.resize(num_local_edges, num_local_edges);
    ops.mass.setFromTriplets(tm.begin(), tm.end());
    ops.divergence.resize(static_cast<Eigen::Index>(cells.size()), num_local_edges);
    ops.divergence.setFromTriplets(tb.begin(), tb.end());
    return ops;
}

inline MixedOperators assemble_operators(const FineMesh& mesh, const CoefficientField& kappa)
{
    std::vector<int> cells(mesh.num_cells()), edges(mesh.num_edges());
    std::iota(cells.begin(), cells.end(), 0);
    std::iota(edges.begin(), edges.end(), 0);
    return assemble_operators(mesh, kappa, cells, edges, mesh.num_edges());
}

/// Pressure data on the inlet and outlet boundaries.
struct BoundaryPressure
{
    double inlet = 0;
    double outlet = 0;
};

/// Fine RT0/P0 system with the SPD-mass sign convention:
///   int kappa^-1 u.v - int p div v = -int_{in,out} p_D v.n,
///   int q div u = int f q.
inline SaddleSystem assemble_fine(const FineMesh& mesh, const CoefficientField& kappa, BoundaryPressure bc,
                                  std::span<const double> source)
{
    if (static_cast<int>(source.size()) != mesh.num_cells()) throw InputError("source size does not match the mesh");
    auto ops = assemble_operators(mesh, kappa);
    SaddleSystem sys;
    sys.A = std::move(ops.mass);
    sys.B = std::move(ops.divergence);
    sys.G = Vec::Zero(mesh.num_edges());
    sys.F = Vec::Zero(mesh.num_cells());
    bool has_pressure_boundary = false;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (!mesh.on_boundary(e)) continue;
        const int sign = mesh.orientation_in(mesh.edge_cells(e)[0], e);
        switch (mesh.tag(e)) {
        case BoundaryTag::inlet:
            sys.G[e] = -bc.inlet * sign;
            has_pressure_boundary = true;
            break;
        case BoundaryTag::outlet:
            sys.G[e] = -bc.outlet * sign;
            has_pressure_boundary = true;
            break;
        case BoundaryTag::wall: sys.constrained.push_back(e); break;
        default: throw MeshError("unknown boundary tag", e);
        }
    }
    for (int c = 0; c < mesh.num_cells(); ++c) sys.F[c] = source[c] * mesh.area(c);
    sys.constrained_values = Vec::Zero(static_cast<Eigen::Index>(sys.constrained.size()));
    sys.pressure_weights = Vec(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) sys.pressure_weights[c] = mesh.area(c);
    sys.neumann_only = !has_pressure_boundary;
    return sys;
}

inline SaddleSystem assemble_fine(const FineMesh& mesh, const CoefficientField& kappa, BoundaryPressure bc,
                                  double source)
{
    const std::vector<double> f(mesh.num_cells(), source);
    return assemble_fine(mesh, kappa, bc, f);
}

/// RT0 velocity at the centroid of `cell`.
inline Point evaluate_cell_velocity(const FineMesh& mesh, const Vec& u, int cell)
{
    if (cell < 0 || cell >= mesh.num_cells()) throw std::out_of_range("cell index " + std::to_string(cell));
    if (u.size() != mesh.num_edges()) throw std::invalid_argument("velocity DOF vector has wrong size");
    return rt0::evaluate(mesh, u, cell, mesh.centroid(cell));
}

/// Net outward flux through inlet and outlet edges.
inline double boundary_outflow(const FineMesh& mesh, const Vec& u)
{
    double total = 0;
    for (int e = 0; e < mesh.num_edges(); ++e)
        if (mesh.on_boundary(e)) total += mesh.orientation_in(mesh.edge_cells(e)[0], e) * u[e];
    return total;
}

} // namespace mgms
