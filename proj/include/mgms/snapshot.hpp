#pragma once

#include "fine_solver.hpp"

namespace mgms {

/// Snapshot velocities phi_j of one coarse edge, stored on the fine edges
/// touching omega_i (zero everywhere else).
struct SnapshotSet
{
    int coarse_edge = -1;
    /// Fine cells of omega_i, ascending.
    std::vector<int> cells;
    /// Fine edges of those cells, ascending; the columns of `values`.
    std::vector<int> edges;
    /// Column of each fine edge e_j of E_i, in coarse-edge order.
    std::vector<int> trace;
    /// Row j is phi_j.
    Mat values;

    int size() const { return static_cast<int>(values.rows()); }

    Vec global(int j, int num_fine_edges) const
    {
        Vec v = Vec::Zero(num_fine_edges);
        for (std::size_t k = 0; k < edges.size(); ++k) v[edges[k]] = values(j, static_cast<Eigen::Index>(k));
        return v;
    }
};

/// Fine cells and edges of omega_i plus the map from global edges to local
/// columns.
struct LocalDomain
{
    std::vector<int> cells;
    std::vector<int> edges;
    std::vector<int> edge_map;
};

inline LocalDomain local_domain(const FineMesh& mesh, const CoarsePartition& partition, int coarse_edge)
{
    LocalDomain d;
    for (int k : partition.local_domain(coarse_edge))
        d.cells.insert(d.cells.end(), partition.cell(k).begin(), partition.cell(k).end());
    std::sort(d.cells.begin(), d.cells.end());
    for (int c : d.cells)
        for (int e : mesh.cell_edges(c)) d.edges.push_back(e);
    std::sort(d.edges.begin(), d.edges.end());
    d.edges.erase(std::unique(d.edges.begin(), d.edges.end()), d.edges.end());
    d.edge_map.assign(mesh.num_edges(), -1);
    for (std::size_t k = 0; k < d.edges.size(); ++k) d.edge_map[d.edges[k]] = static_cast<int>(k);
    return d;
}

/// Solves the J local problems of coarse edge i on omega_i:
///   kappa^-1 phi + grad eta = 0,  div phi = c_j,
/// with zero flux on the boundary of omega_i, flux |e_j| (unit density)
/// through e_j leaving the upstream coarse cell and zero flux through the
/// other fine edges of E_i. The source is +|e_j|/|K| on the upstream cell
/// and -|e_j|/|K| on the downstream one, and eta has zero mean on each
/// coarse cell of omega_i.
inline SnapshotSet build_snapshots(const FineMesh& mesh, const CoarsePartition& partition,
                                   const CoefficientField& kappa, int coarse_edge)
{
    if (coarse_edge < 0 || coarse_edge >= partition.num_edges())
        throw std::out_of_range("coarse edge " + std::to_string(coarse_edge));
    const CoarseEdge& ce = partition.edge(coarse_edge);
    LocalDomain dom = local_domain(mesh, partition, coarse_edge);
    const int ne = static_cast<int>(dom.edges.size());
    const int nc = static_cast<int>(dom.cells.size());
    const int J = static_cast<int>(ce.fine_edges.size());

    auto ops = assemble_operators(mesh, kappa, dom.cells, dom.edge_map, ne);

    SnapshotSet set;
    set.coarse_edge = coarse_edge;
    for (int e : ce.fine_edges) set.trace.push_back(dom.edge_map[e]);

    // Boundary of omega_i: edges with a single incident cell inside omega_i.
    std::vector<int> inside(ne, 0);
    for (int c : dom.cells)
        for (int e : mesh.cell_edges(c)) ++inside[dom.edge_map[e]];
    std::vector<char> on_trace(ne, 0);
    for (int k : set.trace) on_trace[k] = 1;

    SaddleSystem sys;
    sys.A = std::move(ops.mass);
    sys.B = std::move(ops.divergence);
    sys.G = Vec::Zero(ne);
    sys.F = Vec::Zero(nc);
    for (int k = 0; k < ne; ++k)
        if (inside[k] == 1 || on_trace[k]) sys.constrained.push_back(k);
    sys.constrained_values = Vec::Zero(static_cast<Eigen::Index>(sys.constrained.size()));
    sys.pressure_weights = Vec(nc);
    for (int r = 0; r < nc; ++r) sys.pressure_weights[r] = mesh.area(dom.cells[r]);
    for (int k : partition.local_domain(coarse_edge)) {
        std::vector<int> rows;
        for (int r = 0; r < nc; ++r)
            if (partition.coarse_of(dom.cells[r]) == k) rows.push_back(r);
        sys.pressure_gauges.push_back(std::move(rows));
    }
    sys.neumann_only = true;

    std::vector<int> slot(ne, -1);
    for (std::size_t s = 0; s < sys.constrained.size(); ++s) slot[sys.constrained[s]] = static_cast<int>(s);

    std::unique_ptr<SaddleSolver> solver;
    try {
        solver = std::make_unique<SaddleSolver>(sys);
    } catch (const NumericalError& e) {
        throw NumericalError("snapshot problem of coarse edge " + std::to_string(coarse_edge) + ": " + e.what());
    }

    const int upstream = ce.cells[0];
    set.values.resize(J, ne);
    Vec values = Vec::Zero(static_cast<Eigen::Index>(sys.constrained.size()));
    Vec F(nc);
    for (int j = 0; j < J; ++j) {
        const int e = ce.fine_edges[j];
        const auto [c0, c1] = mesh.edge_cells(e);
        const int up_cell = partition.coarse_of(c0) == upstream ? c0 : c1;
        const double len = mesh.length(e);

        values.setZero();
        values[slot[set.trace[j]]] = mesh.orientation_in(up_cell, e) * len;
        for (int r = 0; r < nc; ++r) {
            const int k = partition.coarse_of(dom.cells[r]);
            const double density = len / partition.area(k);
            F[r] = (k == upstream ? density : -density) * mesh.area(dom.cells[r]);
        }
        try {
            set.values.row(j) = solver->solve(sys.G, F, values).u.transpose();
        } catch (const NumericalError& err) {
            throw NumericalError("snapshot " + std::to_string(j) + " of coarse edge " + std::to_string(coarse_edge) +
                                 ": " + err.what());
        }
    }
    set.cells = std::move(dom.cells);
    set.edges = std::move(dom.edges);
    return set;
}

/// R_snap: J x (#fine edges), row j = phi_j.
inline SpMat snapshot_matrix(const SnapshotSet& set, int num_fine_edges)
{
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(set.values.size()));
    for (int j = 0; j < set.size(); ++j)
        for (std::size_t k = 0; k < set.edges.size(); ++k) {
            const double v = set.values(j, static_cast<Eigen::Index>(k));
            if (v != 0.0) t.emplace_back(j, set.edges[k], v);
        }
    SpMat R(set.size(), num_fine_edges);
    R.setFromTriplets(t.begin(), t.end());
    return R;
}

} // namespace mgms
