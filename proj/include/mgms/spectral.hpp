#pragma once

#include "parallel.hpp"
#include "snapshot.hpp"

#include <Eigen/Eigenvalues>

#include <limits>

namespace mgms {

/// Eigenpairs of A~ Psi = lambda S~ Psi in snapshot coordinates.
struct LocalSpectrum
{
    /// Ascending.
    Vec eigenvalues;
    /// Columns are S~-orthonormal eigenvectors.
    Mat eigenvectors;
    /// A~ = R_snap A^(i) R_snap^T, the kappa^-1 flux form on E_i.
    Mat edge_form;
    /// S~ = R_snap S^(i) R_snap^T, the H(div; kappa^-1) form on omega_i.
    Mat mass_form;
};

/// kappa on a fine edge for the E_i flux form: harmonic mean of the two
/// incident cells, or the single incident value on the boundary.
inline double edge_coefficient(const FineMesh& mesh, const CoefficientField& kappa, int e)
{
    const auto [c0, c1] = mesh.edge_cells(e);
    if (c1 < 0) return kappa[c0];
    return 2.0 * kappa[c0] * kappa[c1] / (kappa[c0] + kappa[c1]);
}

/// Projected forms of one snapshot set.
inline std::pair<Mat, Mat> spectral_forms(const FineMesh& mesh, const CoarsePartition& partition,
                                          const CoefficientField& kappa, const SnapshotSet& set)
{
    const int ne = static_cast<int>(set.edges.size());
    std::vector<int> edge_map(mesh.num_edges(), -1);
    for (int k = 0; k < ne; ++k) edge_map[set.edges[k]] = k;
    const auto ops = assemble_operators(mesh, kappa, set.cells, edge_map, ne);

    // On edge e the RT0 normal component is u_e / |e|, so the flux form is
    // diagonal with weight 1 / (kappa_e |e|).
    Mat trace(set.size(), set.trace.size());
    Vec weight(set.trace.size());
    const auto& fine = partition.edge(set.coarse_edge).fine_edges;
    for (std::size_t j = 0; j < set.trace.size(); ++j) {
        trace.col(static_cast<Eigen::Index>(j)) = set.values.col(set.trace[j]);
        weight[static_cast<Eigen::Index>(j)] = 1.0 / (edge_coefficient(mesh, kappa, fine[j]) * mesh.length(fine[j]));
    }
    Mat edge_form = trace * weight.asDiagonal() * trace.transpose();

    const Mat phi_t = set.values.transpose();
    const Mat div = ops.divergence * phi_t;
    Vec inv_area(set.cells.size());
    for (std::size_t r = 0; r < set.cells.size(); ++r)
        inv_area[static_cast<Eigen::Index>(r)] = 1.0 / mesh.area(set.cells[r]);
    Mat mass_form = set.values * (ops.mass * phi_t) + div.transpose() * inv_area.asDiagonal() * div;
    return {std::move(edge_form), std::move(mass_form)};
}

inline LocalSpectrum local_spectral(const FineMesh& mesh, const CoarsePartition& partition,
                                    const CoefficientField& kappa, const SnapshotSet& set)
{
    if (set.size() < 1) throw std::invalid_argument("empty snapshot set");
    LocalSpectrum s;
    std::tie(s.edge_form, s.mass_form) = spectral_forms(mesh, partition, kappa, set);

    Eigen::LLT<Mat> llt(s.mass_form);
    if (llt.info() != Eigen::Success)
        throw NumericalError("snapshot Gram matrix of coarse edge " + std::to_string(set.coarse_edge) +
                             " is not positive definite (rank-deficient snapshots)");
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(s.edge_form, s.mass_form,
                                                      Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success)
        throw NumericalError("generalized eigensolver failed on coarse edge " + std::to_string(set.coarse_edge));
    s.eigenvalues = ges.eigenvalues();
    s.eigenvectors = ges.eigenvectors();
    for (Eigen::Index l = 0; l < s.eigenvectors.cols(); ++l) {
        Eigen::Index at = 0;
        s.eigenvectors.col(l).cwiseAbs().maxCoeff(&at);
        if (s.eigenvectors(at, l) < 0) s.eigenvectors.col(l) *= -1.0;
    }
    return s;
}

/// Selected modes of one coarse edge, realised on the fine edges of omega_i.
struct EdgeBasis
{
    int coarse_edge = -1;
    int selected = 0;
    Vec eigenvalues;
    /// lambda_{M+1}, or +inf when every mode is selected.
    double next_eigenvalue = std::numeric_limits<double>::infinity();
    std::vector<int> edges;
    /// Row l is psi_l = R_snap^T Psi_l restricted to `edges`.
    Mat vectors;
};

inline EdgeBasis select_basis(const SnapshotSet& set, const LocalSpectrum& spectrum, int count)
{
    const int J = set.size();
    if (count < 1 || count > J)
        throw std::out_of_range("basis count " + std::to_string(count) + " outside [1, " + std::to_string(J) +
                                "] on coarse edge " + std::to_string(set.coarse_edge));
    EdgeBasis b;
    b.coarse_edge = set.coarse_edge;
    b.selected = count;
    b.eigenvalues = spectrum.eigenvalues;
    if (count < J) b.next_eigenvalue = spectrum.eigenvalues[count];
    b.edges = set.edges;
    b.vectors = spectrum.eigenvectors.leftCols(count).transpose() * set.values;
    return b;
}

struct OfflineEdge
{
    SnapshotSet snapshots;
    LocalSpectrum spectrum;
};

struct MultiscaleBasis
{
    std::vector<EdgeBasis> edges;
    /// min_i lambda^(i)_{M_i + 1}.
    double Lambda = std::numeric_limits<double>::infinity();

    int size() const
    {
        int n = 0;
        for (const auto& e : edges) n += e.selected;
        return n;
    }

    /// R_u: one row per basis function, edges in coarse-edge order.
    SpMat projection(int num_fine_edges) const
    {
        std::vector<Triplet> t;
        int row = 0;
        for (const auto& e : edges)
            for (int l = 0; l < e.selected; ++l, ++row)
                for (std::size_t k = 0; k < e.edges.size(); ++k) {
                    const double v = e.vectors(l, static_cast<Eigen::Index>(k));
                    if (v != 0.0) t.emplace_back(row, e.edges[k], v);
                }
        SpMat R(row, num_fine_edges);
        R.setFromTriplets(t.begin(), t.end());
        return R;
    }
};

inline OfflineEdge build_offline_edge(const FineMesh& mesh, const CoarsePartition& partition,
                                      const CoefficientField& kappa, int i)
{
    try {
        OfflineEdge e;
        e.snapshots = build_snapshots(mesh, partition, kappa, i);
        e.spectrum = local_spectral(mesh, partition, kappa, e.snapshots);
        return e;
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("offline stage, coarse edge ") + std::to_string(i) + ": " + e.what());
    }
}

/// Snapshots and spectra of every coarse edge.
inline std::vector<OfflineEdge> build_offline(const FineMesh& mesh, const CoarsePartition& partition,
                                              const CoefficientField& kappa, int workers = 1)
{
    std::vector<OfflineEdge> out(partition.num_edges());
    parallel_for(partition.num_edges(), workers,
                 [&](int i) { out[i] = build_offline_edge(mesh, partition, kappa, i); });
    return out;
}

inline int min_snapshot_count(std::span<const OfflineEdge> offline)
{
    int m = std::numeric_limits<int>::max();
    for (const auto& e : offline) m = std::min(m, e.snapshots.size());
    return m;
}

inline MultiscaleBasis assemble_basis(std::span<const OfflineEdge> offline, std::span<const int> counts)
{
    if (counts.size() != offline.size()) throw std::invalid_argument("one basis count per coarse edge required");
    MultiscaleBasis basis;
    for (std::size_t i = 0; i < offline.size(); ++i) {
        basis.edges.push_back(select_basis(offline[i].snapshots, offline[i].spectrum, counts[i]));
        basis.Lambda = std::min(basis.Lambda, basis.edges.back().next_eigenvalue);
    }
    return basis;
}

inline MultiscaleBasis assemble_basis(std::span<const OfflineEdge> offline, int count)
{
    const std::vector<int> counts(offline.size(), count);
    return assemble_basis(offline, counts);
}

inline MultiscaleBasis build_all(const FineMesh& mesh, const CoarsePartition& partition,
                                 const CoefficientField& kappa, int count, int workers = 1)
{
    const auto offline = build_offline(mesh, partition, kappa, workers);
    if (count > min_snapshot_count(offline))
        throw std::out_of_range("basis count " + std::to_string(count) + " exceeds the smallest snapshot space (" +
                                std::to_string(min_snapshot_count(offline)) + ")");
    return assemble_basis(offline, count);
}

} // namespace mgms
