#pragma once

#include "spectral.hpp"

namespace mgms {

/// R_u stacks the multiscale velocity basis as rows; R_p aggregates fine
/// cells into coarse cells.
struct ProjectionOperator
{
    SpMat Ru;
    SpMat Rp;
};

inline SpMat pressure_aggregation(const CoarsePartition& partition, int num_fine_cells)
{
    std::vector<Triplet> t;
    t.reserve(num_fine_cells);
    for (int k = 0; k < partition.num_cells(); ++k)
        for (int c : partition.cell(k)) t.emplace_back(k, c, 1.0);
    SpMat R(partition.num_cells(), num_fine_cells);
    R.setFromTriplets(t.begin(), t.end());
    return R;
}

inline ProjectionOperator make_projection(const MultiscaleBasis& basis, const FineMesh& mesh,
                                          const CoarsePartition& partition)
{
    return {basis.projection(mesh.num_edges()), pressure_aggregation(partition, mesh.num_cells())};
}

/// Projected saddle system plus the Gram matrices of the norms used by the
/// inf-sup estimate.
struct CoarseSystem
{
    SaddleSystem saddle;
    /// R_u (A + B^T D^-1 B) R_u^T: H(div; kappa^-1) inner products of the basis.
    Mat velocity_norm;
    /// Coarse cell areas (L2 Gram matrix of the coarse pressure space).
    Vec pressure_mass;
};

/// A_H = R_u A R_u^T, B_H = R_p B R_u^T, G_H = R_u G, F_H = R_p F.
inline CoarseSystem assemble_coarse(const SaddleSystem& fine, const ProjectionOperator& R)
{
    if (R.Ru.cols() != fine.num_velocity() || R.Rp.cols() != fine.num_pressure())
        throw std::invalid_argument("projection shape does not match the fine system");
    if (fine.pressure_weights.size() != fine.num_pressure())
        throw std::invalid_argument("fine system carries no cell areas");
    const SpMat RuT = R.Ru.transpose();
    CoarseSystem c;
    c.saddle.A = R.Ru * fine.A * RuT;
    c.saddle.B = R.Rp * fine.B * RuT;
    c.saddle.G = R.Ru * fine.G;
    c.saddle.F = R.Rp * fine.F;
    c.saddle.constrained_values = Vec(0);
    c.pressure_mass = R.Rp * fine.pressure_weights;
    c.saddle.pressure_weights = c.pressure_mass;
    c.saddle.neumann_only = fine.neumann_only;

    const Vec inv_area = fine.pressure_weights.cwiseInverse();
    const SpMat div = fine.B * RuT;
    c.velocity_norm = Mat(c.saddle.A) + Mat(div.transpose() * inv_area.asDiagonal() * div);
    return c;
}

struct CoarseSolution
{
    Vec U;
    Vec P;
    /// Downscaled fine velocity R_u^T U.
    Vec u_ms;
    double velocity_residual = 0;
    double pressure_residual = 0;
};

namespace detail {

inline void check_coarse_divergence_rank(const CoarseSystem& sys)
{
    const Mat B(sys.saddle.B);
    const Mat BBt = B * B.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(BBt);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const int allowed_null = sys.saddle.neumann_only ? 1 : 0;
    int null_count = 0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
        if (es.eigenvalues()[k] <= 1e-12 * top) ++null_count;
    if (top == 0 || null_count > allowed_null) {
        const Vec mode = es.eigenvectors().col(allowed_null);
        std::string s;
        for (Eigen::Index k = 0; k < mode.size(); ++k) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%.3g", k ? " " : "", mode[k]);
            s += buf;
        }
        throw NumericalError("coarse divergence matrix is rank deficient; unconstrained pressure mode [" + s + "]");
    }
}

} // namespace detail

inline CoarseSolution solve_coarse(const CoarseSystem& sys, const ProjectionOperator& R)
{
    detail::check_coarse_divergence_rank(sys);
    const FlowSolution s = SaddleSolver(sys.saddle).solve();
    CoarseSolution out;
    out.U = s.u;
    out.P = s.p;
    out.u_ms = R.Ru.transpose() * s.u;
    out.velocity_residual = s.velocity_residual;
    out.pressure_residual = s.pressure_residual;
    return out;
}

/// Smallest generalized singular value of B_H between the H(div; kappa^-1)
/// velocity norm and the L2 pressure norm:
///   beta_H = min_p sup_u (p, div u) / (|u|_H(div) |p|_L2).
inline double estimate_infsup(const CoarseSystem& sys)
{
    if (sys.pressure_mass.size() < 2)
        throw std::invalid_argument("inf-sup estimate needs at least two coarse cells");
    Eigen::LLT<Mat> llt(sys.velocity_norm);
    if (llt.info() != Eigen::Success) throw NumericalError("coarse velocity norm matrix is not positive definite");
    const Mat Bt(sys.saddle.B.transpose());
    const Mat X = llt.matrixL().solve(Bt);
    const Vec scale = sys.pressure_mass.cwiseSqrt().cwiseInverse();
    const Mat S = scale.asDiagonal() * (X.transpose() * X) * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(es.eigenvalues()[0], 0.0));
}

/// Piecewise-constant fine-cell representation of a coarse pressure.
inline Vec expand_coarse(const CoarsePartition& partition, const Vec& P, int num_fine_cells)
{
    if (P.size() != partition.num_cells()) throw std::invalid_argument("coarse vector has wrong size");
    Vec p(num_fine_cells);
    for (int k = 0; k < partition.num_cells(); ++k)
        for (int c : partition.cell(k)) p[c] = P[k];
    return p;
}

/// Net flux of a fine velocity out of each coarse cell, R_p B u.
inline Vec coarse_cell_outflow(const SaddleSystem& fine, const ProjectionOperator& R, const Vec& u)
{
    return R.Rp * (fine.B * u);
}

} // namespace mgms
