#pragma once

#include "common.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <memory>
#include <numeric>

namespace mgms {

/// Block system of the mixed problem
///
///     A u - B^T p = G      (rows of unconstrained velocity DOFs)
///     B u         = F
///     u_c         = g_c    (constrained velocity DOFs)
///
/// with A symmetric positive definite on the unconstrained DOFs. Pressure
/// gauges add sum_{T in group} w_T p_T = 0 per group.
struct SaddleSystem
{
    SpMat A;
    SpMat B;
    Vec G;
    Vec F;
    /// Sorted velocity DOFs carrying essential data.
    std::vector<int> constrained;
    Vec constrained_values;
    std::vector<std::vector<int>> pressure_gauges;
    /// Gauge weights per pressure DOF (cell areas); empty means unit weights.
    Vec pressure_weights;
    /// Every boundary velocity DOF is constrained, so pressure is only
    /// determined up to constants and the data must be compatible.
    bool neumann_only = false;

    int num_velocity() const { return static_cast<int>(A.rows()); }
    int num_pressure() const { return static_cast<int>(B.rows()); }
};

struct FlowSolution
{
    Vec u;
    Vec p;
    double velocity_residual = 0;
    double pressure_residual = 0;
};

/// Sparse LU of the symmetric indefinite KKT matrix, with constrained DOFs
/// eliminated symmetrically (zero row/column, unit diagonal). One
/// factorization serves any number of right-hand sides that share the
/// constrained set.
class SaddleSolver
{
public:
    static constexpr double residual_tolerance = 1e-10;

    explicit SaddleSolver(SaddleSystem sys) : sys_(std::move(sys))
    {
        const int nu = sys_.num_velocity(), np = sys_.num_pressure();
        if (sys_.A.cols() != nu || sys_.B.cols() != nu)
            throw std::invalid_argument("saddle system: A and B have inconsistent shapes");
        if (sys_.G.size() != nu || sys_.F.size() != np)
            throw std::invalid_argument("saddle system: right-hand sides have wrong sizes");
        if (static_cast<Eigen::Index>(sys_.constrained.size()) != sys_.constrained_values.size())
            throw std::invalid_argument("saddle system: constrained values size mismatch");

        fixed_.assign(nu, 0);
        for (int c : sys_.constrained) {
            if (c < 0 || c >= nu) throw std::invalid_argument("saddle system: constrained DOF out of range");
            fixed_[c] = 1;
        }

        gauges_ = sys_.pressure_gauges;
        if (sys_.neumann_only) {
            if (gauges_.empty()) {
                pinned_ = true;
                gauges_.push_back({0});
                compat_groups_.emplace_back(np);
                std::iota(compat_groups_.back().begin(), compat_groups_.back().end(), 0);
            } else {
                compat_groups_ = gauges_;
            }
        }

        const int ng = static_cast<int>(gauges_.size());
        const int n = nu + np + ng;
        std::vector<Triplet> t;
        t.reserve(sys_.A.nonZeros() + 2 * sys_.B.nonZeros() + nu + 2 * np);
        for (int k = 0; k < sys_.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(sys_.A, k); it; ++it)
                if (!fixed_[it.row()] && !fixed_[it.col()]) t.emplace_back(it.row(), it.col(), it.value());
        for (int k = 0; k < sys_.B.outerSize(); ++k)
            for (SpMat::InnerIterator it(sys_.B, k); it; ++it) {
                if (fixed_[it.col()]) continue;
                t.emplace_back(nu + it.row(), it.col(), it.value());
                t.emplace_back(it.col(), nu + it.row(), it.value());
            }
        for (int c : sys_.constrained) t.emplace_back(c, c, 1.0);
        for (int g = 0; g < ng; ++g)
            for (int cell : gauges_[g]) {
                const double w = pinned_ || sys_.pressure_weights.size() == 0 ? 1.0 : sys_.pressure_weights[cell];
                t.emplace_back(nu + np + g, nu + cell, w);
                t.emplace_back(nu + cell, nu + np + g, w);
            }
        kkt_.resize(n, n);
        kkt_.setFromTriplets(t.begin(), t.end());
        kkt_.makeCompressed();

        lu_ = std::make_unique<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
        lu_->analyzePattern(kkt_);
        lu_->factorize(kkt_);
        if (lu_->info() != Eigen::Success) throw NumericalError(diagnose_singular());
    }

    const SaddleSystem& system() const { return sys_; }

    FlowSolution solve() const { return solve(sys_.G, sys_.F, sys_.constrained_values); }

    FlowSolution solve(const Vec& G, const Vec& F, const Vec& values) const
    {
        const int nu = sys_.num_velocity(), np = sys_.num_pressure();
        const int n = static_cast<int>(kkt_.rows());
        Vec fixed_full = Vec::Zero(nu);
        for (std::size_t i = 0; i < sys_.constrained.size(); ++i) fixed_full[sys_.constrained[i]] = values[i];

        const Vec Bg = sys_.B * fixed_full;
        for (std::size_t g = 0; g < compat_groups_.size(); ++g) {
            double sum = 0, scale = 0;
            for (int cell : compat_groups_[g]) {
                sum += F[cell] - Bg[cell];
                scale += std::abs(F[cell]) + std::abs(Bg[cell]);
            }
            if (std::abs(sum) > 1e-12 * scale)
                throw NumericalError("compatibility violation in pure-Neumann group " + std::to_string(g) +
                                     ": net source minus boundary flux = " + std::to_string(sum));
        }

        Vec rhs = Vec::Zero(n);
        rhs.head(nu) = G - sys_.A * fixed_full;
        rhs.segment(nu, np) = F - Bg;
        for (std::size_t i = 0; i < sys_.constrained.size(); ++i) rhs[sys_.constrained[i]] = values[i];

        Vec x = lu_->solve(rhs);
        FlowSolution sol = unpack(x, G, F);
        const double tol = residual_tolerance * (1.0 + std::max({G.lpNorm<Eigen::Infinity>(), F.lpNorm<Eigen::Infinity>(),
                                                                 values.size() ? values.lpNorm<Eigen::Infinity>() : 0.0}));
        if (sol.velocity_residual > tol || sol.pressure_residual > tol) {
            x += lu_->solve(rhs - kkt_ * x);
            sol = unpack(x, G, F);
        }
        if (!(sol.velocity_residual <= tol && sol.pressure_residual <= tol))
            throw NumericalError("saddle solve residual above tolerance: velocity " +
                                 detail::format_double(sol.velocity_residual) + ", pressure " +
                                 detail::format_double(sol.pressure_residual));
        return sol;
    }

private:
    FlowSolution unpack(const Vec& x, const Vec& G, const Vec& F) const
    {
        const int nu = sys_.num_velocity(), np = sys_.num_pressure();
        FlowSolution s;
        s.u = x.head(nu);
        s.p = -x.segment(nu, np);
        Vec ru = sys_.A * s.u - sys_.B.transpose() * s.p - G;
        for (int c : sys_.constrained) ru[c] = 0;
        s.velocity_residual = ru.lpNorm<Eigen::Infinity>();
        s.pressure_residual = (sys_.B * s.u - F).lpNorm<Eigen::Infinity>();
        return s;
    }

    std::string diagnose_singular() const
    {
        const int np = sys_.num_pressure();
        std::vector<int> free_count(np, 0);
        for (int k = 0; k < sys_.B.outerSize(); ++k)
            for (SpMat::InnerIterator it(sys_.B, k); it; ++it)
                if (!fixed_[it.col()] && it.value() != 0) ++free_count[it.row()];
        for (int c = 0; c < np; ++c)
            if (free_count[c] == 0)
                return "singular saddle system: pressure block, DOF " + std::to_string(c) + " has no free velocity DOF";
        if (!sys_.neumann_only && gauges_.empty())
            return "singular saddle system: pressure block (pressure not fixed by boundary data, no gauge)";
        return "singular saddle system: velocity block or divergence coupling rank deficient (" +
               lu_->lastErrorMessage() + ")";
    }

    SaddleSystem sys_;
    std::vector<char> fixed_;
    std::vector<std::vector<int>> gauges_;
    std::vector<std::vector<int>> compat_groups_;
    bool pinned_ = false;
    SpMat kkt_;
    std::unique_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
};

inline FlowSolution solve_saddle(const SaddleSystem& sys)
{
    return SaddleSolver(sys).solve();
}

} // namespace mgms
