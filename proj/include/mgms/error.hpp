#pragma once

#include "coarse.hpp"

namespace mgms {

/// ||u||^2_{kappa^-1} of an RT0 field, integrated exactly cell by cell.
inline double velocity_norm_squared(const FineMesh& mesh, const CoefficientField& kappa, const Vec& u)
{
    if (u.size() != mesh.num_edges()) throw std::invalid_argument("velocity DOF vector has wrong size");
    double total = 0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& e = mesh.cell_edges(c);
        const Eigen::Vector3d v(u[e[0]], u[e[1]], u[e[2]]);
        total += v.dot(rt0::oriented_mass(mesh, c, 1.0 / kappa[c]) * v);
    }
    return total;
}

/// 100 ||u_ms - u_h||_{kappa^-1} / ||u_h||_{kappa^-1}.
inline double velocity_error(const FineMesh& mesh, const CoefficientField& kappa, const Vec& u_h, const Vec& u_ms)
{
    if (u_ms.size() != u_h.size()) throw std::invalid_argument("velocity DOF vectors differ in size");
    const double ref = velocity_norm_squared(mesh, kappa, u_h);
    if (!(ref > 0)) throw InputError("reference velocity has zero norm");
    return 100.0 * std::sqrt(velocity_norm_squared(mesh, kappa, u_ms - u_h) / ref);
}

/// Area-weighted mean of a fine cell field over each coarse cell.
inline Vec coarse_average(const FineMesh& mesh, const CoarsePartition& partition, const Vec& p)
{
    if (p.size() != mesh.num_cells()) throw std::invalid_argument("pressure vector has wrong size");
    Vec avg(partition.num_cells());
    for (int k = 0; k < partition.num_cells(); ++k) {
        double s = 0;
        for (int c : partition.cell(k)) s += p[c] * mesh.area(c);
        avg[k] = s / partition.area(k);
    }
    return avg;
}

struct PressureError
{
    double value = 0;
    /// Set when the coarse reference vanishes; `value` is then the absolute
    /// L2 norm of P_H rather than a percentage.
    bool absolute = false;
};

/// Relative L2 error (%) between the coarse pressure and the coarse averages
/// of the fine pressure, both piecewise constant on coarse cells.
inline PressureError pressure_error(const FineMesh& mesh, const CoarsePartition& partition, const Vec& p_h,
                                    const Vec& P_H)
{
    if (P_H.size() != partition.num_cells()) throw std::invalid_argument("coarse pressure vector has wrong size");
    const Vec ref = coarse_average(mesh, partition, p_h);
    double diff = 0, norm = 0;
    for (int k = 0; k < partition.num_cells(); ++k) {
        diff += (P_H[k] - ref[k]) * (P_H[k] - ref[k]) * partition.area(k);
        norm += ref[k] * ref[k] * partition.area(k);
    }
    if (norm > 0) return {100.0 * std::sqrt(diff / norm), false};
    return {std::sqrt(diff), true};
}

/// One row of the experiment table.
struct ErrorReport
{
    std::string geometry;
    std::string test;
    int M = 0;
    int dof_coarse = 0;
    int dof_fine = 0;
    double e_u = 0;
    PressureError e_p;
    double Lambda = std::numeric_limits<double>::infinity();
    double beta = 0;
};

/// Error decay against Lambda^-1 over a basis-count sweep on one problem.
struct DecayDiagnostic
{
    struct Row
    {
        int M = 0;
        double e_u = 0;
        double inv_Lambda = 0;
        /// e_u * Lambda, or NaN when Lambda is infinite.
        double ratio = 0;
    };
    std::vector<Row> rows;
    bool monotone = true;
    bool Lambda_ascending = true;
    /// Largest finite ratio; the smallest C with e_u <= C / Lambda on those rows.
    double fitted_C = 0;
    /// e_u <= C / Lambda + slack on every row, including full-spectrum rows.
    bool bound_holds = true;
    /// The bound has no source term only when f equals its coarse averages.
    bool applicable = true;
};

/// Rows must be ordered by increasing M and share one fine problem.
/// `slack` is an absolute tolerance in percent.
inline DecayDiagnostic decay_diagnostic(std::span<const ErrorReport> sweep, bool source_is_coarse_constant,
                                        double slack = 1e-8)
{
    DecayDiagnostic d;
    d.applicable = source_is_coarse_constant;
    for (const auto& r : sweep) {
        DecayDiagnostic::Row row{r.M, r.e_u, 1.0 / r.Lambda, std::numeric_limits<double>::quiet_NaN()};
        if (std::isfinite(r.Lambda)) {
            row.ratio = r.e_u * r.Lambda;
            d.fitted_C = std::max(d.fitted_C, row.ratio);
        }
        if (!d.rows.empty()) {
            if (row.e_u > d.rows.back().e_u + slack) d.monotone = false;
            if (row.inv_Lambda > d.rows.back().inv_Lambda) d.Lambda_ascending = false;
        }
        d.rows.push_back(row);
    }
    for (const auto& row : d.rows)
        if (row.e_u > d.fitted_C * row.inv_Lambda + slack) d.bound_holds = false;
    return d;
}

/// True when f is constant on every coarse cell.
inline bool source_is_coarse_constant(const CoarsePartition& partition, std::span<const double> f)
{
    for (const auto& cells : partition.cells())
        for (int c : cells)
            if (f[c] != f[cells.front()]) return false;
    return true;
}

} // namespace mgms
