#pragma once

#include "cache.hpp"
#include "config.hpp"
#include "error.hpp"
#include "vtk.hpp"

#include <cstdio>

namespace mgms {

inline MeshWithPartition build_geometry(const GeometryConfig& g)
{
    if (g.kind == "rectangle") return generate_rectangle(g.nx, g.ny, g.lx, g.ly, g.ncoarse);
    if (g.kind == "rough") return generate_rough_channel(g.nx, g.ny, g.lx, g.walls, g.seed, g.ncoarse);
    if (g.kind == "file") return load_mesh(g.file);
    throw ConfigError("unknown geometry kind '" + g.kind + "'");
}

inline CoefficientField build_coefficient(const CoefficientConfig& k, const FineMesh& mesh)
{
    if (k.kind == "constant") {
        if (!(k.value > 0)) throw ConfigError("coefficient.value must be positive");
        return constant_coefficient(mesh, k.value);
    }
    if (k.kind == "log_uniform") return log_uniform_coefficient(mesh, k.kmin, k.kmax, k.seed, k.correlation_length);
    if (k.kind == "file") return load_coefficient(k.file, mesh.num_cells());
    throw ConfigError("unknown coefficient kind '" + k.kind + "'");
}

/// Work done in one online solve. Only the projection, downscaling and
/// error evaluation touch fine-grid data.
struct OnlineCounters
{
    std::string test;
    int M = 0;
    long coarse_unknowns = 0;
    long coarse_nonzeros = 0;
    long projection_fine_nonzeros = 0;
    long downscale_fine_nonzeros = 0;
    long error_fine_cells = 0;
};

struct ExperimentResult
{
    std::vector<ErrorReport> rows;
    /// One per test, over the M sweep.
    std::vector<DecayDiagnostic> decay;
    std::vector<OnlineCounters> counters;
    CacheStats cache;
    int fine_factorizations = 0;
    int offline_edges_built = 0;
};

namespace detail {

inline std::string fixed3(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string general(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    return out;
}

inline void check_balance(const char* what, const Vec& residual, const Vec& F)
{
    const double tol = 1e-10 * (1.0 + F.lpNorm<Eigen::Infinity>());
    if (residual.lpNorm<Eigen::Infinity>() > tol)
        throw NumericalError(std::string(what) + " mass balance violated: residual " +
                             general(residual.lpNorm<Eigen::Infinity>()));
}

} // namespace detail

inline constexpr const char* results_header = "geometry,test,M,DOF_c,DOF_f,e_u_h_pct,e_p_H_pct,Lambda,beta_H";

inline std::string format_report(const ErrorReport& r)
{
    return r.geometry + "," + r.test + "," + std::to_string(r.M) + "," + std::to_string(r.dof_coarse) + "," +
           std::to_string(r.dof_fine) + "," + detail::fixed3(r.e_u) + "," + detail::fixed3(r.e_p.value) + "," +
           detail::general(r.Lambda) + "," + detail::general(r.beta);
}

/// Offline stage only, through the cache when enabled.
inline std::vector<OfflineEdge> run_offline(const ExperimentConfig& cfg, const FineMesh& mesh,
                                            const CoarsePartition& partition, const CoefficientField& kappa,
                                            CacheStats& stats, std::ostream& log)
{
    if (!cfg.run.cache) return build_offline(mesh, partition, kappa, cfg.run.workers);
    return cached_offline(mesh, partition, kappa, std::filesystem::path(cfg.run.output) / "cache", cfg.run.workers,
                          stats, log);
}

/// Full experiment: one fine factorization shared by all tests, one offline
/// stage, one coarse solve per (test, M). Writes under run.output:
///   results.csv          results_header, one row per (test, M)
///   eigenvalues.csv      edge,l,lambda
///   coarse_pressure.csv  test,M,cell,P_H
///   decay.csv            test,M,e_u_h_pct,inv_Lambda,ratio
///   <test>_fine.vtk, <test>_M<max>.vtk  when run.vtk is set
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log)
{
    namespace fs = std::filesystem;
    const fs::path out_dir(cfg.run.output);
    fs::create_directories(out_dir);
    ExperimentResult result;

    const auto [mesh, partition] = build_geometry(cfg.geometry);
    const CoefficientField kappa = build_coefficient(cfg.coefficient, mesh);
    const int dof_fine = mesh.num_edges() + mesh.num_cells();

    std::vector<SaddleSystem> fine;
    std::vector<FlowSolution> reference;
    std::unique_ptr<SaddleSolver> solver;
    for (const auto& t : cfg.tests) {
        fine.push_back(assemble_fine(mesh, kappa, {t.p1, t.p2}, t.f));
        const auto& sys = fine.back();
        if (!solver || sys.neumann_only != fine.front().neumann_only) {
            solver = std::make_unique<SaddleSolver>(sys);
            ++result.fine_factorizations;
        }
        try {
            reference.push_back(solver->solve(sys.G, sys.F, sys.constrained_values));
        } catch (const NumericalError& e) {
            throw NumericalError("fine solve of " + t.name + ": " + e.what());
        }
        detail::check_balance("fine", sys.B * reference.back().u - sys.F, sys.F);
    }

    const auto offline = run_offline(cfg, mesh, partition, kappa, result.cache, log);
    result.offline_edges_built = cfg.run.cache ? result.cache.misses + result.cache.rebuilt : partition.num_edges();
    const int jmin = min_snapshot_count(offline);
    for (int m : cfg.run.M)
        if (m > jmin)
            throw ConfigError("run.M value " + std::to_string(m) + " exceeds the smallest snapshot space (" +
                              std::to_string(jmin) + ")");

    {
        auto csv = detail::open_output(out_dir / "eigenvalues.csv");
        csv << "edge,l,lambda\n";
        for (std::size_t i = 0; i < offline.size(); ++i)
            for (Eigen::Index l = 0; l < offline[i].spectrum.eigenvalues.size(); ++l)
                csv << i << ',' << l + 1 << ',' << detail::format_double(offline[i].spectrum.eigenvalues[l]) << '\n';
    }

    auto pressure_csv = detail::open_output(out_dir / "coarse_pressure.csv");
    pressure_csv << "test,M,cell,P_H\n";
    std::vector<Vec> last_ms(cfg.tests.size()), last_P(cfg.tests.size());

    for (int m : cfg.run.M) {
        const MultiscaleBasis basis = assemble_basis(offline, m);
        const ProjectionOperator R = make_projection(basis, mesh, partition);
        for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
            const auto& test = cfg.tests[t];
            const CoarseSystem cs = assemble_coarse(fine[t], R);
            CoarseSolution sol;
            try {
                sol = solve_coarse(cs, R);
            } catch (const NumericalError& e) {
                throw NumericalError("coarse solve of " + test.name + " at M=" + std::to_string(m) + ": " + e.what());
            }
            detail::check_balance("coarse", coarse_cell_outflow(fine[t], R, sol.u_ms) - cs.saddle.F, cs.saddle.F);

            ErrorReport r;
            r.geometry = cfg.geometry.name;
            r.test = test.name;
            r.M = m;
            r.dof_coarse = basis.size() + partition.num_cells();
            r.dof_fine = dof_fine;
            r.e_u = velocity_error(mesh, kappa, reference[t].u, sol.u_ms);
            r.e_p = pressure_error(mesh, partition, reference[t].p, sol.P);
            if (r.e_p.absolute)
                log << "note: " << test.name << " has zero coarse reference pressure; e_p_H is an absolute norm\n";
            r.Lambda = basis.Lambda;
            r.beta = partition.num_cells() >= 2 ? estimate_infsup(cs) : std::numeric_limits<double>::quiet_NaN();
            result.rows.push_back(r);

            OnlineCounters oc;
            oc.test = test.name;
            oc.M = m;
            oc.coarse_unknowns = cs.saddle.num_velocity() + cs.saddle.num_pressure();
            oc.coarse_nonzeros = cs.saddle.A.nonZeros() + 2 * cs.saddle.B.nonZeros();
            oc.projection_fine_nonzeros = R.Ru.nonZeros() + fine[t].A.nonZeros() + fine[t].B.nonZeros();
            oc.downscale_fine_nonzeros = R.Ru.nonZeros();
            oc.error_fine_cells = mesh.num_cells();
            result.counters.push_back(oc);
            if (cfg.run.verbose)
                log << "online " << test.name << " M=" << m << ": coarse unknowns " << oc.coarse_unknowns
                    << ", coarse nonzeros " << oc.coarse_nonzeros << ", projection nonzeros "
                    << oc.projection_fine_nonzeros << ", downscale nonzeros " << oc.downscale_fine_nonzeros
                    << ", error cells " << oc.error_fine_cells << '\n';

            for (Eigen::Index k = 0; k < sol.P.size(); ++k)
                pressure_csv << test.name << ',' << m << ',' << k << ',' << detail::format_double(sol.P[k]) << '\n';
            last_ms[t] = sol.u_ms;
            last_P[t] = sol.P;
        }
    }

    {
        auto csv = detail::open_output(out_dir / "decay.csv");
        csv << "test,M,e_u_h_pct,inv_Lambda,ratio\n";
        for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
            std::vector<ErrorReport> sweep;
            for (const auto& r : result.rows)
                if (r.test == cfg.tests[t].name) sweep.push_back(r);
            const std::vector<double> f(mesh.num_cells(), cfg.tests[t].f);
            result.decay.push_back(decay_diagnostic(sweep, source_is_coarse_constant(partition, f)));
            for (const auto& row : result.decay.back().rows)
                csv << cfg.tests[t].name << ',' << row.M << ',' << detail::fixed3(row.e_u) << ','
                    << detail::general(row.inv_Lambda) << ',' << detail::general(row.ratio) << '\n';
        }
    }

    {
        auto csv = detail::open_output(out_dir / "results.csv");
        csv << results_header << '\n';
        for (const auto& r : result.rows) csv << format_report(r) << '\n';
    }

    if (cfg.run.vtk) {
        const Vec kv = Eigen::Map<const Vec>(kappa.values().data(), kappa.size());
        for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
            const auto& name = cfg.tests[t].name;
            {
                auto f = detail::open_output(out_dir / (name + "_fine.vtk"));
                write_vtk(f, mesh, {name + " fine reference", {{"pressure", reference[t].p}, {"kappa", kv}},
                                    {{"velocity", reference[t].u}}});
            }
            auto f = detail::open_output(out_dir / (name + "_M" + std::to_string(cfg.run.M.back()) + ".vtk"));
            write_vtk(f, mesh, {name + " multiscale M=" + std::to_string(cfg.run.M.back()),
                                {{"pressure", expand_coarse(partition, last_P[t], mesh.num_cells())}, {"kappa", kv}},
                                {{"velocity", last_ms[t]}}});
        }
    }
    return result;
}

} // namespace mgms
