#include "mgms/mgms.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Removes "--section.key value" and "--section.key=value" arguments from
/// `args` before the remaining flags reach the command-line parser.
Overrides extract_overrides(std::vector<std::string>& args)
{
    Overrides out;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        const std::string body = a.rfind("--", 0) == 0 ? a.substr(2) : std::string();
        const auto eq = body.find('=');
        if (body.substr(0, eq).find('.') == std::string::npos) {
            rest.push_back(a);
            continue;
        }
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= args.size()) throw mgms::ConfigError("override '" + a + "' needs a value");
            out.emplace_back(body, args[++i]);
        }
    }
    args = std::move(rest);
    return out;
}

struct Invocation
{
    std::string config;
    std::string mesh_out;
    std::string kappa_out;
};

int cmd_run(const mgms::ExperimentConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = mgms::run_experiment(cfg, std::cerr);
    std::cout << mgms::results_header << '\n';
    for (const auto& r : result.rows) std::cout << mgms::format_report(r) << '\n';
    for (std::size_t t = 0; t < result.decay.size(); ++t) {
        const auto& d = result.decay[t];
        std::cerr << cfg.tests[t].name << ": monotone=" << (d.monotone ? "yes" : "no")
                  << " fitted_C=" << d.fitted_C << " bound=" << (d.bound_holds ? "holds" : "violated")
                  << (d.applicable ? "" : " (source not coarse-constant; bound not applicable)") << '\n';
    }
    if (cfg.run.verbose) {
        std::cerr << "fine factorizations " << result.fine_factorizations << ", offline edges built "
                  << result.offline_edges_built << ", cache hits " << result.cache.hits << '\n';
        std::cerr << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                  << " s\n";
    }
    return 0;
}

int cmd_offline(const mgms::ExperimentConfig& cfg)
{
    const auto [mesh, partition] = mgms::build_geometry(cfg.geometry);
    const auto kappa = mgms::build_coefficient(cfg.coefficient, mesh);
    mgms::CacheStats stats;
    const auto dir = std::filesystem::path(cfg.run.output) / "cache";
    mgms::cached_offline(mesh, partition, kappa, dir, cfg.run.workers, stats, std::cerr);
    std::cout << "offline cache " << dir.string() << ": " << stats.hits << " reused, "
              << stats.misses + stats.rebuilt << " built\n";
    return 0;
}

int cmd_mesh_gen(const mgms::ExperimentConfig& cfg, const Invocation& inv)
{
    const auto [mesh, partition] = mgms::build_geometry(cfg.geometry);
    mgms::save_mesh(inv.mesh_out, mesh, partition);
    std::cout << "wrote " << inv.mesh_out << ": " << mesh.num_cells() << " cells, " << mesh.num_edges()
              << " edges, " << partition.num_cells() << " coarse cells, " << partition.num_edges()
              << " coarse edges\n";
    if (!inv.kappa_out.empty()) {
        std::ofstream out(inv.kappa_out);
        if (!out) throw mgms::InputError("cannot write '" + inv.kappa_out + "'");
        mgms::write_coefficient(out, mgms::build_coefficient(cfg.coefficient, mesh));
        std::cout << "wrote " << inv.kappa_out << '\n';
    }
    return 0;
}

int cmd_export(const mgms::ExperimentConfig& cfg)
{
    const auto [mesh, partition] = mgms::build_geometry(cfg.geometry);
    const auto kappa = mgms::build_coefficient(cfg.coefficient, mesh);
    std::filesystem::create_directories(cfg.run.output);
    const mgms::Vec kv = Eigen::Map<const mgms::Vec>(kappa.values().data(), kappa.size());
    for (const auto& t : cfg.tests) {
        const auto sys = mgms::assemble_fine(mesh, kappa, {t.p1, t.p2}, t.f);
        const auto sol = mgms::solve_saddle(sys);
        const auto path = std::filesystem::path(cfg.run.output) / (t.name + "_fine.vtk");
        std::ofstream out(path);
        if (!out) throw mgms::InputError("cannot write '" + path.string() + "'");
        mgms::write_vtk(out, mesh, {t.name + " fine reference", {{"pressure", sol.p}, {"kappa", kv}},
                                    {{"velocity", sol.u}}});
        std::cout << "wrote " << path.string() << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multiscale mixed solver for Darcy flow in channels"};
    app.require_subcommand(1);
    Invocation inv;

    auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", inv.config, "Experiment config file (section/key = value)");
        sub->footer("Any config key can be overridden with --section.key value.");
        return sub;
    };
    auto* run = add("run", "Fine reference, offline stage and coarse solves over the M sweep");
    auto* offline = add("offline", "Build or refresh the offline cache only");
    auto* mesh_gen = add("mesh-gen", "Write the configured geometry as a mesh file");
    mesh_gen->add_option("-o,--output", inv.mesh_out, "Mesh file to write")->required();
    mesh_gen->add_option("--kappa", inv.kappa_out, "Also write the coefficient field to this file");
    auto* exp = add("export", "Write VTK files of the fine reference solutions");

    std::vector<std::string> args(argv + 1, argv + argc);
    Overrides overrides;
    try {
        overrides = extract_overrides(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const mgms::ConfigError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const auto cfg = mgms::load_config(inv.config, overrides);
        if (sub == run) return cmd_run(cfg);
        if (sub == offline) return cmd_offline(cfg);
        if (sub == mesh_gen) return cmd_mesh_gen(cfg, inv);
        if (sub == exp) return cmd_export(cfg);
    } catch (const mgms::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const mgms::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
