#include "mgms/mgms.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace mgms;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("mgms-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(read_config_values(in));
}

ExperimentConfig small_config(const fs::path& out)
{
    ExperimentConfig c = parse("[geometry]\nkind = rectangle\nnx = 40\nny = 8\nncoarse = 5\n"
                               "[coefficient]\nkind = log_uniform\n"
                               "[problem]\ntests = test1, test2\n"
                               "[run]\nM = 1, 2, 4, 8\n");
    c.run.output = out.string();
    return c;
}

const char* const csv_files[] = {"results.csv", "eigenvalues.csv", "coarse_pressure.csv", "decay.csv"};

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(MGMS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, DefaultsAndSections)
{
    const auto c = parse("# comment\n[geometry]\n; another\nkind = rough\nnx = 64\n[run]\nverbose = yes\n");
    EXPECT_EQ(c.geometry.kind, "rough");
    EXPECT_EQ(c.geometry.name, "rough");
    EXPECT_EQ(c.geometry.nx, 64);
    EXPECT_EQ(c.geometry.ny, 32);
    EXPECT_EQ(c.coefficient.kind, "constant");
    ASSERT_EQ(c.tests.size(), 1u);
    EXPECT_EQ(c.tests[0].name, "test1");
    EXPECT_EQ(c.run.M, (std::vector<int>{1, 2, 4, 8, 12}));
    EXPECT_TRUE(c.run.verbose);
    EXPECT_TRUE(c.run.cache);
}

TEST(Config, BuiltInAndCustomTests)
{
    const auto c = parse("[problem]\ntests = test2, custom, test1\np1 = 2\nf = -0.5\n");
    ASSERT_EQ(c.tests.size(), 3u);
    EXPECT_EQ(c.tests[0].f, 1.0);
    EXPECT_EQ(c.tests[0].p1, 0.0);
    EXPECT_EQ(c.tests[1].p1, 2.0);
    EXPECT_EQ(c.tests[1].p2, 0.0);
    EXPECT_EQ(c.tests[1].f, -0.5);
    EXPECT_EQ(c.tests[2].p1, 1.0);
}

TEST(Config, OverridesReplaceFileValues)
{
    const fs::path dir = scratch("config-overrides");
    {
        std::ofstream f(dir / "c.ini");
        f << "[geometry]\nnx = 64\n[run]\nM = 1, 2\n";
    }
    const auto c = load_config((dir / "c.ini").string(), {{"geometry.nx", "16"}, {"run.M", " 3 "}});
    EXPECT_EQ(c.geometry.nx, 16);
    EXPECT_EQ(c.run.M, (std::vector<int>{3}));
    EXPECT_THROW(load_config((dir / "missing.ini").string()), ConfigError);
    EXPECT_THROW(load_config("", {{"nx", "3"}}), ConfigError);
}

TEST(Config, RejectsInvalidInput)
{
    const char* const bad[] = {
        "[geometry]\nnxx = 3\n",
        "[geometry]\nkind = circle\n",
        "[geometry]\nkind = file\n",
        "[geometry]\nfile = mesh.txt\n",
        "[coefficient]\nkind = file\n",
        "[geometry]\nnx = 3.5\n",
        "[geometry]\nnx = ten\n",
        "[run]\nM = 1, 4, 2\n",
        "[run]\nM = 1, 1\n",
        "[run]\nM = 0, 1\n",
        "[run]\nM = 1,,2\n",
        "[run]\nworkers = 0\n",
        "[run]\ncache = maybe\n",
        "[problem]\ntests = test3\n",
        "[problem]\ntests = test1, test1\n",
        "[problem]\ntests = test1\np1 = 2\n",
        "nx = 3\n",
        "[geometry\nnx = 3\n",
        "[geometry]\nnx = 64 ; trailing text is not a comment\n",
    };
    for (const char* text : bad) EXPECT_THROW(parse(text), ConfigError) << text;
}

TEST(Vtk, LegacyLayout)
{
    const auto [mesh, part] = generate_rectangle(2, 1, 2.0, 1.0, 1);
    const auto kappa = constant_coefficient(mesh, 1.0);
    const auto sol = solve_saddle(assemble_fine(mesh, kappa, {1, 0}, 0));
    std::ostringstream out;
    write_vtk(out, mesh, {"demo", {{"pressure", sol.p}}, {{"velocity", sol.u}}});

    std::istringstream in(out.str());
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    const int n = mesh.num_nodes(), m = mesh.num_cells();
    ASSERT_EQ(lines.size(), std::size_t(4 + 1 + n + 1 + m + 1 + m + 1 + 2 + m + 1 + m));
    EXPECT_EQ(lines[0], "# vtk DataFile Version 3.0");
    EXPECT_EQ(lines[1], "demo");
    EXPECT_EQ(lines[2], "ASCII");
    EXPECT_EQ(lines[3], "DATASET UNSTRUCTURED_GRID");
    EXPECT_EQ(lines[4], "POINTS 6 double");
    std::size_t at = 5 + n;
    EXPECT_EQ(lines[at], "CELLS 4 16");
    for (int c = 0; c < m; ++c) {
        std::istringstream row(lines[at + 1 + c]);
        int k, a, b, d;
        row >> k >> a >> b >> d;
        EXPECT_EQ(k, 3);
        EXPECT_EQ((std::array<int, 3>{a, b, d}), mesh.cell(c));
    }
    at += 1 + m;
    EXPECT_EQ(lines[at], "CELL_TYPES 4");
    for (int c = 0; c < m; ++c) EXPECT_EQ(lines[at + 1 + c], "5");
    at += 1 + m;
    EXPECT_EQ(lines[at], "CELL_DATA 4");
    EXPECT_EQ(lines[at + 1], "SCALARS pressure double 1");
    EXPECT_EQ(lines[at + 2], "LOOKUP_TABLE default");
    at += 3 + m;
    EXPECT_EQ(lines[at], "VECTORS velocity double");
    // Uniform flow u = (1/2, 0) for a unit pressure drop over length 2.
    for (int c = 0; c < m; ++c) {
        std::istringstream row(lines[at + 1 + c]);
        double x, y, z;
        row >> x >> y >> z;
        EXPECT_NEAR(x, 0.5, 1e-12);
        EXPECT_NEAR(y, 0.0, 1e-12);
        EXPECT_EQ(z, 0.0);
    }
    EXPECT_THROW(write_vtk(out, mesh, {"bad", {{"p", Vec::Zero(3)}}, {}}), std::invalid_argument);
}

TEST(Cache, RoundTripIsExactAndBytesAreReproducible)
{
    const fs::path a = scratch("cache-a"), b = scratch("cache-b");
    const auto [mesh, part] = generate_rough_channel(40, 8, 1.0, RoughWalls{}, 2, 5);
    const auto kappa = log_uniform_coefficient(mesh, 1.0, 1000.0, 9, 0.05);
    std::ostringstream warn;
    CacheStats sa, sb, sc;
    const auto built = cached_offline(mesh, part, kappa, a, 1, sa, warn);
    cached_offline(mesh, part, kappa, b, 2, sb, warn);
    EXPECT_EQ(sa.misses, part.num_edges());
    EXPECT_EQ(sa.hits, 0);
    for (const auto& entry : fs::directory_iterator(a))
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();

    const auto loaded = cached_offline(mesh, part, kappa, a, 1, sc, warn);
    EXPECT_EQ(sc.hits, part.num_edges());
    EXPECT_EQ(sc.misses + sc.rebuilt, 0);
    EXPECT_TRUE(warn.str().empty());
    for (int i = 0; i < part.num_edges(); ++i) {
        EXPECT_EQ(loaded[i].snapshots.values, built[i].snapshots.values);
        EXPECT_EQ(loaded[i].snapshots.cells, built[i].snapshots.cells);
        EXPECT_EQ(loaded[i].snapshots.edges, built[i].snapshots.edges);
        EXPECT_EQ(loaded[i].snapshots.trace, built[i].snapshots.trace);
        EXPECT_EQ(loaded[i].spectrum.eigenvalues, built[i].spectrum.eigenvalues);
        EXPECT_EQ(loaded[i].spectrum.eigenvectors, built[i].spectrum.eigenvectors);
        EXPECT_EQ(loaded[i].spectrum.edge_form, built[i].spectrum.edge_form);
        EXPECT_EQ(loaded[i].spectrum.mass_form, built[i].spectrum.mass_form);
    }
}

TEST(Cache, ReaderRejectsDamagedOrForeignEntries)
{
    const auto [mesh, part] = generate_rectangle(8, 4, 1.0, 0.1, 2);
    const auto kappa = constant_coefficient(mesh, 1.0);
    const auto e = build_offline_edge(mesh, part, kappa, 1);
    std::ostringstream out;
    cache::write_edge(out, 11, 22, e);
    const std::string bytes = out.str();
    auto read = [&](const std::string& s, std::uint64_t mh, std::uint64_t kh, int edge) {
        std::istringstream in(s);
        return cache::read_edge(in, mh, kh, edge).has_value();
    };
    EXPECT_TRUE(read(bytes, 11, 22, 1));
    EXPECT_FALSE(read(bytes, 12, 22, 1));
    EXPECT_FALSE(read(bytes, 11, 23, 1));
    EXPECT_FALSE(read(bytes, 11, 22, 0));
    EXPECT_FALSE(read(bytes.substr(0, bytes.size() - 1), 11, 22, 1));
    EXPECT_FALSE(read(bytes + "x", 11, 22, 1));
    std::string magic = bytes;
    magic[0] = 'X';
    EXPECT_FALSE(read(magic, 11, 22, 1));
    EXPECT_FALSE(read("", 11, 22, 1));
}

TEST(Cache, CorruptEntryIsRebuiltWithWarning)
{
    const fs::path dir = scratch("cache-corrupt");
    const auto [mesh, part] = generate_rectangle(20, 4, 1.0, 0.1, 4);
    const auto kappa = log_uniform_coefficient(mesh, 1.0, 1000.0, 3, 0.05);
    std::ostringstream warn;
    CacheStats s1, s2, s3;
    cached_offline(mesh, part, kappa, dir, 1, s1, warn);
    const fs::path victim = cache::file_name(dir, cache::mesh_key(mesh, part), kappa.hash(), 2);
    const std::string original = slurp(victim);
    fs::resize_file(victim, original.size() / 2);
    cached_offline(mesh, part, kappa, dir, 1, s2, warn);
    EXPECT_EQ(s2.rebuilt, 1);
    EXPECT_EQ(s2.hits, part.num_edges() - 1);
    EXPECT_NE(warn.str().find("invalid; rebuilding"), std::string::npos);
    EXPECT_NE(warn.str().find(victim.filename().string()), std::string::npos);
    EXPECT_EQ(slurp(victim), original);
    cached_offline(mesh, part, kappa, dir, 1, s3, warn);
    EXPECT_EQ(s3.hits, part.num_edges());
}

TEST(Cache, CoefficientChangeInvalidates)
{
    const fs::path dir = scratch("cache-kappa");
    const auto [mesh, part] = generate_rectangle(20, 4, 1.0, 0.1, 4);
    std::ostringstream warn;
    CacheStats s1, s2;
    cached_offline(mesh, part, log_uniform_coefficient(mesh, 1.0, 1000.0, 3, 0.05), dir, 1, s1, warn);
    std::vector<double> v = log_uniform_coefficient(mesh, 1.0, 1000.0, 3, 0.05).values();
    v[5] *= 1.0 + 1e-12;
    cached_offline(mesh, part, CoefficientField(v), dir, 1, s2, warn);
    EXPECT_EQ(s2.hits, 0);
    EXPECT_EQ(s2.misses, part.num_edges());
}

TEST(Cache, RewrittenMeshFileWithSameContentStaysValid)
{
    const fs::path dir = scratch("cache-mesh-file");
    const auto generated = generate_rough_channel(20, 4, 1.0, RoughWalls{}, 4, 4);
    const fs::path mesh_file = dir / "mesh.txt";
    save_mesh(mesh_file.string(), generated.mesh, generated.partition);

    ExperimentConfig cfg = small_config(dir / "out");
    cfg.geometry.kind = "file";
    cfg.geometry.file = mesh_file.string();
    cfg.run.M = {1, 2};
    cfg.run.vtk = false;
    std::ostringstream log;
    const auto first = run_experiment(cfg, log);
    EXPECT_EQ(first.cache.misses, generated.partition.num_edges());

    const auto before = fs::last_write_time(mesh_file);
    fs::remove(mesh_file);
    save_mesh(mesh_file.string(), generated.mesh, generated.partition);
    fs::last_write_time(mesh_file, before + std::chrono::seconds(5));
    const auto second = run_experiment(cfg, log);
    EXPECT_EQ(second.cache.hits, generated.partition.num_edges());
    EXPECT_EQ(second.offline_edges_built, 0);
}

TEST(Experiment, RunOfflineRunGivesIdenticalCsv)
{
    const fs::path dir = scratch("run-offline-run");
    const auto cfg = small_config(dir);
    std::ostringstream log;
    const auto first = run_experiment(cfg, log);
    EXPECT_EQ(first.offline_edges_built, 6);
    std::map<std::string, std::string> bytes;
    for (const char* f : csv_files) bytes[f] = slurp(dir / f);

    for (const auto& entry : fs::directory_iterator(dir / "cache")) fs::remove(entry.path());
    CacheStats stats;
    const auto [mesh, part] = build_geometry(cfg.geometry);
    run_offline(cfg, mesh, part, build_coefficient(cfg.coefficient, mesh), stats, log);
    EXPECT_EQ(stats.misses, 6);

    const auto second = run_experiment(cfg, log);
    EXPECT_EQ(second.offline_edges_built, 0);
    EXPECT_EQ(second.cache.hits, 6);
    for (const char* f : csv_files) EXPECT_EQ(slurp(dir / f), bytes[f]) << f;
}

TEST(Experiment, IndependentRunsAreByteIdentical)
{
    const fs::path a = scratch("determinism-a"), b = scratch("determinism-b");
    std::ostringstream log;
    auto ca = small_config(a), cb = small_config(b);
    cb.run.cache = false;
    cb.run.workers = 2;
    run_experiment(ca, log);
    run_experiment(cb, log);
    for (const char* f : csv_files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    for (const char* f : {"test1_fine.vtk", "test1_M8.vtk", "test2_fine.vtk", "test2_M8.vtk"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(fs::exists(b / "cache"));
}

TEST(Experiment, OutputTablesHaveExpectedShape)
{
    const fs::path dir = scratch("tables");
    const auto cfg = small_config(dir);
    std::ostringstream log;
    const auto result = run_experiment(cfg, log);
    EXPECT_EQ(result.fine_factorizations, 1);
    ASSERT_EQ(result.rows.size(), 8u);

    std::istringstream results(slurp(dir / "results.csv"));
    std::string line;
    std::getline(results, line);
    EXPECT_EQ(line, results_header);
    std::getline(results, line);
    // 6 coarse edges x M=1 plus 5 coarse cells; the 40x8 lattice has 1008 edges and 640 cells.
    EXPECT_EQ(line.rfind("rectangle,test1,1,11,1648,", 0), 0u) << line;

    std::istringstream eig(slurp(dir / "eigenvalues.csv"));
    int count = 0;
    for (std::getline(eig, line); std::getline(eig, line);) ++count;
    EXPECT_EQ(count, 6 * 8);

    std::istringstream pressure(slurp(dir / "coarse_pressure.csv"));
    count = 0;
    for (std::getline(pressure, line); std::getline(pressure, line);) ++count;
    EXPECT_EQ(count, 2 * 4 * 5);

    ASSERT_EQ(result.decay.size(), 2u);
    EXPECT_TRUE(result.decay[0].applicable);
    EXPECT_TRUE(result.decay[0].monotone);
    // Rows run over M, then tests: rows[6] is test1 at M = J = 8.
    EXPECT_EQ(result.rows[6].test, "test1");
    EXPECT_EQ(result.rows[6].M, 8);
    EXPECT_TRUE(std::isinf(result.rows[6].Lambda));
    EXPECT_LE(result.rows[6].e_u, 1e-8);
}

TEST(Experiment, OnlineWorkIndependentOfFineResolution)
{
    std::ostringstream log;
    std::vector<std::vector<OnlineCounters>> counters;
    for (int nx : {40, 80}) {
        auto cfg = small_config(scratch("online-" + std::to_string(nx)));
        cfg.geometry.nx = nx;
        cfg.run.verbose = true;
        cfg.run.vtk = false;
        counters.push_back(run_experiment(cfg, log).counters);
    }
    ASSERT_EQ(counters[0].size(), counters[1].size());
    for (std::size_t k = 0; k < counters[0].size(); ++k) {
        EXPECT_EQ(counters[0][k].coarse_unknowns, counters[1][k].coarse_unknowns);
        EXPECT_EQ(counters[0][k].coarse_nonzeros, counters[1][k].coarse_nonzeros);
        EXPECT_GT(counters[1][k].downscale_fine_nonzeros, counters[0][k].downscale_fine_nonzeros);
        EXPECT_EQ(counters[1][k].error_fine_cells, 2 * counters[0][k].error_fine_cells);
    }
    EXPECT_NE(log.str().find("online test1 M=1: coarse unknowns 11"), std::string::npos);
}

TEST(Experiment, BasisCountAboveSnapshotSpaceIsConfigError)
{
    auto cfg = small_config(scratch("too-many"));
    cfg.run.M = {1, 9};
    std::ostringstream log;
    EXPECT_THROW(run_experiment(cfg, log), ConfigError);
}

TEST(Cli, ExitCodes)
{
    const fs::path dir = scratch("cli");
    {
        std::ofstream f(dir / "ok.ini");
        f << "[geometry]\nnx = 20\nny = 4\nncoarse = 4\n[coefficient]\nkind = log_uniform\n"
             "[run]\nM = 1, 2, 4\noutput = "
          << (dir / "out").string() << "\n";
    }
    const std::string ok = (dir / "ok.ini").string();
    const fs::path log = dir / "log.txt";

    EXPECT_EQ(run_cli("run " + ok, log), 0) << slurp(log);
    EXPECT_NE(slurp(log).find(results_header), std::string::npos);
    EXPECT_EQ(run_cli("run " + ok + " --run.M 1,2", log), 0) << slurp(log);
    EXPECT_EQ(run_cli("offline " + ok, log), 0) << slurp(log);
    EXPECT_NE(slurp(log).find("5 reused"), std::string::npos) << slurp(log);
    EXPECT_EQ(run_cli("mesh-gen " + ok + " -o " + (dir / "m.txt").string(), log), 0) << slurp(log);
    EXPECT_TRUE(fs::exists(dir / "m.txt"));
    EXPECT_EQ(run_cli("export " + ok, log), 0) << slurp(log);
    EXPECT_TRUE(fs::exists(dir / "out" / "test1_fine.vtk"));

    const std::string flags_only = "run --geometry.nx 20 --geometry.ny=4 --geometry.ncoarse 4 --run.M 1 --run.vtk off "
                                   "--run.output " + (dir / "flags").string();
    EXPECT_EQ(run_cli(flags_only, log), 0) << slurp(log);
    EXPECT_NE(slurp(log).find("rectangle,test1,1,9,"), std::string::npos) << slurp(log);

    // A 300-decade coefficient range defeats the fine factorization.
    EXPECT_EQ(run_cli("run " + ok + " --coefficient.kmin 1e-150 --coefficient.kmax 1e150 "
                                    "--coefficient.correlation_length 0 --run.cache false", log), 3);
    EXPECT_NE(slurp(log).find("fine solve of test1"), std::string::npos) << slurp(log);

    EXPECT_EQ(run_cli("run " + ok + " --run.M=1,5", log), 2);
    EXPECT_NE(slurp(log).find("exceeds the smallest snapshot space"), std::string::npos);
    EXPECT_EQ(run_cli("run " + ok + " --geometry.colour red", log), 2);
    EXPECT_EQ(run_cli("run " + (dir / "missing.ini").string(), log), 2);
    EXPECT_EQ(run_cli("frobnicate", log), 2);
    EXPECT_EQ(run_cli("mesh-gen " + ok, log), 2);
    EXPECT_EQ(run_cli("run " + ok + " --geometry.amplitude", log), 2);
}
