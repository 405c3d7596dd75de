#pragma once

#include "mesh.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>

namespace mgms {

class ConfigError : public InputError
{
public:
    using InputError::InputError;
};

struct GeometryConfig
{
    /// rectangle | rough | file
    std::string kind = "rectangle";
    /// Label written to the CSV geometry column; defaults to `kind`.
    std::string name;
    int nx = 320;
    int ny = 32;
    double lx = 1.0;
    double ly = 0.1;
    int ncoarse = 10;
    std::uint64_t seed = 1;
    RoughWalls walls;
    std::string file;
};

struct CoefficientConfig
{
    /// constant | log_uniform | file
    std::string kind = "constant";
    double value = 1.0;
    double kmin = 1.0;
    double kmax = 1000.0;
    double correlation_length = 0.05;
    std::uint64_t seed = 7;
    std::string file;
};

struct TestCase
{
    std::string name;
    double p1 = 0;
    double p2 = 0;
    double f = 0;
};

struct RunConfig
{
    std::vector<int> M{1, 2, 4, 8, 12};
    std::string output = "out";
    int workers = 1;
    bool cache = true;
    bool vtk = true;
    bool verbose = false;
};

struct ExperimentConfig
{
    GeometryConfig geometry;
    CoefficientConfig coefficient;
    std::vector<TestCase> tests{{"test1", 1, 0, 0}};
    RunConfig run;
};

namespace detail {

/// Typed access to a flat "section.key" map; remembers what was read so
/// leftovers can be reported as unknown keys.
class ConfigReader
{
public:
    explicit ConfigReader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text(const std::string& key, const std::string& fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    template<typename T>
    T number(const std::string& key, T fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : parse<T>(key, it->second);
    }

    bool flag(const std::string& key, bool fallback)
    {
        const std::string v = text(key, fallback ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::string> out;
        std::string item;
        auto flush = [&] {
            const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
            if (b == std::string::npos) throw ConfigError("config key '" + key + "': empty list item");
            out.push_back(item.substr(b, e - b + 1));
            item.clear();
        };
        for (char ch : it->second) {
            if (ch == ',') flush();
            else item += ch;
        }
        flush();
        return out;
    }

    template<typename T>
    static T parse(const std::string& key, const std::string& s)
    {
        T v{};
        const char* end = s.data() + s.size();
        auto [p, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc() || p != end)
            throw ConfigError("config key '" + key + "': cannot parse '" + s + "' as a number");
        return v;
    }

    void reject_unknown() const
    {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

inline std::string trimmed(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace detail

/// Flattens an INI stream to "section.key" -> value.
inline std::map<std::string, std::string> read_config_values(std::istream& in, const std::string& source = "config")
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    std::map<std::string, std::string> out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
        for (const auto& [key, value] : body) out[section + "." + key] = detail::trimmed(value.data());
    }
    return out;
}

inline ExperimentConfig parse_config(const std::map<std::string, std::string>& values)
{
    detail::ConfigReader r(values);
    ExperimentConfig c;

    auto& g = c.geometry;
    g.kind = r.text("geometry.kind", g.kind);
    if (g.kind != "rectangle" && g.kind != "rough" && g.kind != "file")
        throw ConfigError("geometry.kind must be rectangle, rough or file");
    g.name = r.text("geometry.name", g.kind);
    g.nx = r.number("geometry.nx", g.nx);
    g.ny = r.number("geometry.ny", g.ny);
    g.lx = r.number("geometry.lx", g.lx);
    g.ly = r.number("geometry.ly", g.ly);
    g.ncoarse = r.number("geometry.ncoarse", g.ncoarse);
    g.seed = r.number("geometry.seed", g.seed);
    g.walls.base_width = r.number("geometry.base_width", g.walls.base_width);
    g.walls.amplitude = r.number("geometry.amplitude", g.walls.amplitude);
    g.walls.modes = r.number("geometry.modes", g.walls.modes);
    g.walls.width_min = r.number("geometry.width_min", g.walls.width_min);
    g.walls.width_max = r.number("geometry.width_max", g.walls.width_max);
    g.file = r.text("geometry.file", "");
    if ((g.kind == "file") != !g.file.empty())
        throw ConfigError("geometry.file must be given exactly when geometry.kind = file");

    auto& k = c.coefficient;
    k.kind = r.text("coefficient.kind", k.kind);
    if (k.kind != "constant" && k.kind != "log_uniform" && k.kind != "file")
        throw ConfigError("coefficient.kind must be constant, log_uniform or file");
    k.value = r.number("coefficient.value", k.value);
    k.kmin = r.number("coefficient.kmin", k.kmin);
    k.kmax = r.number("coefficient.kmax", k.kmax);
    k.correlation_length = r.number("coefficient.correlation_length", k.correlation_length);
    k.seed = r.number("coefficient.seed", k.seed);
    k.file = r.text("coefficient.file", "");
    if ((k.kind == "file") != !k.file.empty())
        throw ConfigError("coefficient.file must be given exactly when coefficient.kind = file");

    c.tests.clear();
    const double p1 = r.number("problem.p1", 0.0), p2 = r.number("problem.p2", 0.0), f = r.number("problem.f", 0.0);
    const bool custom_keys = r.has("problem.p1") || r.has("problem.p2") || r.has("problem.f");
    bool custom_used = false;
    for (const auto& name : r.list("problem.tests", {"test1"})) {
        if (name == "test1") c.tests.push_back({name, 1, 0, 0});
        else if (name == "test2") c.tests.push_back({name, 0, 0, 1});
        else if (name == "custom") {
            c.tests.push_back({name, p1, p2, f});
            custom_used = true;
        } else
            throw ConfigError("problem.tests: unknown test '" + name + "' (expected test1, test2 or custom)");
    }
    if (custom_keys && !custom_used) throw ConfigError("problem.p1/p2/f only apply to the custom test");
    for (std::size_t a = 0; a < c.tests.size(); ++a)
        for (std::size_t b = a + 1; b < c.tests.size(); ++b)
            if (c.tests[a].name == c.tests[b].name) throw ConfigError("problem.tests lists '" + c.tests[a].name + "' twice");

    auto& run = c.run;
    run.M.clear();
    for (const auto& m : r.list("run.M", {"1", "2", "4", "8", "12"})) {
        const int v = detail::ConfigReader::parse<int>("run.M", m);
        if (v < 1) throw ConfigError("run.M entries must be positive");
        run.M.push_back(v);
    }
    if (!std::is_sorted(run.M.begin(), run.M.end()) || std::adjacent_find(run.M.begin(), run.M.end()) != run.M.end())
        throw ConfigError("run.M must be strictly increasing");
    run.output = r.text("run.output", run.output);
    run.workers = r.number("run.workers", run.workers);
    if (run.workers < 1) throw ConfigError("run.workers must be at least 1");
    run.cache = r.flag("run.cache", run.cache);
    run.vtk = r.flag("run.vtk", run.vtk);
    run.verbose = r.flag("run.verbose", run.verbose);

    r.reject_unknown();
    return c;
}

/// Reads `path` (empty for defaults only) and applies "section.key" overrides.
inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides = {})
{
    std::map<std::string, std::string> values;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        values = read_config_values(in, path);
    }
    for (const auto& [k, v] : overrides) {
        if (k.find('.') == std::string::npos) throw ConfigError("override '" + k + "' must be section.key");
        values[k] = detail::trimmed(v);
    }
    return parse_config(values);
}

} // namespace mgms
