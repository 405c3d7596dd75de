#pragma once

#include "mesh.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mgms {

namespace detail {

/// Line reader that strips `#` comments and skips blank lines.
class TokenLines
{
public:
    explicit TokenLines(std::istream& in) : in_(in) {}

    /// Next non-empty line split into tokens; false at end of input.
    bool next(std::vector<std::string>& tokens)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            tokens.clear();
            for (std::string t; ss >> t;) tokens.push_back(std::move(t));
            if (!tokens.empty()) return true;
        }
        return false;
    }

    std::vector<std::string> expect(const char* what)
    {
        std::vector<std::string> t;
        if (!next(t)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_no_ + 1);
        return t;
    }

    long line() const { return line_no_; }

private:
    std::istream& in_;
    long line_no_ = 0;
};

inline double parse_double(const std::string& s, long line)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("invalid number '" + s + "'", line);
    }
}

inline long parse_long(const std::string& s, long line)
{
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("invalid integer '" + s + "'", line);
    return v;
}

inline long section_count(TokenLines& lines, const char* name)
{
    auto t = lines.expect(name);
    if (t.size() != 2 || t[0] != name) throw ParseError(std::string("expected '") + name + " <count>'", lines.line());
    const long n = parse_long(t[1], lines.line());
    if (n < 0) throw ParseError("negative count", lines.line());
    return n;
}

} // namespace detail

/// Reads the `MSFEM-MESH 1` text format and validates mesh and partition.
inline MeshWithPartition read_mesh(std::istream& in)
{
    using detail::parse_double;
    using detail::parse_long;
    detail::TokenLines lines(in);

    auto header = lines.expect("header");
    if (header.size() != 2 || header[0] != "MSFEM-MESH" || header[1] != "1")
        throw ParseError("expected header 'MSFEM-MESH 1'", lines.line());

    const long nn = detail::section_count(lines, "NODES");
    std::vector<Point> nodes;
    nodes.reserve(nn);
    for (long i = 0; i < nn; ++i) {
        auto t = lines.expect("node");
        if (t.size() != 2) throw ParseError("node line needs 2 coordinates", lines.line());
        nodes.emplace_back(parse_double(t[0], lines.line()), parse_double(t[1], lines.line()));
    }

    const long nc = detail::section_count(lines, "CELLS");
    std::vector<std::array<int, 3>> cells;
    cells.reserve(nc);
    for (long i = 0; i < nc; ++i) {
        auto t = lines.expect("cell");
        if (t.size() != 3) throw ParseError("cell line needs 3 node indices", lines.line());
        std::array<int, 3> c{};
        for (int k = 0; k < 3; ++k) {
            const long v = parse_long(t[k], lines.line());
            if (v < 0 || v >= nn) throw ParseError("node index out of range", lines.line());
            c[k] = static_cast<int>(v);
        }
        cells.push_back(c);
    }

    const long nb = detail::section_count(lines, "BOUNDARY");
    std::vector<TaggedSegment> boundary;
    boundary.reserve(nb);
    for (long i = 0; i < nb; ++i) {
        auto t = lines.expect("boundary segment");
        if (t.size() != 3) throw ParseError("boundary line needs 'a b tag'", lines.line());
        const auto tag = parse_boundary_tag(t[2]);
        if (!tag) throw ParseError("unknown boundary tag '" + t[2] + "'", lines.line());
        boundary.push_back({static_cast<int>(parse_long(t[0], lines.line())),
                            static_cast<int>(parse_long(t[1], lines.line())), *tag});
    }

    FineMesh mesh = FineMesh::build(std::move(nodes), std::move(cells), boundary);

    const long ncc = detail::section_count(lines, "COARSE_CELLS");
    std::vector<std::vector<int>> coarse_cells(ncc);
    for (long k = 0; k < ncc; ++k) {
        auto t = lines.expect("coarse cell");
        for (const auto& s : t) coarse_cells[k].push_back(static_cast<int>(parse_long(s, lines.line())));
    }

    const long nce = detail::section_count(lines, "COARSE_EDGES");
    std::vector<std::vector<int>> coarse_edges(nce);
    for (long i = 0; i < nce; ++i) {
        auto t = lines.expect("coarse edge");
        if (t.size() % 2 != 0) throw ParseError("coarse edge line needs node pairs", lines.line());
        for (std::size_t s = 0; s < t.size(); s += 2) {
            const long a = parse_long(t[s], lines.line()), b = parse_long(t[s + 1], lines.line());
            const int e = (a >= 0 && b >= 0 && a < mesh.num_nodes() && b < mesh.num_nodes())
                              ? mesh.find_edge(static_cast<int>(a), static_cast<int>(b))
                              : -1;
            if (e < 0) throw ParseError("coarse edge segment is not a mesh edge", lines.line());
            coarse_edges[i].push_back(e);
        }
    }

    std::vector<std::string> extra;
    if (lines.next(extra)) throw ParseError("trailing content after COARSE_EDGES", lines.line());

    CoarsePartition partition = CoarsePartition::build(mesh, std::move(coarse_cells), std::move(coarse_edges));
    return {std::move(mesh), std::move(partition)};
}

/// Canonical writer: shortest round-trip doubles, boundary segments in edge
/// order, coarse cells sorted.
inline void write_mesh(std::ostream& out, const FineMesh& mesh, const CoarsePartition& partition)
{
    using detail::format_double;
    out << "MSFEM-MESH 1\n";
    out << "NODES " << mesh.num_nodes() << '\n';
    for (const auto& p : mesh.nodes()) out << format_double(p.x()) << ' ' << format_double(p.y()) << '\n';
    out << "CELLS " << mesh.num_cells() << '\n';
    for (const auto& c : mesh.cells()) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    int nb = 0;
    for (int e = 0; e < mesh.num_edges(); ++e) nb += mesh.on_boundary(e);
    out << "BOUNDARY " << nb << '\n';
    for (int e = 0; e < mesh.num_edges(); ++e)
        if (mesh.on_boundary(e))
            out << mesh.edge(e)[0] << ' ' << mesh.edge(e)[1] << ' ' << to_string(mesh.tag(e)) << '\n';
    out << "COARSE_CELLS " << partition.num_cells() << '\n';
    for (const auto& k : partition.cells()) {
        for (std::size_t i = 0; i < k.size(); ++i) out << (i ? " " : "") << k[i];
        out << '\n';
    }
    out << "COARSE_EDGES " << partition.num_edges() << '\n';
    for (const auto& ce : partition.edges()) {
        for (std::size_t i = 0; i < ce.fine_edges.size(); ++i) {
            const auto& ed = mesh.edge(ce.fine_edges[i]);
            out << (i ? " " : "") << ed[0] << ' ' << ed[1];
        }
        out << '\n';
    }
}

inline MeshWithPartition load_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open mesh file '" + path + "'");
    try {
        return read_mesh(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.message(), e.line());
    }
}

inline void save_mesh(const std::string& path, const FineMesh& mesh, const CoarsePartition& partition)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write mesh file '" + path + "'");
    write_mesh(out, mesh, partition);
}

} // namespace mgms
