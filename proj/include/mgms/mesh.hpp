#pragma once

#include "common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string_view>
#include <tuple>

namespace mgms {

enum class BoundaryTag : std::uint8_t { interior = 0, inlet, outlet, wall };

inline std::string_view to_string(BoundaryTag t)
{
    switch (t) {
    case BoundaryTag::inlet: return "inlet";
    case BoundaryTag::outlet: return "outlet";
    case BoundaryTag::wall: return "wall";
    default: return "interior";
    }
}

inline std::optional<BoundaryTag> parse_boundary_tag(std::string_view s)
{
    if (s == "inlet") return BoundaryTag::inlet;
    if (s == "outlet") return BoundaryTag::outlet;
    if (s == "wall") return BoundaryTag::wall;
    return std::nullopt;
}

struct TaggedSegment
{
    int a;
    int b;
    BoundaryTag tag;
};

/// Triangulation with globally numbered, canonically oriented edges.
///
/// Edges are stored with nodes[0] < nodes[1] and sorted lexicographically,
/// so numbering depends only on the cell list. The canonical unit normal of
/// an edge is the tangent (node1 - node0) rotated 90 degrees
/// counter-clockwise. Local edge k of a cell is the edge opposite local
/// vertex k.
class FineMesh
{
public:
    FineMesh() = default;

    /// Builds and validates. `boundary` must tag every edge with a single
    /// incident cell, and nothing else.
    static FineMesh build(std::vector<Point> nodes, std::vector<std::array<int, 3>> cells,
                          std::span<const TaggedSegment> boundary)
    {
        FineMesh m;
        m.nodes_ = std::move(nodes);
        m.cells_ = std::move(cells);
        m.check_geometry();
        m.build_edges();
        m.apply_tags(boundary);
        m.check_topology();
        return m;
    }

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_cells() const { return static_cast<int>(cells_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const Point& node(int i) const { return nodes_[i]; }
    const std::vector<Point>& nodes() const { return nodes_; }
    const std::array<int, 3>& cell(int c) const { return cells_[c]; }
    const std::vector<std::array<int, 3>>& cells() const { return cells_; }
    const std::array<int, 2>& edge(int e) const { return edges_[e]; }
    const std::array<int, 3>& cell_edges(int c) const { return cell_edges_[c]; }
    /// Incident cells; second entry is -1 on the boundary.
    const std::array<int, 2>& edge_cells(int e) const { return edge_cells_[e]; }
    BoundaryTag tag(int e) const { return tags_[e]; }
    bool on_boundary(int e) const { return edge_cells_[e][1] < 0; }

    double area(int c) const { return areas_[c]; }
    double length(int e) const { return (nodes_[edges_[e][1]] - nodes_[edges_[e][0]]).norm(); }

    Point normal(int e) const
    {
        const Point t = nodes_[edges_[e][1]] - nodes_[edges_[e][0]];
        return Point(-t.y(), t.x()) / t.norm();
    }

    Point midpoint(int e) const { return 0.5 * (nodes_[edges_[e][0]] + nodes_[edges_[e][1]]); }

    Point centroid(int c) const
    {
        const auto& v = cells_[c];
        return (nodes_[v[0]] + nodes_[v[1]] + nodes_[v[2]]) / 3.0;
    }

    /// +1 when the canonical normal of local edge k points out of cell c.
    int orientation(int c, int k) const { return signs_[c][k]; }

    /// Orientation of edge e relative to incident cell c.
    int orientation_in(int c, int e) const
    {
        const auto& ce = cell_edges_[c];
        for (int k = 0; k < 3; ++k)
            if (ce[k] == e) return signs_[c][k];
        throw std::invalid_argument("edge " + std::to_string(e) + " is not on cell " + std::to_string(c));
    }

    /// Edge index for an unordered node pair, or -1.
    int find_edge(int a, int b) const
    {
        const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
        auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
        if (it == edges_.end() || *it != key) return -1;
        return static_cast<int>(it - edges_.begin());
    }

    double diameter() const
    {
        Point lo = nodes_.front(), hi = nodes_.front();
        for (const auto& p : nodes_) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        return (hi - lo).norm();
    }

    double total_area() const { return std::accumulate(areas_.begin(), areas_.end(), 0.0); }

    /// Number of closed boundary loops.
    int boundary_loops() const
    {
        std::vector<int> parent(nodes_.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::vector<char> used(nodes_.size(), 0);
        for (int e = 0; e < num_edges(); ++e) {
            if (!on_boundary(e)) continue;
            const auto [a, b] = edges_[e];
            used[a] = used[b] = 1;
            parent[find(a)] = find(b);
        }
        int loops = 0;
        for (int i = 0; i < num_nodes(); ++i)
            if (used[i] && find(i) == i) ++loops;
        return loops;
    }

    std::uint64_t hash() const
    {
        Hasher h;
        h.add(num_nodes());
        for (const auto& p : nodes_) h.add(p.x()).add(p.y());
        h.add(num_cells());
        for (const auto& c : cells_) h.add(c[0]).add(c[1]).add(c[2]);
        for (auto t : tags_) h.add(static_cast<int>(t));
        return h.value();
    }

private:
    void check_geometry()
    {
        if (nodes_.empty() || cells_.empty()) throw MeshError("mesh has no nodes or no cells");
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!std::isfinite(nodes_[i].x()) || !std::isfinite(nodes_[i].y()))
                throw MeshError("non-finite node coordinate", static_cast<long>(i));
        const double tol = 1e-12 * diameter();

        std::vector<int> order(nodes_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return std::tie(nodes_[a].x(), nodes_[a].y()) < std::tie(nodes_[b].x(), nodes_[b].y());
        });
        for (std::size_t i = 0; i < order.size(); ++i) {
            for (std::size_t j = i + 1; j < order.size(); ++j) {
                if (nodes_[order[j]].x() - nodes_[order[i]].x() > tol) break;
                if ((nodes_[order[j]] - nodes_[order[i]]).norm() <= tol)
                    throw MeshError("duplicate node", std::max(order[i], order[j]));
            }
        }

        areas_.resize(cells_.size());
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const auto& v = cells_[c];
            for (int k = 0; k < 3; ++k)
                if (v[k] < 0 || v[k] >= num_nodes())
                    throw MeshError("cell references a missing node", static_cast<long>(c));
            if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
                throw MeshError("cell repeats a node", static_cast<long>(c));
            const Point d1 = nodes_[v[1]] - nodes_[v[0]];
            const Point d2 = nodes_[v[2]] - nodes_[v[0]];
            const double a = 0.5 * (d1.x() * d2.y() - d1.y() * d2.x());
            if (!(a > tol * tol))
                throw MeshError("cell is degenerate or not counter-clockwise", static_cast<long>(c));
            areas_[c] = a;
        }
    }

    void build_edges()
    {
        struct Side
        {
            int a, b, cell, local;
        };
        std::vector<Side> sides;
        sides.reserve(3 * cells_.size());
        for (int c = 0; c < num_cells(); ++c) {
            const auto& v = cells_[c];
            for (int k = 0; k < 3; ++k) {
                const int p = v[(k + 1) % 3], q = v[(k + 2) % 3];
                sides.push_back({std::min(p, q), std::max(p, q), c, k});
            }
        }
        std::sort(sides.begin(), sides.end(), [](const Side& l, const Side& r) {
            return std::tie(l.a, l.b, l.cell) < std::tie(r.a, r.b, r.cell);
        });

        cell_edges_.assign(cells_.size(), {-1, -1, -1});
        signs_.assign(cells_.size(), {0, 0, 0});
        for (std::size_t i = 0; i < sides.size();) {
            std::size_t j = i;
            while (j < sides.size() && sides[j].a == sides[i].a && sides[j].b == sides[i].b) ++j;
            if (j - i > 2) throw MeshError("edge shared by more than two cells", sides[i].cell);
            const int e = static_cast<int>(edges_.size());
            edges_.push_back({sides[i].a, sides[i].b});
            edge_cells_.push_back({sides[i].cell, j - i == 2 ? sides[i + 1].cell : -1});
            for (std::size_t s = i; s < j; ++s) cell_edges_[sides[s].cell][sides[s].local] = e;
            i = j;
        }

        for (int c = 0; c < num_cells(); ++c) {
            const auto& v = cells_[c];
            for (int k = 0; k < 3; ++k) {
                const int e = cell_edges_[c][k];
                const Point t = nodes_[v[(k + 2) % 3]] - nodes_[v[(k + 1) % 3]];
                const Point outward(t.y(), -t.x());
                signs_[c][k] = outward.dot(normal(e)) > 0 ? 1 : -1;
            }
        }
        for (int e = 0; e < num_edges(); ++e) {
            const auto [c0, c1] = edge_cells_[e];
            if (c1 >= 0 && orientation_in(c0, e) == orientation_in(c1, e))
                throw MeshError("adjacent cells have inconsistent orientation", e);
        }
    }

    void apply_tags(std::span<const TaggedSegment> boundary)
    {
        tags_.assign(edges_.size(), BoundaryTag::interior);
        std::vector<char> seen(edges_.size(), 0);
        for (std::size_t i = 0; i < boundary.size(); ++i) {
            const auto& s = boundary[i];
            const int e = (s.a >= 0 && s.b >= 0 && s.a < num_nodes() && s.b < num_nodes()) ? find_edge(s.a, s.b) : -1;
            if (e < 0) throw MeshError("boundary segment is not a mesh edge", static_cast<long>(i));
            if (!on_boundary(e)) throw MeshError("boundary tag on an interior edge", e);
            if (seen[e]) throw MeshError("boundary edge tagged twice", e);
            if (s.tag == BoundaryTag::interior) throw MeshError("invalid boundary tag", e);
            seen[e] = 1;
            tags_[e] = s.tag;
        }
        for (int e = 0; e < num_edges(); ++e)
            if (on_boundary(e) && !seen[e]) throw MeshError("boundary edge without tag", e);
    }

    void check_topology() const
    {
        const int loops = boundary_loops();
        if (loops < 1) throw MeshError("mesh has no boundary");
        const int euler = num_cells() - num_edges() + num_nodes();
        // Connected planar triangulation with (loops - 1) holes: F - E + V = 2 - loops.
        if (euler != 2 - loops)
            throw MeshError("Euler relation violated: cells - edges + nodes = " + std::to_string(euler) +
                            ", expected " + std::to_string(2 - loops));
    }

    std::vector<Point> nodes_;
    std::vector<std::array<int, 3>> cells_;
    std::vector<double> areas_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 2>> edge_cells_;
    std::vector<std::array<int, 3>> cell_edges_;
    std::vector<std::array<int, 3>> signs_;
    std::vector<BoundaryTag> tags_;
};

/// One flux-carrying coarse edge E_i and its neighbourhood omega_i.
struct CoarseEdge
{
    std::vector<int> fine_edges;
    /// cells[0] is the upstream cell (unit flux leaves it through E_i);
    /// cells[1] is -1 for inlet/outlet coarse edges.
    std::array<int, 2> cells{-1, -1};

    bool on_boundary() const { return cells[1] < 0; }
};

/// Coarse cells K_i (sets of fine cells) and coarse edges E_i.
class CoarsePartition
{
public:
    CoarsePartition() = default;

    static CoarsePartition build(const FineMesh& mesh, std::vector<std::vector<int>> coarse_cells,
                                 std::vector<std::vector<int>> coarse_edges)
    {
        CoarsePartition p;
        p.cells_ = std::move(coarse_cells);
        p.coarse_of_.assign(mesh.num_cells(), -1);
        p.areas_.assign(p.cells_.size(), 0.0);
        if (p.cells_.empty()) throw MeshError("partition has no coarse cells");
        for (int k = 0; k < p.num_cells(); ++k) {
            if (p.cells_[k].empty()) throw MeshError("empty coarse cell", k);
            std::sort(p.cells_[k].begin(), p.cells_[k].end());
            for (int c : p.cells_[k]) {
                if (c < 0 || c >= mesh.num_cells()) throw MeshError("coarse cell references a missing fine cell", k);
                if (p.coarse_of_[c] >= 0) throw MeshError("fine cell in two coarse cells", c);
                p.coarse_of_[c] = k;
                p.areas_[k] += mesh.area(c);
            }
        }
        for (int c = 0; c < mesh.num_cells(); ++c)
            if (p.coarse_of_[c] < 0) throw MeshError("fine cell not covered by the partition", c);

        std::vector<int> owner(mesh.num_edges(), -1);
        for (int i = 0; i < static_cast<int>(coarse_edges.size()); ++i) {
            auto& fine = coarse_edges[i];
            if (fine.empty()) throw MeshError("empty coarse edge", i);
            CoarseEdge ce;
            std::optional<std::array<int, 2>> pair;
            for (int e : fine) {
                if (e < 0 || e >= mesh.num_edges()) throw MeshError("coarse edge references a missing fine edge", i);
                if (owner[e] >= 0) throw MeshError("fine edge in two coarse edges", e);
                owner[e] = i;
                std::array<int, 2> here{};
                if (mesh.on_boundary(e)) {
                    if (mesh.tag(e) == BoundaryTag::wall) throw MeshError("wall edge in a coarse edge", e);
                    here = {p.coarse_of_[mesh.edge_cells(e)[0]], -1};
                } else {
                    const int k0 = p.coarse_of_[mesh.edge_cells(e)[0]];
                    const int k1 = p.coarse_of_[mesh.edge_cells(e)[1]];
                    if (k0 == k1) throw MeshError("coarse edge contains a fine edge interior to a coarse cell", e);
                    here = {std::min(k0, k1), std::max(k0, k1)};
                }
                if (pair && *pair != here)
                    throw MeshError("coarse edge " + std::to_string(i) + " mixes different coarse-cell pairs", e);
                pair = here;
            }
            ce.cells = *pair;
            ce.fine_edges = std::move(fine);
            p.edges_.push_back(std::move(ce));
        }

        for (int e = 0; e < mesh.num_edges(); ++e) {
            if (owner[e] >= 0) continue;
            if (mesh.on_boundary(e)) {
                if (mesh.tag(e) != BoundaryTag::wall)
                    throw MeshError("inlet/outlet edge not assigned to a coarse edge", e);
            } else if (p.coarse_of_[mesh.edge_cells(e)[0]] != p.coarse_of_[mesh.edge_cells(e)[1]]) {
                throw MeshError("coarse interface edge not assigned to a coarse edge", e);
            }
        }
        p.owner_ = std::move(owner);
        return p;
    }

    int num_cells() const { return static_cast<int>(cells_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<int>& cell(int k) const { return cells_[k]; }
    const std::vector<std::vector<int>>& cells() const { return cells_; }
    const CoarseEdge& edge(int i) const { return edges_[i]; }
    const std::vector<CoarseEdge>& edges() const { return edges_; }
    int coarse_of(int fine_cell) const { return coarse_of_[fine_cell]; }
    double area(int k) const { return areas_[k]; }
    /// Coarse edge owning a fine edge, or -1.
    int owner(int fine_edge) const { return owner_[fine_edge]; }

    /// Coarse cells forming omega_i.
    std::vector<int> local_domain(int i) const
    {
        const auto& c = edges_[i].cells;
        return c[1] < 0 ? std::vector<int>{c[0]} : std::vector<int>{c[0], c[1]};
    }

    double local_area(int i) const
    {
        double a = 0;
        for (int k : local_domain(i)) a += areas_[k];
        return a;
    }

    std::uint64_t hash() const
    {
        Hasher h;
        h.add(num_cells());
        for (const auto& k : cells_) {
            h.add(static_cast<int>(k.size()));
            for (int c : k) h.add(c);
        }
        h.add(num_edges());
        for (const auto& e : edges_) {
            h.add(static_cast<int>(e.fine_edges.size()));
            for (int f : e.fine_edges) h.add(f);
        }
        return h.value();
    }

private:
    std::vector<std::vector<int>> cells_;
    std::vector<int> coarse_of_;
    std::vector<double> areas_;
    std::vector<CoarseEdge> edges_;
    std::vector<int> owner_;
};

struct MeshWithPartition
{
    FineMesh mesh;
    CoarsePartition partition;
};

namespace detail {

// Column-structured channel: nx+1 node columns at uniform x, node (i, j) at
// y = bottom[i] + j / ny * (top[i] - bottom[i]). Every quad is split along
// its (i, j)-(i+1, j+1) diagonal.
inline MeshWithPartition column_channel(int nx, int ny, double lx, std::span<const double> bottom,
                                        std::span<const double> top, int ncoarse)
{
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<Point> nodes;
    nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const double x = lx * i / nx;
            const double y = bottom[i] + (top[i] - bottom[i]) * j / ny;
            nodes.emplace_back(x, y);
        }

    std::vector<std::array<int, 3>> cells;
    cells.reserve(2 * static_cast<std::size_t>(nx) * ny);
    const int strip = nx / ncoarse;
    std::vector<std::vector<int>> coarse_cells(ncoarse);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int c = static_cast<int>(cells.size());
            cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            coarse_cells[i / strip].push_back(c);
            coarse_cells[i / strip].push_back(c + 1);
        }

    std::vector<TaggedSegment> boundary;
    for (int j = 0; j < ny; ++j) {
        boundary.push_back({id(0, j), id(0, j + 1), BoundaryTag::inlet});
        boundary.push_back({id(nx, j), id(nx, j + 1), BoundaryTag::outlet});
    }
    for (int i = 0; i < nx; ++i) {
        boundary.push_back({id(i, 0), id(i + 1, 0), BoundaryTag::wall});
        boundary.push_back({id(i, ny), id(i + 1, ny), BoundaryTag::wall});
    }

    FineMesh mesh = FineMesh::build(std::move(nodes), std::move(cells), boundary);

    std::vector<std::vector<int>> coarse_edges;
    for (int k = 0; k <= ncoarse; ++k) {
        const int i = k * strip;
        std::vector<int> fine;
        for (int j = 0; j < ny; ++j) fine.push_back(mesh.find_edge(id(i, j), id(i, j + 1)));
        coarse_edges.push_back(std::move(fine));
    }
    CoarsePartition partition = CoarsePartition::build(mesh, std::move(coarse_cells), std::move(coarse_edges));
    return {std::move(mesh), std::move(partition)};
}

inline void check_channel_args(int nx, int ny, double lx, int ncoarse)
{
    if (nx < 1 || ny < 1) throw InputError("nx and ny must be at least 1");
    if (!(lx > 0)) throw InputError("channel length must be positive");
    if (ncoarse < 1) throw InputError("ncoarse must be at least 1");
    if (nx % ncoarse != 0)
        throw InputError("nx = " + std::to_string(nx) + " is not divisible by ncoarse = " + std::to_string(ncoarse));
}

} // namespace detail

/// Structured triangulation of [0,lx] x [0,ly] with `ncoarse` vertical coarse
/// strips. Coarse edges are ordered left to right: inlet, the ncoarse-1
/// interfaces, outlet.
inline MeshWithPartition generate_rectangle(int nx, int ny, double lx, double ly, int ncoarse)
{
    detail::check_channel_args(nx, ny, lx, ncoarse);
    if (!(ly > 0)) throw InputError("channel width must be positive");
    const std::vector<double> bottom(nx + 1, 0.0), top(nx + 1, ly);
    return detail::column_channel(nx, ny, lx, bottom, top, ncoarse);
}

/// Wall roughness of a channel: each wall is offset by `amplitude` times a
/// seeded random Fourier series of `modes` harmonics normalised to [-1, 1].
struct RoughWalls
{
    double base_width = 0.154;
    double amplitude = 0.045;
    int modes = 6;
    double width_min = 0.057;
    double width_max = 0.251;
};

namespace detail {

inline std::vector<double> random_profile(int nx, double lx, int modes, SplitMix64& rng)
{
    std::vector<double> amp(modes), phase(modes);
    double total = 0;
    for (int m = 0; m < modes; ++m) {
        amp[m] = (0.25 + 0.75 * rng.uniform()) / (m + 1);
        phase[m] = 2 * M_PI * rng.uniform();
        total += amp[m];
    }
    std::vector<double> g(nx + 1, 0.0);
    for (int i = 0; i <= nx; ++i) {
        const double x = lx * i / nx;
        for (int m = 0; m < modes; ++m) g[i] += amp[m] * std::sin(2 * M_PI * (m + 1) * x / lx + phase[m]);
        if (total > 0) g[i] /= total;
    }
    return g;
}

} // namespace detail

/// Channel with rough top and bottom walls. Bottom wall y = -a g_b(x), top
/// wall y = base_width + a g_t(x); width must stay within
/// [width_min, width_max] at every node column.
inline MeshWithPartition generate_rough_channel(int nx, int ny, double lx, const RoughWalls& walls,
                                                std::uint64_t seed, int ncoarse)
{
    detail::check_channel_args(nx, ny, lx, ncoarse);
    if (!(walls.width_min > 0) || !(walls.width_max >= walls.width_min))
        throw InputError("rough channel width band must satisfy 0 < width_min <= width_max");
    if (walls.amplitude < 0 || walls.modes < 0) throw InputError("rough channel amplitude and modes must be nonnegative");

    SplitMix64 rng(seed);
    const auto gb = detail::random_profile(nx, lx, walls.modes, rng);
    const auto gt = detail::random_profile(nx, lx, walls.modes, rng);
    std::vector<double> bottom(nx + 1), top(nx + 1);
    for (int i = 0; i <= nx; ++i) {
        bottom[i] = -walls.amplitude * gb[i];
        top[i] = walls.base_width + walls.amplitude * gt[i];
        const double w = top[i] - bottom[i];
        if (!(w > 0)) throw MeshError("rough channel collapses to zero width at node column", i);
        if (w < walls.width_min || w > walls.width_max)
            throw MeshError("rough channel width " + std::to_string(w) + " leaves the band [" +
                                std::to_string(walls.width_min) + ", " + std::to_string(walls.width_max) +
                                "] at node column",
                            i);
    }
    return detail::column_channel(nx, ny, lx, bottom, top, ncoarse);
}

} // namespace mgms
