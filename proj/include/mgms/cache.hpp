#pragma once

#include "spectral.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace mgms {

/// Offline cache, one file per coarse edge:
///   offline-<mesh hash>-<kappa hash>-e<i>.bin
/// Host byte order, no padding:
///   char[8]  "MGMSOFF1"
///   u64      mesh hash (fine mesh and partition), kappa hash
///   i64      coarse edge, J, #cells, #edges, #trace
///   i64[]    cells, edges, trace
///   f64[]    snapshots (J x #edges, row-major), eigenvalues (J),
///            eigenvectors, edge form, mass form (J x J each, column-major)
/// Identical inputs produce identical bytes.
namespace cache {

inline constexpr char magic[8] = {'M', 'G', 'M', 'S', 'O', 'F', 'F', '1'};

inline std::uint64_t mesh_key(const FineMesh& mesh, const CoarsePartition& partition)
{
    Hasher h;
    h.add(mesh.hash());
    h.add(partition.hash());
    return h.value();
}

inline std::filesystem::path file_name(const std::filesystem::path& dir, std::uint64_t mesh_hash,
                                       std::uint64_t kappa_hash, int edge)
{
    return dir / ("offline-" + hex64(mesh_hash) + "-" + hex64(kappa_hash) + "-e" + std::to_string(edge) + ".bin");
}

namespace detail {

template<typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template<typename T>
bool get(std::istream& in, T& v)
{
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

inline void put_ints(std::ostream& out, const std::vector<int>& v)
{
    for (int x : v) put<std::int64_t>(out, x);
}

inline bool get_ints(std::istream& in, std::vector<int>& v, std::int64_t n)
{
    v.resize(static_cast<std::size_t>(n));
    for (auto& x : v) {
        std::int64_t y;
        if (!get(in, y)) return false;
        x = static_cast<int>(y);
    }
    return true;
}

inline void put_doubles(std::ostream& out, const double* p, Eigen::Index n)
{
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline bool get_doubles(std::istream& in, double* p, Eigen::Index n)
{
    return static_cast<bool>(in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))));
}

} // namespace detail

inline void write_edge(std::ostream& out, std::uint64_t mesh_hash, std::uint64_t kappa_hash, const OfflineEdge& e)
{
    using namespace detail;
    const auto& s = e.snapshots;
    out.write(magic, sizeof magic);
    put(out, mesh_hash);
    put(out, kappa_hash);
    for (std::int64_t v : {std::int64_t(s.coarse_edge), std::int64_t(s.size()), std::int64_t(s.cells.size()),
                           std::int64_t(s.edges.size()), std::int64_t(s.trace.size())})
        put(out, v);
    put_ints(out, s.cells);
    put_ints(out, s.edges);
    put_ints(out, s.trace);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = s.values;
    put_doubles(out, rows.data(), rows.size());
    put_doubles(out, e.spectrum.eigenvalues.data(), e.spectrum.eigenvalues.size());
    put_doubles(out, e.spectrum.eigenvectors.data(), e.spectrum.eigenvectors.size());
    put_doubles(out, e.spectrum.edge_form.data(), e.spectrum.edge_form.size());
    put_doubles(out, e.spectrum.mass_form.data(), e.spectrum.mass_form.size());
}

/// Empty when the stream is truncated, malformed, or keyed to other inputs.
inline std::optional<OfflineEdge> read_edge(std::istream& in, std::uint64_t mesh_hash, std::uint64_t kappa_hash,
                                            int edge)
{
    using namespace detail;
    char head[sizeof magic];
    if (!in.read(head, sizeof head) || !std::equal(head, head + sizeof head, magic)) return std::nullopt;
    std::uint64_t mh = 0, kh = 0;
    if (!get(in, mh) || !get(in, kh) || mh != mesh_hash || kh != kappa_hash) return std::nullopt;
    std::int64_t index = 0, J = 0, nc = 0, ne = 0, nt = 0;
    if (!get(in, index) || !get(in, J) || !get(in, nc) || !get(in, ne) || !get(in, nt)) return std::nullopt;
    if (index != edge || J < 1 || nc < 1 || ne < 1 || nt != J || J > ne || ne > (std::int64_t(1) << 31))
        return std::nullopt;
    OfflineEdge e;
    auto& s = e.snapshots;
    s.coarse_edge = edge;
    if (!get_ints(in, s.cells, nc) || !get_ints(in, s.edges, ne) || !get_ints(in, s.trace, nt)) return std::nullopt;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(J, ne);
    e.spectrum.eigenvalues.resize(J);
    e.spectrum.eigenvectors.resize(J, J);
    e.spectrum.edge_form.resize(J, J);
    e.spectrum.mass_form.resize(J, J);
    if (!get_doubles(in, rows.data(), rows.size()) ||
        !get_doubles(in, e.spectrum.eigenvalues.data(), J) ||
        !get_doubles(in, e.spectrum.eigenvectors.data(), J * J) ||
        !get_doubles(in, e.spectrum.edge_form.data(), J * J) ||
        !get_doubles(in, e.spectrum.mass_form.data(), J * J))
        return std::nullopt;
    if (in.peek() != std::char_traits<char>::eof()) return std::nullopt;
    s.values = rows;
    return e;
}

} // namespace cache

struct CacheStats
{
    int hits = 0;
    int misses = 0;
    /// Files present under the expected name but unreadable or keyed to
    /// other inputs; rebuilt with a warning.
    int rebuilt = 0;
};

/// Offline stage backed by the cache in `dir`. Missing or invalid entries
/// are computed and written back.
inline std::vector<OfflineEdge> cached_offline(const FineMesh& mesh, const CoarsePartition& partition,
                                               const CoefficientField& kappa, const std::filesystem::path& dir,
                                               int workers, CacheStats& stats, std::ostream& warn = std::cerr)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::uint64_t mh = cache::mesh_key(mesh, partition), kh = kappa.hash();
    const int n = partition.num_edges();
    std::vector<OfflineEdge> out(n);
    std::vector<int> todo;
    for (int i = 0; i < n; ++i) {
        const fs::path path = cache::file_name(dir, mh, kh, i);
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            ++stats.misses;
            todo.push_back(i);
            continue;
        }
        if (auto e = cache::read_edge(in, mh, kh, i)) {
            out[i] = std::move(*e);
            ++stats.hits;
        } else {
            warn << "warning: offline cache entry " << path.string() << " is invalid; rebuilding\n";
            ++stats.rebuilt;
            todo.push_back(i);
        }
    }
    parallel_for(static_cast<int>(todo.size()), workers,
                 [&](int t) { out[todo[t]] = build_offline_edge(mesh, partition, kappa, todo[t]); });
    for (int i : todo) {
        const fs::path path = cache::file_name(dir, mh, kh, i);
        const fs::path tmp = path.string() + ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw InputError("cannot write offline cache file '" + tmp.string() + "'");
            cache::write_edge(f, mh, kh, out[i]);
            if (!f) throw InputError("failed writing offline cache file '" + tmp.string() + "'");
        }
        fs::rename(tmp, path);
    }
    return out;
}

} // namespace mgms
