#pragma once

#include "mesh_io.hpp"

namespace mgms {

/// Cell-wise constant permeability kappa > 0.
class CoefficientField
{
public:
    CoefficientField() = default;

    explicit CoefficientField(std::vector<double> values) : values_(std::move(values))
    {
        for (std::size_t c = 0; c < values_.size(); ++c)
            if (!(values_[c] > 0) || !std::isfinite(values_[c]))
                throw InputError("coefficient must be positive and finite (cell " + std::to_string(c) + ")");
    }

    int size() const { return static_cast<int>(values_.size()); }
    double operator[](int c) const { return values_[c]; }
    const std::vector<double>& values() const { return values_; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

    std::uint64_t hash() const
    {
        Hasher h;
        h.add(size());
        for (double v : values_) h.add(v);
        return h.value();
    }

private:
    std::vector<double> values_;
};

inline CoefficientField constant_coefficient(const FineMesh& mesh, double value)
{
    return CoefficientField(std::vector<double>(mesh.num_cells(), value));
}

/// Seeded field with log(kappa) uniformly distributed in
/// [log kmin, log kmax] at every cell.
///
/// With correlation_length == 0 the cells are independent draws. Otherwise a
/// smooth Gaussian field with squared-exponential covariance of that length
/// (random Fourier features) is sampled at the cell centroids and mapped
/// through the standard normal CDF, which keeps the log-uniform marginal.
inline CoefficientField log_uniform_coefficient(const FineMesh& mesh, double kmin, double kmax, std::uint64_t seed,
                                                double correlation_length = 0.0)
{
    if (!(kmin > 0) || !(kmax >= kmin)) throw InputError("log-uniform coefficient needs 0 < kmin <= kmax");
    if (!(correlation_length >= 0)) throw InputError("correlation length must be nonnegative");
    SplitMix64 rng(seed);
    const double lo = std::log(kmin), hi = std::log(kmax);
    std::vector<double> u(mesh.num_cells());
    if (correlation_length == 0) {
        for (auto& x : u) x = rng.uniform();
    } else {
        constexpr int features = 512;
        auto normal = [&rng] {
            const double r = std::sqrt(-2.0 * std::log1p(-rng.uniform()));
            return r * std::cos(2 * M_PI * rng.uniform());
        };
        std::vector<Point> freq(features);
        std::vector<double> shift(features);
        for (int n = 0; n < features; ++n) {
            freq[n] = Point(normal(), normal()) / correlation_length;
            shift[n] = 2 * M_PI * rng.uniform();
        }
        const double scale = std::sqrt(2.0 / features);
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const Point x = mesh.centroid(c);
            double g = 0;
            for (int n = 0; n < features; ++n) g += std::cos(freq[n].dot(x) + shift[n]);
            u[c] = 0.5 * std::erfc(-scale * g / std::sqrt(2.0));
        }
    }
    std::vector<double> v(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) v[c] = std::clamp(std::exp(lo + (hi - lo) * u[c]), kmin, kmax);
    return CoefficientField(std::move(v));
}

/// `MSFEM-KAPPA 1` followed by one positive value per fine cell.
inline CoefficientField read_coefficient(std::istream& in, int num_cells)
{
    detail::TokenLines lines(in);
    auto header = lines.expect("header");
    if (header.size() != 2 || header[0] != "MSFEM-KAPPA" || header[1] != "1")
        throw ParseError("expected header 'MSFEM-KAPPA 1'", lines.line());
    std::vector<double> v;
    v.reserve(num_cells);
    for (std::vector<std::string> t; lines.next(t);)
        for (const auto& s : t) {
            const double x = detail::parse_double(s, lines.line());
            if (!(x > 0) || !std::isfinite(x)) throw ParseError("coefficient must be positive", lines.line());
            v.push_back(x);
        }
    if (static_cast<int>(v.size()) != num_cells)
        throw InputError("coefficient file has " + std::to_string(v.size()) + " values for " +
                         std::to_string(num_cells) + " cells");
    return CoefficientField(std::move(v));
}

inline void write_coefficient(std::ostream& out, const CoefficientField& kappa)
{
    out << "MSFEM-KAPPA 1\n";
    for (double v : kappa.values()) out << detail::format_double(v) << '\n';
}

inline CoefficientField load_coefficient(const std::string& path, int num_cells)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open coefficient file '" + path + "'");
    return read_coefficient(in, num_cells);
}

} // namespace mgms
