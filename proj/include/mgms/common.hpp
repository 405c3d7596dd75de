#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgms {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = Eigen::Vector2d;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: mesh/config/coefficient files, bad parameters.
class InputError : public Error
{
public:
    using Error::Error;
};

/// Mesh or partition that violates a structural invariant.
class MeshError : public InputError
{
public:
    MeshError(const std::string& what, long entity = -1)
        : InputError(entity >= 0 ? what + " (entity " + std::to_string(entity) + ")" : what),
          entity_(entity)
    {}
    long entity() const { return entity_; }

private:
    long entity_;
};

/// Parse failure with a 1-based line number.
class ParseError : public InputError
{
public:
    ParseError(const std::string& what, long line)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line), message_(what)
    {}
    long line() const { return line_; }
    /// Message without the line prefix.
    const std::string& message() const { return message_; }

private:
    long line_;
    std::string message_;
};

/// Singular systems, failed factorizations, residuals above tolerance.
class NumericalError : public Error
{
public:
    using Error::Error;
};

/// 64-bit FNV-1a over raw bytes; used for content keys of cache files.
class Hasher
{
public:
    Hasher& bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Hasher& add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }
    Hasher& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
    Hasher& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    Hasher& add(std::uint64_t v)
    {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i)
            buf[i] = static_cast<unsigned char>(v >> (8 * i));
        return bytes(buf, 8);
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// splitmix64; the uniform draw below does not depend on the standard
/// library's distribution implementations, so seeded outputs are portable.
class SplitMix64
{
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        s[i] = digits[v & 0xf];
    return s;
}

namespace detail {

/// Shortest round-trip decimal form.
inline std::string format_double(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

} // namespace mgms
