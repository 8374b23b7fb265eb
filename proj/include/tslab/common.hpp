#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace tslab {

using Vec = std::vector<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base class for all numeric-contract violations raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutsideTube : Error {
    using Error::Error;
};
struct DegenerateProjection : Error {
    using Error::Error;
};
struct QuadratureNotConverged : Error {
    using Error::Error;
};
struct NonPositiveTable : Error {
    using Error::Error;
};
struct InvalidBeta : Error {
    using Error::Error;
};
struct NonFiniteState : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct BinMismatch : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scale(double c, const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

/// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double u) {
    double w = std::fmod(u, two_pi);
    if (w < 0.0) w += two_pi;
    if (w >= two_pi) w = 0.0;
    return w;
}

/// SplitMix64 step; used to derive independent per-chain RNG streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace tslab
