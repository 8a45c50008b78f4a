#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "thinlab/error.hpp"

namespace thinlab {

namespace detail {

inline std::int64_t narrow(__int128 v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw Error(ErrorKind::Overflow, "integer matrix entry exceeds 64 bits");
    return static_cast<std::int64_t>(v);
}

}  // namespace detail

struct MobiusMap {
    std::int64_t a = 1, b = 0, c = 0, d = 1;

    static MobiusMap identity() { return {}; }

    std::int64_t det() const {
        return detail::narrow(static_cast<__int128>(a) * d - static_cast<__int128>(b) * c);
    }

    // valid for det 1
    MobiusMap inverse() const { return {d, -b, -c, a}; }

    std::int64_t trace() const { return a + d; }

    bool hyperbolic() const { return std::llabs(trace()) > 2; }

    friend MobiusMap operator*(const MobiusMap& x, const MobiusMap& y) {
        using W = __int128;
        return {detail::narrow(W(x.a) * y.a + W(x.b) * y.c), detail::narrow(W(x.a) * y.b + W(x.b) * y.d),
                detail::narrow(W(x.c) * y.a + W(x.d) * y.c), detail::narrow(W(x.c) * y.b + W(x.d) * y.d)};
    }

    friend bool operator==(const MobiusMap& x, const MobiusMap& y) {
        return x.a == y.a && x.b == y.b && x.c == y.c && x.d == y.d;
    }
    friend bool operator<(const MobiusMap& x, const MobiusMap& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.b != y.b) return x.b < y.b;
        if (x.c != y.c) return x.c < y.c;
        return x.d < y.d;
    }

    std::string str() const {
        return "(" + std::to_string(a) + "," + std::to_string(b) + ";" + std::to_string(c) + "," +
               std::to_string(d) + ")";
    }
};

struct MobiusImage {
    double image;
    double derivative_modulus;
};

constexpr double kPoleTolerance = 1e-14;

inline MobiusImage mobius_apply(const MobiusMap& m, double x) {
    double den = static_cast<double>(m.c) * x + static_cast<double>(m.d);
    if (std::fabs(den) < kPoleTolerance) throw Error(ErrorKind::PoleHit, "cx + d = 0 at x = " + std::to_string(x));
    double num = static_cast<double>(m.a) * x + static_cast<double>(m.b);
    return {num / den, 1.0 / (den * den)};
}

}  // namespace thinlab
