#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "mts/errors.hpp"

namespace mts {

// Exact rational arithmetic for point-cloud weights and chart masses.
// Weights coming out of empirical measures are k/n, so numerators and
// denominators stay tiny; we still guard every reduction against int64
// overflow (via 128-bit intermediates) and fail loudly instead of wrapping.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1; // invariant: den > 0, gcd(|num|, den) == 1
};

namespace detail {

inline std::int64_t checked_narrow(__int128 v, const char* what) {
    if (v > static_cast<__int128>(INT64_MAX) || v < static_cast<__int128>(INT64_MIN)) {
        throw DomainError(std::string("rational overflow in ") + what);
    }
    return static_cast<std::int64_t>(v);
}

} // namespace detail

inline Rational make_rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw DomainError("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational{num, den};
}

inline Rational rat_add(const Rational& a, const Rational& b) {
    __int128 num = static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den;
    __int128 den = static_cast<__int128>(a.den) * b.den;
    // Reduce in 128 bits first so sums that are representable after reduction survive.
    auto abs128 = [](__int128 v) { return v < 0 ? -v : v; };
    __int128 x = abs128(num), y = den;
    while (y != 0) {
        __int128 t = x % y;
        x = y;
        y = t;
    }
    if (x > 1) {
        num /= x;
        den /= x;
    }
    return Rational{detail::checked_narrow(num, "add"), detail::checked_narrow(den, "add")};
}

inline Rational rat_sub(const Rational& a, const Rational& b) {
    return rat_add(a, Rational{-b.num, b.den});
}

inline bool rat_eq(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
}

inline bool rat_less(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}

inline double rat_to_double(const Rational& a) {
    return static_cast<double>(a.num) / static_cast<double>(a.den);
}

// lcm with overflow check; used to put cloud weights on a common integer grid.
inline std::int64_t checked_lcm(std::int64_t a, std::int64_t b) {
    if (a <= 0 || b <= 0) throw DomainError("lcm of non-positive values");
    const std::int64_t g = std::gcd(a, b);
    __int128 l = static_cast<__int128>(a / g) * b;
    return detail::checked_narrow(l, "lcm");
}

} // namespace mts
