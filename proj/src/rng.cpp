#include "mts/rng.hpp"

#include <cmath>

namespace mts::rng {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    return splitmix64(s);
}

double Stream::uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

std::size_t Stream::uniform_index(std::size_t n) {
    // Rejection from the top of the 64-bit range removes modulo bias and is
    // deterministic for a given engine state.
    const std::uint64_t m = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % m;
    std::uint64_t x;
    do {
        x = eng_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % m);
}

double Stream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double Stream::von_mises(double mu, double kappa) {
    // Best & Fisher (1979) rejection sampler from a wrapped Cauchy envelope.
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    double f;
    for (;;) {
        const double u1 = uniform01();
        double u2 = uniform01();
        if (u2 <= 0.0) u2 = 0x1.0p-53; // guard log(0); measure-zero event
        const double z = std::cos(M_PI * u1);
        f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        if (c * (2.0 - c) - u2 > 0.0) break;
        if (std::log(c / u2) + 1.0 - c >= 0.0) break;
    }
    const double u3 = uniform01();
    const double theta = (u3 < 0.5 ? -1.0 : 1.0) * std::acos(f);
    return wrap_angle(mu + theta);
}

double wrap_angle(double theta) {
    const double two_pi = 2.0 * M_PI;
    double t = theta - two_pi * std::floor((theta + M_PI) / two_pi);
    // floor rounding can land exactly on +pi; map it back to -pi.
    if (t >= M_PI) t -= two_pi;
    return t;
}

} // namespace mts::rng
