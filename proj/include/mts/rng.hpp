#pragma once

#include <cstdint>
#include <random>

namespace mts::rng {

// splitmix64 finalizer step. Advances `state` and returns the next output.
// Used for seed derivation only (never as the sampling generator).
std::uint64_t splitmix64(std::uint64_t& state);

// Derive an independent child seed from (master, index). Injective in `index`
// for fixed master: index is spread by the splitmix64 golden-ratio increment
// before the bijective finalizer is applied.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Deterministic, bit-portable random stream: std::mt19937_64 (whose seeding
// and output sequence are fixed by the standard) plus hand-written transforms
// that avoid any long-double or libm-ordering dependence beyond IEEE doubles.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53 random bits: (x >> 11) * 2^-53.
    double uniform01();

    // Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Uniform index in {0, ..., n-1} by rejection (no modulo bias).
    std::size_t uniform_index(std::size_t n);

    // Standard normal via the polar (Marsaglia) method; caches the spare.
    double normal();

    // Von Mises on [-pi, pi) with mean mu and concentration kappa > 0,
    // Best-Fisher wrapped-Cauchy rejection sampler. Callers handle kappa == 0
    // (it is exactly the uniform-angle case and must reuse that branch).
    double von_mises(double mu, double kappa);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Wrap an angle into [-pi, pi).
double wrap_angle(double theta);

} // namespace mts::rng
