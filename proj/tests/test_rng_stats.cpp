// Tests for the portable random streams, seed derivation, and the exact
// binomial statistics helpers. Known-answer values were computed with an
// independent high-precision implementation and are frozen here as literals.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mts/rng.hpp"
#include "mts/stats.hpp"

using namespace mts;

TEST_CASE("splitmix64 matches the published output sequence") {
    // Reference vectors for the splitmix64 finalizer seeded with 0.
    std::uint64_t state = 0;
    CHECK(rng::splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(rng::splitmix64(state) == 0x6E789E6AA1B965F4ULL);
    CHECK(rng::splitmix64(state) == 0x06C45D188009454FULL);
}

TEST_CASE("mt19937_64 engine is the standard one") {
    // The C++ standard pins the 10000th output of the default-seeded engine.
    rng::Stream stream(5489u);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = stream.next_u64();
    CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("derive_seed is injective over a large index range") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 100000; ++i) seen.insert(rng::derive_seed(42, i));
    CHECK(seen.size() == 100000);
    // Different masters decorrelate.
    CHECK(rng::derive_seed(1, 0) != rng::derive_seed(2, 0));
}

TEST_CASE("uniform01 uses exactly 53 bits of the raw draw") {
    rng::Stream a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        const double expected = static_cast<double>(b.next_u64() >> 11) * 0x1.0p-53;
        const double got = a.uniform01();
        CHECK(got == expected);
        CHECK(got >= 0.0);
        CHECK(got < 1.0);
    }
}

TEST_CASE("uniform_index stays in range and covers all cells") {
    rng::Stream stream(7);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const std::size_t k = stream.uniform_index(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    // Crude uniformity: every cell within +-25% of the expected 1000.
    for (int c : counts) {
        CHECK(c > 750);
        CHECK(c < 1250);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    rng::Stream stream(2024);
    const int n = 50000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = stream.normal();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("normal spare caching keeps the stream deterministic") {
    rng::Stream a(99), b(99);
    for (int i = 0; i < 64; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("von Mises sampler has the right circular moments") {
    // Mean resultant length of vM(mu, kappa) is I1(kappa)/I0(kappa):
    // 0.697774657964008 at kappa = 2 (computed with scipy.special.iv).
    rng::Stream stream(11);
    const double mu = 0.7;
    const int n = 40000;
    double c = 0.0, s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = stream.von_mises(mu, 2.0);
        REQUIRE(t >= -M_PI);
        REQUIRE(t < M_PI);
        c += std::cos(t - mu);
        s += std::sin(t - mu);
    }
    CHECK(std::abs(c / n - 0.697774657964008) < 0.01);
    CHECK(std::abs(s / n) < 0.01);
}

TEST_CASE("wrap_angle maps onto [-pi, pi)") {
    CHECK(rng::wrap_angle(0.1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(rng::wrap_angle(M_PI) == doctest::Approx(-M_PI));
    CHECK(rng::wrap_angle(-M_PI) == doctest::Approx(-M_PI));
    CHECK(rng::wrap_angle(3.0 * M_PI) == doctest::Approx(-M_PI));
    CHECK(rng::wrap_angle(2.0 * M_PI + 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    for (double t = -20.0; t <= 20.0; t += 0.37) {
        const double w = rng::wrap_angle(t);
        CHECK(w >= -M_PI);
        CHECK(w < M_PI);
        // Same point on the circle.
        CHECK(std::cos(w) == doctest::Approx(std::cos(t)).epsilon(1e-9));
        CHECK(std::sin(w) == doctest::Approx(std::sin(t)).epsilon(1e-9));
    }
}

TEST_CASE("binomial_cdf matches direct summation") {
    // P(K <= 2) for Bin(5, 0.3) = 0.83692 exactly (direct arithmetic).
    CHECK(binomial_cdf(2, 5, 0.3) == doctest::Approx(0.83692).epsilon(1e-12));
    CHECK(binomial_cdf(5, 5, 0.3) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(binomial_cdf(0, 5, 0.3) == doctest::Approx(std::pow(0.7, 5)).epsilon(1e-12));
}

TEST_CASE("Clopper-Pearson interval known answers") {
    // 10 successes of 200 at 95%: frozen from an independent bisection on the
    // exact binomial CDF.
    const auto ci = clopper_pearson(10, 200, 0.95);
    CHECK(ci.lo == doctest::Approx(0.02423416547210855).epsilon(1e-9));
    CHECK(ci.hi == doctest::Approx(0.09002753770135137).epsilon(1e-9));

    const auto zero = clopper_pearson(0, 100, 0.95);
    CHECK(zero.lo == 0.0);
    CHECK(zero.hi == doctest::Approx(0.03621669264517641).epsilon(1e-9));

    const auto full = clopper_pearson(100, 100, 0.95);
    CHECK(full.hi == 1.0);
    CHECK(full.lo == doctest::Approx(1.0 - 0.03621669264517641).epsilon(1e-9));
}

TEST_CASE("Clopper-Pearson interval brackets the point estimate") {
    for (std::size_t n : {20u, 50u, 137u}) {
        for (std::size_t k = 0; k <= n; k += 7) {
            const auto ci = clopper_pearson(k, n, 0.95);
            const double rate = static_cast<double>(k) / static_cast<double>(n);
            CHECK(ci.lo <= rate);
            CHECK(ci.hi >= rate);
            CHECK(ci.lo >= 0.0);
            CHECK(ci.hi <= 1.0);
        }
    }
}

TEST_CASE("exact binomial acceptance regions") {
    // Frozen independently: the smallest two-sided 99% regions around p=0.05.
    const auto r500 = binomial_acceptance_region(500, 0.05, 0.99);
    CHECK(r500.first == 13);
    CHECK(r500.second == 38);
    const auto r300 = binomial_acceptance_region(300, 0.05, 0.99);
    CHECK(r300.first == 6);
    CHECK(r300.second == 25);
}
