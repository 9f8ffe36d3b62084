// Tests for the quantized piecewise-linear function family and its exact
// dynamic-programming discrepancy oracle: family validation, knot loads,
// known-answer maxima, membership certification, refinement monotonicity,
// and the duality bound against exact transport.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mts/errors.hpp"
#include "mts/holder.hpp"
#include "mts/rng.hpp"
#include "mts/transport.hpp"

using namespace mts;

namespace reference {

WeightedPointCloud uniform_cloud(const std::vector<double>& xs) {
    WeightedPointCloud c;
    for (double v : xs) c.points.push_back({v});
    c.weights.assign(xs.size(), make_rational(1, static_cast<std::int64_t>(xs.size())));
    return c;
}

WeightedPointCloud point_mass(double u) {
    WeightedPointCloud c;
    c.points = {{u}};
    c.weights = {make_rational(1, 1)};
    return c;
}

// E_x[g] - E_y[g] for the piecewise-linear interpolant of knot values g.
double direct_discrepancy(const GridFunctionFamily& f, const std::vector<double>& g,
                          const WeightedPointCloud& x, const WeightedPointCloud& y) {
    const double h = interval_step(f);
    auto eval = [&](double u) {
        int k = static_cast<int>(std::floor((u - f.lo) / h));
        if (k >= f.intervals) k = f.intervals - 1;
        if (k < 0) k = 0;
        const double frac = (u - f.lo) / h - k;
        return (1.0 - frac) * g[static_cast<std::size_t>(k)] +
               frac * g[static_cast<std::size_t>(k) + 1];
    };
    double acc = 0.0;
    for (std::size_t i = 0; i < x.points.size(); ++i) {
        acc += rat_to_double(x.weights[i]) * eval(x.points[i][0]);
    }
    for (std::size_t i = 0; i < y.points.size(); ++i) {
        acc -= rat_to_double(y.weights[i]) * eval(y.points[i][0]);
    }
    return acc;
}

GridFunctionFamily unit_interval_family() {
    GridFunctionFamily f;
    f.lo = 0.0;
    f.hi = 1.0;
    f.intervals = 32;
    f.beta = 1.0;
    f.delta_q = 1.0 / 64.0;
    return f;
}

} // namespace reference

TEST_CASE("family validation") {
    GridFunctionFamily f = canonical_circle_family();
    CHECK_NOTHROW(validate_family(f));
    CHECK(interval_step(f) == doctest::Approx(2.0 * M_PI / 32.0).epsilon(1e-15));

    GridFunctionFamily bad = f;
    bad.intervals = 0;
    CHECK_THROWS_AS(validate_family(bad), BudgetError);
    bad = f;
    bad.intervals = 41;
    CHECK_THROWS_AS(validate_family(bad), BudgetError);
    bad = f;
    bad.delta_q = 0.0;
    CHECK_THROWS_AS(validate_family(bad), DomainError);
    bad = f;
    bad.beta = 1.5;
    CHECK_THROWS_AS(validate_family(bad), DomainError);
    bad = f;
    bad.smoothness = 2;
    CHECK_THROWS_AS(validate_family(bad), DomainError);
    bad = f;
    bad.lo = bad.hi;
    CHECK_THROWS_AS(validate_family(bad), DomainError);

    // A quantization step fine enough to blow the operation budget.
    bad = f;
    bad.intervals = 40;
    bad.delta_q = 1e-5;
    CHECK_THROWS_AS(validate_family(bad), BudgetError);
}

TEST_CASE("knot projection") {
    const auto f = reference::unit_interval_family();
    const double h = interval_step(f);

    const auto proj = project_to_knots(f, {0.0, h * 1.5, 1.0});
    REQUIRE(proj.knot.size() == 3);
    CHECK(proj.knot[0] == 0);
    CHECK(proj.frac[0] == doctest::Approx(0.0));
    CHECK(proj.knot[1] == 1);
    CHECK(proj.frac[1] == doctest::Approx(0.5).epsilon(1e-12));
    // The right endpoint folds into the last interval with fraction one.
    CHECK(proj.knot[2] == f.intervals - 1);
    CHECK(proj.frac[2] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(project_to_knots(f, {-0.1}), DomainError);
    CHECK_THROWS_AS(project_to_knots(f, {1.1}), DomainError);
}

TEST_CASE("knot loads represent the empirical discrepancy functional") {
    const auto f = canonical_circle_family();
    const auto x = reference::uniform_cloud({-2.0, -0.5, 1.1, 2.917});
    const auto y = reference::uniform_cloud({0.3, 2.4, -2.9, -0.1});
    const auto loads = knot_weights(f, x, y);
    REQUIRE(loads.size() == static_cast<std::size_t>(f.intervals) + 1);

    // Loads must integrate any piecewise-linear function exactly.
    rng::Stream stream(17);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> g(loads.size());
        for (auto& v : g) v = stream.uniform(-1.0, 1.0);
        double via_loads = 0.0;
        for (std::size_t k = 0; k < loads.size(); ++k) via_loads += loads[k] * g[k];
        CHECK(via_loads ==
              doctest::Approx(reference::direct_discrepancy(f, g, x, y)).epsilon(1e-12));
    }

    // Loads of the signed measure sum to zero (both sides carry unit mass).
    double total = 0.0;
    for (double v : loads) total += v;
    CHECK(std::abs(total) < 1e-12);

    CHECK_THROWS_AS(knot_weights(f, reference::point_mass(0.0),
                                 WeightedPointCloud{{{0.0, 0.0}}, {make_rational(1, 1)}}),
                    ShapeError);
}

TEST_CASE("point masses at the interval endpoints reach the slope ceiling") {
    // On [0,1] with 32 intervals and quantization 1/64 the slope bound h is
    // exactly two quantization steps, so the linear descent g(u) = 1/2 - u is
    // representable and optimal: value exactly 1.
    const auto f = reference::unit_interval_family();
    const auto r = oracle_ipm(f, reference::point_mass(0.0), reference::point_mass(1.0));
    CHECK(r.value == 1.0);
    REQUIRE(r.coeffs.size() == 33);
    CHECK(r.coeffs.front() - r.coeffs.back() == doctest::Approx(1.0).epsilon(1e-12));
    const auto membership = verify_holder_membership(f, r.coeffs);
    CHECK(membership.ok);
    CHECK(membership.detail.empty());

    // Identical inputs: zero discrepancy (the zero function is admissible and
    // no function can do better than |loads| = 0).
    const auto zero = oracle_ipm(f, reference::point_mass(0.25), reference::point_mass(0.25));
    CHECK(zero.value == 0.0);
}

TEST_CASE("oracle value equals the load functional at its own maximizer") {
    const auto f = canonical_circle_family();
    const auto x = reference::uniform_cloud({-2.2, 0.4, 0.9, 1.7});
    const auto y = reference::uniform_cloud({-1.0, -0.3, 2.6, 3.0});
    const auto r = oracle_ipm(f, x, y);
    CHECK(verify_holder_membership(f, r.coeffs).ok);
    CHECK(r.value ==
          doctest::Approx(reference::direct_discrepancy(f, r.coeffs, x, y)).epsilon(1e-12));

    // Value-only fast path agrees with the full recovery path.
    const auto loads = knot_weights(f, x, y);
    CHECK(oracle_ipm_value(f, loads) == doctest::Approx(r.value).epsilon(1e-15));
    CHECK_THROWS_AS(oracle_ipm_value(f, std::vector<double>(7, 0.0)), ShapeError);
}

TEST_CASE("membership verifier flags each constraint") {
    const auto f = canonical_circle_family();
    const double h = interval_step(f);
    std::vector<double> g(static_cast<std::size_t>(f.intervals) + 1, 0.0);

    auto expect_violation = [&](const std::vector<double>& coeffs, const char* needle) {
        const auto rep = verify_holder_membership(f, coeffs);
        CHECK(!rep.ok);
        CHECK(rep.detail.find(needle) != std::string::npos);
    };

    auto value_violation = g;
    value_violation[4] = 1.5;
    expect_violation(value_violation, "value bound");

    auto slope_violation = g;
    slope_violation[5] = 2.0 * h; // jump of 2h over one interval
    slope_violation[5] = std::min(slope_violation[5], 1.0); // keep |v| legal
    expect_violation(slope_violation, "slope bound");

    auto curvature_violation = g;
    // Increments +12delta then -12delta: each within the slope bound, but the
    // change 24delta = 0.375 far exceeds h^2 ~ 0.0386.
    curvature_violation[11] = 12.0 / 64.0;
    expect_violation(curvature_violation, "Hölder bound");

    expect_violation(std::vector<double>(5, 0.0), "wrong length");

    CHECK(verify_holder_membership(f, g).ok);
}

TEST_CASE("refining the quantization can only grow the maximum") {
    // The value grids nest as delta halves (and the increment windows widen),
    // so the exact maximum is non-decreasing along the refinement.
    const auto x = reference::uniform_cloud({-2.0, -0.5, 1.1});
    const auto y = reference::uniform_cloud({0.3, 2.4, -2.9});
    double prev = -1.0;
    for (double delta : {1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0}) {
        GridFunctionFamily f = canonical_circle_family();
        f.delta_q = delta;
        const auto r = oracle_ipm(f, x, y);
        CHECK(r.value >= prev - 1e-15);
        CHECK(verify_holder_membership(f, r.coeffs).ok);
        prev = r.value;
    }
}

TEST_CASE("oracle is dominated by exact transport on 1-Lipschitz families") {
    // Slope bound h per interval means members are 1-Lipschitz, so the family
    // discrepancy can never exceed the 1-Wasserstein distance.
    rng::Stream stream(23);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> a(6), b(6);
        for (auto& v : a) v = stream.uniform(-3.0, 3.0);
        for (auto& v : b) v = stream.uniform(-3.0, 3.0);
        const auto x = reference::uniform_cloud(a);
        const auto y = reference::uniform_cloud(b);
        const auto f = canonical_circle_family();
        const double oracle = oracle_ipm(f, x, y).value;
        const double w1 = wasserstein1(x, y).first;
        CHECK(oracle <= w1 + 1e-9);
        CHECK(oracle >= 0.0); // supremum over a sign-symmetric family
    }
}
