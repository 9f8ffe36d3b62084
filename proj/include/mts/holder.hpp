#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mts/manifold.hpp"

namespace mts {

// Searchable surrogate for the unit ball of first-order Hölder-smooth
// functions on an interval: piecewise-linear functions on a uniform knot
// grid with quantized knot values. Constraints on a member g with knot
// values v_0..v_m (h = (hi-lo)/intervals):
//   |v_k| <= 1                                  (value bound)
//   |v_{k+1} - v_k| <= h                        (slope bound 1)
//   |(v_{k+2}-v_{k+1}) - (v_{k+1}-v_k)| <= h^(1+beta)   (Hölder condition on
//                                                the derivative at grid scale)
// Every member lies in the true Hölder ball, so the optimized discrepancy is
// a certified lower bound for the full-ball discrepancy.
struct GridFunctionFamily {
    double lo = -M_PI;
    double hi = M_PI;
    int intervals = 32;      // knot count = intervals + 1
    double beta = 1.0;       // Hölder exponent of the derivative, in (0, 1]
    double delta_q = 1.0 / 64.0; // knot-value quantization step
    int smoothness = 1;      // only first-order smoothness is implemented
};

void validate_family(const GridFunctionFamily& family);

inline double interval_step(const GridFunctionFamily& family) {
    return (family.hi - family.lo) / family.intervals;
}

// Default family on the canonical circle angle chart [-pi, pi].
GridFunctionFamily canonical_circle_family(double beta = 1.0);

// Signed knot loads c_k with sum_k c_k g(knot_k) == E_x[g] - E_y[g] for every
// piecewise-linear g on the grid (each point splits its weight between the
// two enclosing knots by linear interpolation). Clouds must be 1-d with all
// coordinates inside [lo, hi] (DomainError otherwise).
std::vector<double> knot_weights(const GridFunctionFamily& family, const WeightedPointCloud& x,
                                 const WeightedPointCloud& y);

// Precomputed knot index / interpolation fraction per coordinate, for callers
// that re-weight the same coordinates many times (bootstrap resampling).
struct KnotProjection {
    std::vector<std::int32_t> knot;
    std::vector<double> frac;
};
KnotProjection project_to_knots(const GridFunctionFamily& family,
                                const std::vector<double>& coords);

struct OracleResult {
    double value = 0.0;          // maximal discrepancy over the family
    std::vector<double> coeffs;  // maximizing knot values, size intervals + 1
};

// Exact maximization of sum_k c_k v_k over the quantized family by dynamic
// programming over (knot value, incoming increment) states. BudgetError when
// the state space would exceed the documented operation budget.
OracleResult oracle_ipm(const GridFunctionFamily& family, const WeightedPointCloud& x,
                        const WeightedPointCloud& y);

// Value-only fast path on precomputed knot loads (no maximizer recovery).
double oracle_ipm_value(const GridFunctionFamily& family, const std::vector<double>& loads);

struct MembershipReport {
    bool ok = true;
    std::string detail; // first violated constraint, empty when ok
};

// Checks the family constraints for explicit knot values (1e-9 tolerance at
// the constraint boundaries).
MembershipReport verify_holder_membership(const GridFunctionFamily& family,
                                          const std::vector<double>& coeffs);

} // namespace mts
