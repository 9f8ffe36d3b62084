#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "mts/manifold.hpp"

namespace mts {

// L2 distance between two exact occupancy vectors of equal length.
double l2_divergence(const std::vector<Rational>& p, const std::vector<Rational>& q);

struct PlanEntry {
    std::size_t from = 0; // index into the first cloud
    std::size_t to = 0;   // index into the second cloud
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<PlanEntry> entries;
    double cost = 0.0;
};

// Debug export, one entry per row: from,to,mass (17 significant digits).
void write_plan_csv(std::ostream& os, const TransportPlan& plan);

// Exact 1-Wasserstein distance between weighted point clouds of equal
// dimension. Rational weights are put on a common integer grid (LCM of the
// denominators), exactly coincident points are merged onto their first
// occurrence, and the problem is solved exactly:
//   - dimension 1: sorted quantile coupling;
//   - dimension >= 2: successive-shortest-path min-cost flow with potentials
//     on the complete bipartite graph.
// Plan entries are indices into the input clouds (duplicate groups are
// consolidated onto the representative first index).
std::pair<double, TransportPlan> wasserstein1(const WeightedPointCloud& x,
                                              const WeightedPointCloud& y);

// Independent exact matching solver used to cross-check wasserstein1: average
// assignment cost between equal-size uniformly-weighted point lists, solved
// by dynamic programming over subsets. Budget-capped at n <= 20.
double assignment_oracle(const std::vector<Vec>& x, const std::vector<Vec>& y);

struct ProjectedTResult {
    double value = 0.0;                                 // max over evaluated charts
    std::size_t argmax_chart = 0;                       // lowest maximizing index
    std::vector<std::optional<double>> per_chart;       // nullopt = skipped
    bool degenerate = false;                            // no chart evaluable
};

// Projected transport statistic: max over charts of W1 between the chart
// pushforwards of the two empirical measures. A chart with no point from one
// side is skipped when skip_empty is set, otherwise it raises DomainError.
ProjectedTResult projected_T(const Atlas& atlas, const Sample& x, const Sample& y,
                             bool skip_empty);

} // namespace mts
