#include "mts/transport.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "mts/errors.hpp"

namespace mts {

double l2_divergence(const std::vector<Rational>& p, const std::vector<Rational>& q) {
    if (p.size() != q.size()) throw ShapeError("l2_divergence: occupancy lengths differ");
    if (p.empty()) throw ShapeError("l2_divergence: empty occupancy vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = rat_to_double(rat_sub(p[i], q[i]));
        acc += d * d;
    }
    return std::sqrt(acc);
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
    os << "from,to,mass\n";
    char buf[64];
    for (const auto& e : plan.entries) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.mass);
        os << e.from << ',' << e.to << ',' << buf << '\n';
    }
}

namespace {

double euclidean(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// A cloud with exactly-coincident points merged and weights scaled to a
// common integer grid: weight_i = units_i / scale.
struct ScaledCloud {
    std::vector<Vec> points;
    std::vector<std::int64_t> units;
    std::vector<std::size_t> original_index; // representative input index
};

std::int64_t common_scale(const WeightedPointCloud& x, const WeightedPointCloud& y) {
    std::int64_t l = 1;
    for (const auto& w : x.weights) l = checked_lcm(l, w.den);
    for (const auto& w : y.weights) l = checked_lcm(l, w.den);
    return l;
}

ScaledCloud merge_and_scale(const WeightedPointCloud& cloud, std::int64_t scale) {
    ScaledCloud out;
    std::map<Vec, std::size_t> slot;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto w = cloud.weights[i];
        const std::int64_t units = w.num * (scale / w.den);
        auto it = slot.find(cloud.points[i]);
        if (it == slot.end()) {
            slot.emplace(cloud.points[i], out.points.size());
            out.points.push_back(cloud.points[i]);
            out.units.push_back(units);
            out.original_index.push_back(i);
        } else {
            out.units[it->second] += units;
        }
    }
    return out;
}

std::pair<double, TransportPlan> wasserstein1_sorted_1d(const ScaledCloud& x, const ScaledCloud& y,
                                                        std::int64_t scale) {
    std::vector<std::size_t> xi(x.points.size()), yi(y.points.size());
    std::iota(xi.begin(), xi.end(), 0);
    std::iota(yi.begin(), yi.end(), 0);
    std::sort(xi.begin(), xi.end(), [&](std::size_t a, std::size_t b) {
        return x.points[a][0] < x.points[b][0];
    });
    std::sort(yi.begin(), yi.end(), [&](std::size_t a, std::size_t b) {
        return y.points[a][0] < y.points[b][0];
    });

    TransportPlan plan;
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    std::int64_t ra = x.units[xi[0]], rb = y.units[yi[0]];
    const double inv_scale = 1.0 / static_cast<double>(scale);
    while (true) {
        const std::int64_t m = std::min(ra, rb);
        const double mass = static_cast<double>(m) * inv_scale;
        cost += mass * std::abs(x.points[xi[i]][0] - y.points[yi[j]][0]);
        plan.entries.push_back({x.original_index[xi[i]], y.original_index[yi[j]], mass});
        ra -= m;
        rb -= m;
        if (ra == 0) {
            if (++i == xi.size()) break;
            ra = x.units[xi[i]];
        }
        if (rb == 0) {
            if (++j == yi.size()) break;
            rb = y.units[yi[j]];
        }
    }
    plan.cost = cost;
    return {cost, plan};
}

// Successive shortest paths with potentials on the complete bipartite graph.
// Supplies/demands are exact integers; costs are Euclidean distances.
std::pair<double, TransportPlan> wasserstein1_flow(const ScaledCloud& x, const ScaledCloud& y,
                                                   std::int64_t scale) {
    const std::size_t nx = x.points.size(), ny = y.points.size();
    const std::size_t nv = nx + ny;
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> cost(nx * ny);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) cost[i * ny + j] = euclidean(x.points[i], y.points[j]);
    }

    std::vector<std::int64_t> supply(x.units), demand(y.units);
    std::vector<std::int64_t> flow(nx * ny, 0);
    std::vector<double> potential(nv, 0.0);
    std::vector<double> dist(nv);
    std::vector<int> parent(nv); // incoming node on the shortest path, -1 for roots
    std::vector<char> settled(nv);

    std::int64_t remaining = 0;
    for (auto s : supply) remaining += s;

    while (remaining > 0) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(settled.begin(), settled.end(), 0);
        std::fill(parent.begin(), parent.end(), -1);
        for (std::size_t i = 0; i < nx; ++i) {
            if (supply[i] > 0) dist[i] = 0.0;
        }
        // Dense Dijkstra over the residual graph.
        for (std::size_t it = 0; it < nv; ++it) {
            int u = -1;
            double best = inf;
            for (std::size_t v = 0; v < nv; ++v) {
                if (!settled[v] && dist[v] < best) {
                    best = dist[v];
                    u = static_cast<int>(v);
                }
            }
            if (u < 0) break;
            settled[static_cast<std::size_t>(u)] = 1;
            // Relax only into unsettled nodes: rounding can leave reduced
            // costs a few ulps below zero, and re-parenting a settled node
            // would let the parent chain form a cycle.
            if (static_cast<std::size_t>(u) < nx) {
                const std::size_t i = static_cast<std::size_t>(u);
                for (std::size_t j = 0; j < ny; ++j) {
                    if (settled[nx + j]) continue;
                    const double rc =
                        std::max(0.0, cost[i * ny + j] + potential[i] - potential[nx + j]);
                    if (dist[i] + rc < dist[nx + j]) {
                        dist[nx + j] = dist[i] + rc;
                        parent[nx + j] = u;
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(u) - nx;
                for (std::size_t i = 0; i < nx; ++i) {
                    if (settled[i] || flow[i * ny + j] == 0) continue;
                    const double rc =
                        std::max(0.0, -cost[i * ny + j] + potential[nx + j] - potential[i]);
                    if (dist[static_cast<std::size_t>(u)] + rc < dist[i]) {
                        dist[i] = dist[static_cast<std::size_t>(u)] + rc;
                        parent[i] = u;
                    }
                }
            }
        }
        // Cheapest sink that still needs mass.
        int target = -1;
        double best = inf;
        for (std::size_t j = 0; j < ny; ++j) {
            if (demand[j] > 0 && dist[nx + j] < best) {
                best = dist[nx + j];
                target = static_cast<int>(nx + j);
            }
        }
        if (target < 0) throw Error("wasserstein1: flow network disconnected (internal)");

        // Bottleneck along the augmenting path.
        std::int64_t push = demand[static_cast<std::size_t>(target) - nx];
        for (int v = target; parent[v] >= 0; v = parent[v]) {
            const int u = parent[v];
            if (static_cast<std::size_t>(u) >= nx) { // backward arc sink->source
                push = std::min(push, flow[static_cast<std::size_t>(v) * ny +
                                           (static_cast<std::size_t>(u) - nx)]);
            }
        }
        {
            int root = target;
            while (parent[root] >= 0) root = parent[root];
            push = std::min(push, supply[static_cast<std::size_t>(root)]);
        }
        // Apply the augmentation.
        for (int v = target; parent[v] >= 0; v = parent[v]) {
            const int u = parent[v];
            if (static_cast<std::size_t>(u) < nx) {
                flow[static_cast<std::size_t>(u) * ny + (static_cast<std::size_t>(v) - nx)] += push;
            } else {
                flow[static_cast<std::size_t>(v) * ny + (static_cast<std::size_t>(u) - nx)] -= push;
            }
        }
        {
            int root = target;
            while (parent[root] >= 0) root = parent[root];
            supply[static_cast<std::size_t>(root)] -= push;
        }
        demand[static_cast<std::size_t>(target) - nx] -= push;
        remaining -= push;

        // Johnson potential update keeps reduced costs non-negative.
        const double dmax = dist[static_cast<std::size_t>(target)];
        for (std::size_t v = 0; v < nv; ++v) {
            potential[v] += std::isfinite(dist[v]) ? std::min(dist[v], dmax) : dmax;
        }
    }

    TransportPlan plan;
    double total = 0.0;
    const double inv_scale = 1.0 / static_cast<double>(scale);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            if (flow[i * ny + j] > 0) {
                const double mass = static_cast<double>(flow[i * ny + j]) * inv_scale;
                plan.entries.push_back({x.original_index[i], y.original_index[j], mass});
                total += mass * cost[i * ny + j];
            }
        }
    }
    plan.cost = total;
    return {total, plan};
}

} // namespace

std::pair<double, TransportPlan> wasserstein1(const WeightedPointCloud& x,
                                              const WeightedPointCloud& y) {
    validate_cloud(x);
    validate_cloud(y);
    if (x.points.front().size() != y.points.front().size()) {
        throw ShapeError("wasserstein1: cloud dimensions differ");
    }
    const std::int64_t scale = common_scale(x, y);
    const ScaledCloud sx = merge_and_scale(x, scale);
    const ScaledCloud sy = merge_and_scale(y, scale);
    if (x.points.front().size() == 1) return wasserstein1_sorted_1d(sx, sy, scale);
    return wasserstein1_flow(sx, sy, scale);
}

double assignment_oracle(const std::vector<Vec>& x, const std::vector<Vec>& y) {
    if (x.empty() || x.size() != y.size()) {
        throw ShapeError("assignment_oracle: clouds must be non-empty and equal size");
    }
    const std::size_t n = x.size();
    if (n > 20) throw BudgetError("assignment_oracle: n > 20 exceeds the subset-DP budget");
    for (const auto& p : x) {
        if (p.size() != x.front().size()) throw ShapeError("assignment_oracle: ragged dimensions");
    }
    for (const auto& p : y) {
        if (p.size() != x.front().size()) throw ShapeError("assignment_oracle: ragged dimensions");
    }

    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = euclidean(x[i], y[j]);
    }
    const std::size_t full = (std::size_t{1} << n);
    std::vector<double> dp(full, std::numeric_limits<double>::infinity());
    dp[0] = 0.0;
    for (std::size_t mask = 1; mask < full; ++mask) {
        const std::size_t i = static_cast<std::size_t>(std::popcount(mask)) - 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (mask & (std::size_t{1} << j)) {
                const double c = dp[mask ^ (std::size_t{1} << j)] + cost[i * n + j];
                if (c < best) best = c;
            }
        }
        dp[mask] = best;
    }
    return dp[full - 1] / static_cast<double>(n);
}

ProjectedTResult projected_T(const Atlas& atlas, const Sample& x, const Sample& y,
                             bool skip_empty) {
    if (x.points.empty() || y.points.empty()) throw DomainError("projected_T: empty sample");
    ProjectedTResult result;
    result.per_chart.assign(atlas.chart_count(), std::nullopt);
    bool any = false;
    for (std::size_t alpha = 0; alpha < atlas.chart_count(); ++alpha) {
        const auto cx = push_to_chart(atlas, x, alpha);
        const auto cy = push_to_chart(atlas, y, alpha);
        if (cx.points.empty() || cy.points.empty()) {
            if (!skip_empty) {
                throw DomainError("projected_T: chart with no mass on one side");
            }
            continue;
        }
        const double w = wasserstein1(cx, cy).first;
        result.per_chart[alpha] = w;
        if (!any || w > result.value) {
            result.value = w;
            result.argmax_chart = alpha;
        }
        any = true;
    }
    result.degenerate = !any;
    if (!any) result.value = 0.0;
    return result;
}

} // namespace mts
