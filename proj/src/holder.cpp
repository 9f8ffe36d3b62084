#include "mts/holder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mts/errors.hpp"

namespace mts {

namespace {

struct GridGeometry {
    double h = 0.0;      // knot spacing
    int vmax = 0;        // value indices in [-vmax, vmax], value = index * delta_q
    int dmax = 0;        // per-interval increment indices in [-dmax, dmax]
    int cmax = 0;        // max change of increment between adjacent intervals
};

GridGeometry geometry(const GridFunctionFamily& f) {
    GridGeometry g;
    g.h = interval_step(f);
    // The +1e-9 absorbs float noise when the ratio is an exact integer; any
    // overshoot past the true bound is below the membership tolerance.
    g.vmax = static_cast<int>(std::floor(1.0 / f.delta_q + 1e-9));
    g.dmax = static_cast<int>(std::floor(g.h / f.delta_q + 1e-9));
    g.cmax = static_cast<int>(std::floor(std::pow(g.h, 1.0 + f.beta) / f.delta_q + 1e-9));
    // Increments live in [-dmax, dmax], so a wider transition window is moot.
    g.cmax = std::min(g.cmax, 2 * g.dmax);
    return g;
}

} // namespace

void validate_family(const GridFunctionFamily& f) {
    if (!(f.lo < f.hi)) throw DomainError("grid family: empty interval");
    if (f.intervals < 1 || f.intervals > 40) {
        throw BudgetError("grid family: interval count must be in [1, 40]");
    }
    if (!(f.delta_q > 0.0 && f.delta_q <= 1.0)) {
        throw DomainError("grid family: quantization step must be in (0, 1]");
    }
    if (!(f.beta > 0.0 && f.beta <= 1.0)) throw DomainError("grid family: beta must be in (0, 1]");
    if (f.smoothness != 1) throw DomainError("grid family: only first-order smoothness is implemented");
    const GridGeometry g = geometry(f);
    // Total DP work: knots x values x increments x transition window.
    const double ops = static_cast<double>(f.intervals + 1) * (2.0 * g.vmax + 1) *
                       (2.0 * g.dmax + 1) * (2.0 * g.cmax + 1);
    if (ops > 1e8) throw BudgetError("grid family: quantized search space exceeds the 1e8 budget");
}

GridFunctionFamily canonical_circle_family(double beta) {
    GridFunctionFamily f;
    f.lo = -M_PI;
    f.hi = M_PI;
    f.intervals = 32;
    f.beta = beta;
    f.delta_q = 1.0 / 64.0;
    return f;
}

KnotProjection project_to_knots(const GridFunctionFamily& family,
                                const std::vector<double>& coords) {
    validate_family(family);
    const double h = interval_step(family);
    KnotProjection proj;
    proj.knot.reserve(coords.size());
    proj.frac.reserve(coords.size());
    for (double u : coords) {
        if (u < family.lo - 1e-12 || u > family.hi + 1e-12) {
            throw DomainError("grid family: coordinate outside the oracle interval");
        }
        double pos = (std::min(std::max(u, family.lo), family.hi) - family.lo) / h;
        int k = static_cast<int>(std::floor(pos));
        if (k >= family.intervals) k = family.intervals - 1; // u == hi
        proj.knot.push_back(k);
        proj.frac.push_back(pos - k);
    }
    return proj;
}

std::vector<double> knot_weights(const GridFunctionFamily& family, const WeightedPointCloud& x,
                                 const WeightedPointCloud& y) {
    validate_cloud(x);
    validate_cloud(y);
    if (x.points.front().size() != 1 || y.points.front().size() != 1) {
        throw ShapeError("grid family: clouds must be 1-dimensional");
    }
    std::vector<double> loads(static_cast<std::size_t>(family.intervals) + 1, 0.0);
    auto accumulate = [&](const WeightedPointCloud& cloud, double sign) {
        std::vector<double> coords;
        coords.reserve(cloud.points.size());
        for (const auto& p : cloud.points) coords.push_back(p[0]);
        const KnotProjection proj = project_to_knots(family, coords);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const double w = sign * rat_to_double(cloud.weights[i]);
            loads[static_cast<std::size_t>(proj.knot[i])] += w * (1.0 - proj.frac[i]);
            loads[static_cast<std::size_t>(proj.knot[i]) + 1] += w * proj.frac[i];
        }
    };
    accumulate(x, 1.0);
    accumulate(y, -1.0);
    return loads;
}

namespace {

// Shared DP core. When `back` is non-null it records, for every knot k >= 2
// and state (value v_k, increment d_k), the maximizing previous increment as
// an offset from d_k (int16 covers any window passing the size budget).
double run_dp(const GridFunctionFamily& f, const std::vector<double>& loads,
              std::vector<std::int16_t>* back, int* best_v_out, int* best_d_out) {
    const GridGeometry g = geometry(f);
    const int nv = 2 * g.vmax + 1;
    const int nd = 2 * g.dmax + 1;
    const int m = f.intervals;
    constexpr double ninf = -std::numeric_limits<double>::infinity();

    auto vval = [&](int vi) { return (vi - g.vmax) * f.delta_q; };
    std::vector<double> cur(static_cast<std::size_t>(nv) * nd, ninf);
    std::vector<double> nxt(static_cast<std::size_t>(nv) * nd, ninf);
    if (back) back->assign(static_cast<std::size_t>(m + 1) * nv * nd, 0);

    // Knot 1 states: v1 = v0 + d1, value = c0*v0 + c1*v1, v0 determined by
    // (v1, d1), no Hölder constraint on the first increment.
    for (int v1 = 0; v1 < nv; ++v1) {
        for (int d1 = -g.dmax; d1 <= g.dmax; ++d1) {
            const int v0 = v1 - d1;
            if (v0 < 0 || v0 >= nv) continue;
            cur[static_cast<std::size_t>(v1) * nd + (d1 + g.dmax)] =
                loads[0] * vval(v0) + loads[1] * vval(v1);
        }
    }

    for (int k = 2; k <= m; ++k) {
        std::fill(nxt.begin(), nxt.end(), ninf);
        for (int d = -g.dmax; d <= g.dmax; ++d) {
            const int d_lo = std::max(-g.dmax, d - g.cmax);
            const int d_hi = std::min(g.dmax, d + g.cmax);
            for (int v = 0; v < nv; ++v) {
                const int vp = v - d; // previous knot value index
                if (vp < 0 || vp >= nv) continue;
                double best = ninf;
                int best_prev = 0;
                const double* row = &cur[static_cast<std::size_t>(vp) * nd];
                for (int dp = d_lo; dp <= d_hi; ++dp) {
                    const double cand = row[dp + g.dmax];
                    if (cand > best) {
                        best = cand;
                        best_prev = dp;
                    }
                }
                if (best == ninf) continue;
                nxt[static_cast<std::size_t>(v) * nd + (d + g.dmax)] = best + loads[static_cast<std::size_t>(k)] * vval(v);
                if (back) {
                    (*back)[(static_cast<std::size_t>(k) * nv + v) * nd + (d + g.dmax)] =
                        static_cast<std::int16_t>(best_prev - d);
                }
            }
        }
        std::swap(cur, nxt);
    }

    double best = ninf;
    int best_v = g.vmax, best_d = 0;
    for (int v = 0; v < nv; ++v) {
        for (int d = 0; d < nd; ++d) {
            const double c = cur[static_cast<std::size_t>(v) * nd + d];
            if (c > best) {
                best = c;
                best_v = v;
                best_d = d - g.dmax;
            }
        }
    }
    if (best_v_out) *best_v_out = best_v;
    if (best_d_out) *best_d_out = best_d;
    return best;
}

} // namespace

double oracle_ipm_value(const GridFunctionFamily& family, const std::vector<double>& loads) {
    validate_family(family);
    if (loads.size() != static_cast<std::size_t>(family.intervals) + 1) {
        throw ShapeError("oracle: knot-load vector has wrong length");
    }
    return run_dp(family, loads, nullptr, nullptr, nullptr);
}

OracleResult oracle_ipm(const GridFunctionFamily& family, const WeightedPointCloud& x,
                        const WeightedPointCloud& y) {
    validate_family(family);
    const std::vector<double> loads = knot_weights(family, x, y);
    OracleResult result;
    const GridGeometry g = geometry(family);
    const int nv = 2 * g.vmax + 1;
    const int nd = 2 * g.dmax + 1;
    const int m = family.intervals;

    std::vector<std::int16_t> back;
    int v_end = 0, d_end = 0;
    result.value = run_dp(family, loads, &back, &v_end, &d_end);

    // Walk the backpointers from knot m down to knot 1, then derive knot 0.
    std::vector<int> vidx(static_cast<std::size_t>(m) + 1, 0);
    int v = v_end, d = d_end;
    for (int k = m; k >= 2; --k) {
        vidx[static_cast<std::size_t>(k)] = v;
        const int offset = back[(static_cast<std::size_t>(k) * nv + v) * nd + (d + g.dmax)];
        const int dp = d + offset;
        v -= d;
        d = dp;
    }
    vidx[1] = v;
    vidx[0] = v - d;
    result.coeffs.reserve(vidx.size());
    for (int k = 0; k <= m; ++k) {
        result.coeffs.push_back((vidx[static_cast<std::size_t>(k)] - g.vmax) * family.delta_q);
    }
    return result;
}

MembershipReport verify_holder_membership(const GridFunctionFamily& family,
                                          const std::vector<double>& coeffs) {
    validate_family(family);
    MembershipReport report;
    if (coeffs.size() != static_cast<std::size_t>(family.intervals) + 1) {
        report.ok = false;
        report.detail = "coefficient vector has wrong length";
        return report;
    }
    const double h = interval_step(family);
    const double tol = 1e-9;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        if (std::abs(coeffs[k]) > 1.0 + tol) {
            report.ok = false;
            report.detail = "value bound violated at knot " + std::to_string(k);
            return report;
        }
    }
    for (std::size_t k = 0; k + 1 < coeffs.size(); ++k) {
        if (std::abs(coeffs[k + 1] - coeffs[k]) > h + tol) {
            report.ok = false;
            report.detail = "slope bound violated on interval " + std::to_string(k);
            return report;
        }
    }
    const double holder_cap = std::pow(h, 1.0 + family.beta);
    for (std::size_t k = 0; k + 2 < coeffs.size(); ++k) {
        const double change = std::abs((coeffs[k + 2] - coeffs[k + 1]) - (coeffs[k + 1] - coeffs[k]));
        if (change > holder_cap + tol) {
            report.ok = false;
            report.detail = "derivative Hölder bound violated at knot " + std::to_string(k + 1);
            return report;
        }
    }
    return report;
}

} // namespace mts
