#include "mts/stats.hpp"

#include <cmath>

#include "mts/errors.hpp"

namespace mts {

namespace {

double log_choose(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

} // namespace

double binomial_cdf(std::size_t k, std::size_t n, double p) {
    if (p < 0.0 || p > 1.0) throw DomainError("binomial_cdf: p outside [0,1]");
    if (k >= n) return 1.0;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    const double lp = std::log(p), lq = std::log1p(-p);
    double acc = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        acc += std::exp(log_choose(n, i) + static_cast<double>(i) * lp +
                        static_cast<double>(n - i) * lq);
    }
    return acc < 1.0 ? acc : 1.0;
}

BinomialCI clopper_pearson(std::size_t k, std::size_t n, double confidence) {
    if (n == 0) throw DomainError("clopper_pearson: n == 0");
    if (k > n) throw DomainError("clopper_pearson: k > n");
    if (confidence <= 0.0 || confidence >= 1.0) {
        throw DomainError("clopper_pearson: confidence outside (0,1)");
    }
    const double alpha = 1.0 - confidence;
    BinomialCI ci;
    // lo: smallest p with P(K >= k) >= alpha/2, i.e. solve 1 - CDF(k-1; p) = alpha/2.
    if (k == 0) {
        ci.lo = 0.0;
    } else {
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            const double upper_tail = 1.0 - binomial_cdf(k - 1, n, mid);
            (upper_tail < alpha / 2.0 ? a : b) = mid;
        }
        ci.lo = 0.5 * (a + b);
    }
    // hi: largest p with P(K <= k) >= alpha/2.
    if (k == n) {
        ci.hi = 1.0;
    } else {
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            const double lower_tail = binomial_cdf(k, n, mid);
            (lower_tail > alpha / 2.0 ? a : b) = mid;
        }
        ci.hi = 0.5 * (a + b);
    }
    return ci;
}

std::pair<std::size_t, std::size_t> binomial_acceptance_region(std::size_t n, double p,
                                                               double confidence) {
    const double alpha = 1.0 - confidence;
    std::size_t lo = 0, hi = n;
    while (lo < n && !(binomial_cdf(lo, n, p) > alpha / 2.0)) ++lo;
    while (hi > 0 && !(1.0 - (hi == 0 ? 0.0 : binomial_cdf(hi - 1, n, p)) > alpha / 2.0)) --hi;
    return {lo, hi};
}

} // namespace mts
