#pragma once

#include <cstddef>
#include <utility>

namespace mts {

struct BinomialCI {
    double lo = 0.0;
    double hi = 1.0;
};

// Exact (Clopper-Pearson) two-sided binomial confidence interval for k
// successes out of n trials at the given confidence (e.g. 0.95).
// k == 0 pins lo to 0; k == n pins hi to 1.
BinomialCI clopper_pearson(std::size_t k, std::size_t n, double confidence);

// Exact binomial CDF P(K <= k) for K ~ Binomial(n, p), computed with
// log-binomial terms for stability.
double binomial_cdf(std::size_t k, std::size_t n, double p);

// Smallest two-sided acceptance region {k_lo, ..., k_hi} for an exact level
// binomial test: k is accepted iff P(K <= k) > alpha/2 and P(K >= k) > alpha/2
// where alpha = 1 - confidence.
std::pair<std::size_t, std::size_t> binomial_acceptance_region(std::size_t n, double p,
                                                               double confidence);

} // namespace mts
