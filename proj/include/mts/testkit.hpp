#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "mts/critic.hpp"
#include "mts/holder.hpp"
#include "mts/manifold.hpp"
#include "mts/transport.hpp"

namespace mts {

// Significance levels live in the open interval (0, 1/2); LevelError outside.
void validate_level(double eta);

// Occupancy-divergence threshold sqrt(2/n) * (1 + sqrt(2 ln(1/eta))).
double threshold_step1(std::size_t n, double eta);

// Projected-transport threshold with caller-supplied constants c1 >= 1,
// c2 > 0. Piecewise in n: below n0 = ln(c1/eta)/c2 the raw concentration
// bound ln(c1/eta)/(c2 n) applies (value >= 1 there); at or above n0 the
// bound decays as (ln(c1/eta)/(c2 n))^(1/max{d,3}). Non-increasing in n.
double threshold_step2(std::size_t n, double eta, double c1, double c2, int d);

// Analytic threshold for the smoothness-ball discrepancy test:
//   c1 * n^{-(s+beta)/d} + sqrt(4 ln(2/eta)) * n^{-1/2}.
double holder_ipm_threshold(std::size_t n, double eta, double s, double beta, int d, double c1);

// Analytic threshold for the network discrepancy test:
//   c1 * n^{-(s+beta)/(2(s+beta)+d)} * (ln n)^2 + sqrt(4 ln(2/eta)) * n^{-1/2}.
double nn_ipm_threshold(std::size_t n, double eta, double s, double beta, int d, double c1);

enum class ThresholdMode { Analytic, Bootstrap };

struct ThresholdSpec {
    ThresholdMode mode = ThresholdMode::Analytic;
    double c1 = 1.0; // analytic constants (unit constants by default)
    double c2 = 1.0;
    int n_boot = 200;       // bootstrap replicates, >= 50
    std::uint64_t seed = 0; // bootstrap resampling seed
};

// 1-based order-statistic index used for the bootstrap threshold: smallest k
// with k / n_boot >= 1 - eta.
std::size_t bootstrap_quantile_index(int n_boot, double eta);

struct BootstrapResult {
    double threshold = 0.0;
    bool degenerate = false; // all pooled points identical
};

// Pooled-with-replacement bootstrap threshold for an arbitrary two-sample
// statistic: pools x and y, draws |x| + |y| indices per replicate, evaluates
// the statistic on the resampled pair, and returns the (1 - eta) empirical
// quantile of the replicates (inf-definition above). Replicate b uses the
// deterministic stream derive_seed(seed, b).
BootstrapResult bootstrap_threshold(
    const std::function<double(const Sample&, const Sample&)>& statistic, const Sample& x,
    const Sample& y, double eta, int n_boot, std::uint64_t seed);

enum class StepDecision { Accept, Reject, Skipped };

struct StepReport {
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
    StepDecision decision = StepDecision::Skipped;
};

struct TestReport {
    std::string test;           // "two-step" | "holder" | "nn"
    std::size_t n = 0;          // per-side sample size
    double eta = 0.0;
    ThresholdMode mode = ThresholdMode::Analytic;
    bool reject = false;
    // Two-step breakdown. Both statistics are always computed and reported;
    // the second-step decision is marked Skipped when step one already
    // rejected. Scalar-statistic tests fill `statistic` / `threshold` instead.
    StepReport step1, step2;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
    bool degenerate_bootstrap = false;
    std::uint64_t seed = 0;      // bootstrap / training seed
    double wall_seconds = 0.0;   // timing only; not part of the deterministic contract

    nlohmann::json to_json() const;
};

// Two-step atlas test at level eta (each step runs at eta/2). Requires equal
// sample sizes. Analytic mode uses threshold_step1/threshold_step2 with the
// constants carried in `spec`; bootstrap mode derives both step thresholds from the same
// pooled resamples (chart masses and chart pushforwards are recomputed per
// resample). Rejection at equality (statistic >= threshold).
TestReport two_step_test(const Atlas& atlas, const Sample& x, const Sample& y, double eta,
                         const ThresholdSpec& spec);

// Smoothness-ball discrepancy test on the canonical circle angle chart.
// use_oracle = true evaluates the certified grid-family oracle (family
// defaults to canonical_circle_family(beta)); use_oracle = false falls back
// to the trained-network surrogate statistic under the same threshold.
TestReport holder_test(const CircleAtlas& atlas, const Sample& x, const Sample& y, double eta,
                       double s, double beta, const ThresholdSpec& spec, bool use_oracle = true,
                       const GridFunctionFamily* family = nullptr,
                       const TrainConfig* surrogate_cfg = nullptr);

// Network discrepancy test. The architecture defaults to
// hyperparams_from_theory (using descriptor bounds from x.spec when present);
// bootstrap mode retrains with the same TrainConfig on every resample.
TestReport nn_test(const Sample& x, const Sample& y, double eta, double s, double beta, int d,
                   const ThresholdSpec& spec, const TrainConfig& cfg,
                   const CriticArchitecture* arch = nullptr);

} // namespace mts
