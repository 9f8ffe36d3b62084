#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mts/stats.hpp"
#include "mts/testkit.hpp"

namespace mts {

// One Monte Carlo experiment: a pair of distributions on a shared manifold,
// a test procedure, and a trial budget. Trials are independently seeded from
// master_seed (trial i uses derive_seed(master_seed, i)), so results do not
// depend on execution order or thread count.
struct Scenario {
    std::string name = "scenario";
    ManifoldDescriptor manifold;
    DistributionSpec p, q;
    std::string test = "two-step"; // "two-step" | "holder" | "nn"
    ThresholdSpec threshold;
    std::size_t n = 100;
    double eta = 0.05;
    std::size_t trials = 1;
    std::uint64_t master_seed = 0;
    double s = 1.0, beta = 1.0;
    bool use_oracle = true; // holder statistic choice
    TrainConfig train;      // nn / holder-surrogate training configuration
    std::vector<std::size_t> n_grid; // power-curve grid (strictly increasing)
    int threads = 1;
};

void validate_scenario(const Scenario& scenario);

struct RiskEstimate {
    std::size_t trials = 0;
    std::size_t rejections = 0;
    double rejection_rate = 0.0;
    double ci_lo = 0.0; // exact 95% binomial interval
    double ci_hi = 1.0;
    double mean_stat = 0.0;      // two-step: projected-transport statistic
    double mean_threshold = 0.0; // two-step: its threshold
};

// Runs scenario.trials independent draws of (X, Y) and the configured test.
// Per-trial reports are appended to `reports` when provided (ordered by trial
// index regardless of thread count).
RiskEstimate estimate_risks(const Scenario& scenario, std::vector<TestReport>* reports = nullptr);

// Risk estimates along a strictly increasing sample-size grid (scenario.n is
// replaced by each grid value; everything else is shared).
std::vector<std::pair<std::size_t, RiskEstimate>> power_curve(
    const Scenario& scenario, const std::vector<std::size_t>& grid);

// Sectioned key = value scenario files ([scenario NAME] headers; '#' starts a
// comment). Throws ConfigError with a line-numbered message on malformed
// input or unknown keys.
std::vector<Scenario> parse_config_file(const std::string& path);
std::vector<Scenario> parse_config_text(const std::string& text, const std::string& origin);

// CSV emission. The header line and 17-significant-digit number format are
// part of the output contract; identical scenarios and seeds produce
// byte-identical files.
extern const char* const kCsvHeader;
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const Scenario& scenario, std::size_t n,
                   const RiskEstimate& estimate);

enum class RunMode { Run, PowerCurve, Calibrate };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<int> threads;
};

// Environment variable consulted for the default output directory.
extern const char* const kOutDirEnvVar;

// Executes every scenario in the config and writes <name>.csv plus
// <name>.json under out_dir. Calibrate mode additionally requires p == q in
// every scenario. Returns a process exit code: 0 success, 2 config error,
// 3 internal failure.
int run_config(const std::string& config_path, const std::string& out_dir, RunMode mode,
               const Overrides& overrides, std::ostream& log);

// Built-in exact-transport self-check: random small instances are solved by
// both the flow solver and the independent subset-DP matching oracle, plus
// sorted-coupling cross-checks in one dimension. Returns true when every
// instance agrees within tolerance; details go to `log`.
bool ot_selftest(std::size_t instances, std::uint64_t seed, std::ostream& log);

} // namespace mts
