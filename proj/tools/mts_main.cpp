// Command-line front end for the manifold two-sample testing toolkit.
//
//   mts run <config>          Monte Carlo risk estimation for each scenario
//   mts power-curve <config>  risk estimates along each scenario's n_grid
//   mts calibrate <config>    null calibration (requires p == q per scenario)
//   mts ot-selftest           exact-transport solver cross-check
//
// Exit codes: 0 success, 2 malformed config, 3 internal/self-check failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mts/harness.hpp"

namespace {

std::string default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(mts::kOutDirEnvVar); env && *env) return env;
    return "out";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"manifold two-sample testing harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    int threads = 0;
    bool seed_set = false, trials_set = false, threads_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "scenario config file")->required();
        cmd->add_option("--out", out_dir, "output directory (default: $" +
                                              std::string(mts::kOutDirEnvVar) + " or ./out)");
        cmd->add_option("--seed", seed, "override master_seed for every scenario")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--trials", trials, "override trial count for every scenario")
            ->each([&](const std::string&) { trials_set = true; });
        cmd->add_option("--threads", threads, "override worker thread count")
            ->each([&](const std::string&) { threads_set = true; });
    };

    auto* run_cmd = app.add_subcommand("run", "estimate rejection rates for each scenario");
    add_common(run_cmd);
    auto* power_cmd = app.add_subcommand("power-curve", "risk estimates along n_grid");
    add_common(power_cmd);
    auto* calibrate_cmd = app.add_subcommand("calibrate", "null calibration (p must equal q)");
    add_common(calibrate_cmd);

    auto* selftest_cmd = app.add_subcommand("ot-selftest", "transport solver cross-check");
    std::size_t instances = 1000;
    std::uint64_t selftest_seed = 2026;
    selftest_cmd->add_option("--instances", instances, "number of random instances");
    selftest_cmd->add_option("--seed", selftest_seed, "instance generator seed");

    CLI11_PARSE(app, argc, argv);

    if (selftest_cmd->parsed()) {
        return mts::ot_selftest(instances, selftest_seed, std::cout) ? 0 : 3;
    }

    mts::Overrides overrides;
    if (seed_set) overrides.seed = seed;
    if (trials_set) overrides.trials = trials;
    if (threads_set) overrides.threads = threads;

    mts::RunMode mode = mts::RunMode::Run;
    if (power_cmd->parsed()) mode = mts::RunMode::PowerCurve;
    if (calibrate_cmd->parsed()) mode = mts::RunMode::Calibrate;

    return mts::run_config(config_path, default_out_dir(out_dir), mode, overrides, std::cout);
}
