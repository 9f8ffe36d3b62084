#include "mts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "mts/errors.hpp"
#include "mts/rng.hpp"

namespace mts {

const char* const kCsvHeader =
    "scenario,test,n,eta,trials,rejections,rate,ci_lo,ci_hi,mean_stat,mean_threshold,seed";
const char* const kOutDirEnvVar = "MTS_OUT_DIR";

void validate_scenario(const Scenario& scenario) {
    if (scenario.name.empty()) throw ConfigError("scenario: empty name");
    if (scenario.test != "two-step" && scenario.test != "holder" && scenario.test != "nn") {
        throw ConfigError("scenario '" + scenario.name + "': unknown test '" + scenario.test + "'");
    }
    if (scenario.n < 2) throw ConfigError("scenario '" + scenario.name + "': n must be >= 2");
    if (scenario.trials < 1) {
        throw ConfigError("scenario '" + scenario.name + "': trials must be >= 1");
    }
    if (!(scenario.eta > 0.0 && scenario.eta < 0.5)) {
        throw ConfigError("scenario '" + scenario.name + "': eta must lie in (0, 1/2)");
    }
    if (scenario.threads < 1) {
        throw ConfigError("scenario '" + scenario.name + "': threads must be >= 1");
    }
    for (std::size_t i = 1; i < scenario.n_grid.size(); ++i) {
        if (scenario.n_grid[i] <= scenario.n_grid[i - 1]) {
            throw ConfigError("scenario '" + scenario.name + "': n_grid must be strictly increasing");
        }
    }
    validate_spec(scenario.p);
    validate_spec(scenario.q);
    try {
        validate_train_config(scenario.train);
    } catch (const Error& e) {
        throw ConfigError("scenario '" + scenario.name + "': " + e.what());
    }
}

namespace {

TestReport run_single_trial(const Scenario& scenario, const Atlas& atlas, std::size_t trial) {
    const std::uint64_t trial_seed = rng::derive_seed(scenario.master_seed, trial);
    const Sample x = sample_distribution(scenario.p, scenario.n, rng::derive_seed(trial_seed, 1));
    const Sample y = sample_distribution(scenario.q, scenario.n, rng::derive_seed(trial_seed, 2));

    ThresholdSpec threshold = scenario.threshold;
    threshold.seed = rng::derive_seed(trial_seed, 3);
    TrainConfig train = scenario.train;
    train.seed = rng::derive_seed(trial_seed, 4);

    if (scenario.test == "two-step") {
        return two_step_test(atlas, x, y, scenario.eta, threshold);
    }
    if (scenario.test == "holder") {
        const auto* circle = dynamic_cast<const CircleAtlas*>(&atlas);
        if (!circle) {
            throw ConfigError("scenario '" + scenario.name +
                              "': the holder test requires a circle manifold");
        }
        return holder_test(*circle, x, y, scenario.eta, scenario.s, scenario.beta, threshold,
                           scenario.use_oracle, nullptr, &train);
    }
    return nn_test(x, y, scenario.eta, scenario.s, scenario.beta,
                   scenario.manifold.intrinsic_dim, threshold, train);
}

} // namespace

RiskEstimate estimate_risks(const Scenario& scenario, std::vector<TestReport>* reports) {
    validate_scenario(scenario);
    const auto atlas = build_atlas(scenario.manifold);

    std::vector<TestReport> all(scenario.trials);
    const int threads = std::max(1, std::min<int>(scenario.threads,
                                                  static_cast<int>(scenario.trials)));
    if (threads == 1) {
        for (std::size_t i = 0; i < scenario.trials; ++i) {
            all[i] = run_single_trial(scenario, *atlas, i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::string error_message;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= scenario.trials || failed.load()) return;
                try {
                    all[i] = run_single_trial(scenario, *atlas, i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    failed.store(true);
                    if (error_message.empty()) error_message = e.what();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (failed.load()) throw Error("estimate_risks: " + error_message);
    }

    RiskEstimate est;
    est.trials = scenario.trials;
    double stat_sum = 0.0, thr_sum = 0.0;
    for (const auto& r : all) {
        if (r.reject) ++est.rejections;
        if (r.test == "two-step") {
            stat_sum += r.step2.statistic;
            thr_sum += r.step2.threshold;
        } else {
            stat_sum += r.statistic;
            thr_sum += r.threshold;
        }
    }
    est.rejection_rate =
        static_cast<double>(est.rejections) / static_cast<double>(est.trials);
    const BinomialCI ci = clopper_pearson(est.rejections, est.trials, 0.95);
    est.ci_lo = ci.lo;
    est.ci_hi = ci.hi;
    est.mean_stat = stat_sum / static_cast<double>(est.trials);
    est.mean_threshold = thr_sum / static_cast<double>(est.trials);
    if (reports) {
        reports->insert(reports->end(), std::make_move_iterator(all.begin()),
                        std::make_move_iterator(all.end()));
    }
    return est;
}

std::vector<std::pair<std::size_t, RiskEstimate>> power_curve(
    const Scenario& scenario, const std::vector<std::size_t>& grid) {
    if (grid.empty()) throw ConfigError("power_curve: empty sample-size grid");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1]) {
            throw ConfigError("power_curve: grid must be strictly increasing");
        }
    }
    std::vector<std::pair<std::size_t, RiskEstimate>> out;
    out.reserve(grid.size());
    for (std::size_t n : grid) {
        Scenario point = scenario;
        point.n = n;
        point.n_grid.clear();
        out.emplace_back(n, estimate_risks(point));
    }
    return out;
}

// ----------------------------------------------------------------- config ---

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void config_fail(const std::string& origin, std::size_t line,
                              const std::string& message) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& origin, std::size_t line, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        config_fail(origin, line, "expected a number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& origin, std::size_t line, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        config_fail(origin, line, "expected a non-negative integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& origin, std::size_t line, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    config_fail(origin, line, "expected a boolean, got '" + v + "'");
}

// Distribution value: family token followed by key=value parameters, e.g.
//   uniform
//   von-mises kappa=2 mu=1.5708
//   bump amplitude=0.1 center=0 width=1
DistributionSpec parse_distribution(const std::string& origin, std::size_t line,
                                    const std::string& value, const ManifoldDescriptor& manifold) {
    std::istringstream in(value);
    std::string family;
    in >> family;
    DistributionSpec spec;
    spec.manifold = manifold;
    if (family == "uniform") {
        spec.family = manifold.kind == ManifoldKind::Sphere ? DistFamily::UniformSphere
                                                            : DistFamily::UniformCircle;
    } else if (family == "von-mises") {
        spec.family = DistFamily::VonMisesCircle;
    } else if (family == "bump") {
        spec.family = DistFamily::BumpPerturbedCircle;
    } else {
        config_fail(origin, line, "unknown distribution family '" + family + "'");
    }
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            config_fail(origin, line, "malformed distribution parameter '" + token + "'");
        }
        const std::string key = token.substr(0, eq);
        const double v = parse_double(origin, line, token.substr(eq + 1));
        if (key == "kappa") {
            spec.kappa = v;
        } else if (key == "mu") {
            spec.mu = v;
        } else if (key == "amplitude") {
            spec.amplitude = v;
        } else if (key == "center") {
            spec.center = v;
        } else if (key == "width") {
            spec.width = v;
        } else {
            config_fail(origin, line, "unknown distribution parameter '" + key + "'");
        }
    }
    return spec;
}

struct RawScenario {
    std::string name;
    std::vector<std::tuple<std::size_t, std::string, std::string>> entries; // line, key, value
};

Scenario materialize(const std::string& origin, const RawScenario& raw) {
    Scenario s;
    s.name = raw.name;
    // Manifold keys are applied first so distribution lines can refer to the
    // final descriptor regardless of key order.
    std::string manifold_kind = "circle";
    int ambient_dim = 0;
    std::uint64_t rotation_seed = 0;
    for (const auto& [line, key, value] : raw.entries) {
        if (key == "manifold") {
            if (value != "circle" && value != "sphere") {
                config_fail(origin, line, "manifold must be 'circle' or 'sphere'");
            }
            manifold_kind = value;
        } else if (key == "ambient_dim") {
            ambient_dim = static_cast<int>(parse_u64(origin, line, value));
        } else if (key == "rotation_seed") {
            rotation_seed = parse_u64(origin, line, value);
        }
    }
    if (manifold_kind == "circle") {
        s.manifold.kind = ManifoldKind::Circle;
        s.manifold.intrinsic_dim = 1;
        s.manifold.ambient_dim = ambient_dim > 0 ? ambient_dim : 2;
    } else {
        s.manifold.kind = ManifoldKind::Sphere;
        s.manifold.intrinsic_dim = 2;
        s.manifold.ambient_dim = ambient_dim > 0 ? ambient_dim : 3;
    }
    s.manifold.rotation_seed = rotation_seed;

    bool have_p = false, have_q = false;
    for (const auto& [line, key, value] : raw.entries) {
        if (key == "manifold" || key == "ambient_dim" || key == "rotation_seed") continue;
        if (key == "p") {
            s.p = parse_distribution(origin, line, value, s.manifold);
            have_p = true;
        } else if (key == "q") {
            s.q = parse_distribution(origin, line, value, s.manifold);
            have_q = true;
        } else if (key == "test") {
            s.test = value;
        } else if (key == "threshold") {
            if (value == "analytic") {
                s.threshold.mode = ThresholdMode::Analytic;
            } else if (value == "bootstrap") {
                s.threshold.mode = ThresholdMode::Bootstrap;
            } else {
                config_fail(origin, line, "threshold must be 'analytic' or 'bootstrap'");
            }
        } else if (key == "n") {
            s.n = parse_u64(origin, line, value);
        } else if (key == "eta") {
            s.eta = parse_double(origin, line, value);
        } else if (key == "trials") {
            s.trials = parse_u64(origin, line, value);
        } else if (key == "n_boot") {
            s.threshold.n_boot = static_cast<int>(parse_u64(origin, line, value));
        } else if (key == "master_seed") {
            s.master_seed = parse_u64(origin, line, value);
        } else if (key == "c1") {
            s.threshold.c1 = parse_double(origin, line, value);
        } else if (key == "c2") {
            s.threshold.c2 = parse_double(origin, line, value);
        } else if (key == "s") {
            s.s = parse_double(origin, line, value);
        } else if (key == "beta") {
            s.beta = parse_double(origin, line, value);
        } else if (key == "use_oracle") {
            s.use_oracle = parse_bool(origin, line, value);
        } else if (key == "train_steps") {
            s.train.steps = static_cast<int>(parse_u64(origin, line, value));
        } else if (key == "train_step_size") {
            s.train.step_size = parse_double(origin, line, value);
        } else if (key == "train_projection_period") {
            s.train.projection_period = static_cast<int>(parse_u64(origin, line, value));
        } else if (key == "train_init_scale") {
            s.train.init_scale = parse_double(origin, line, value);
        } else if (key == "train_decay") {
            s.train.decay = parse_double(origin, line, value);
        } else if (key == "train_restarts") {
            s.train.restarts = static_cast<int>(parse_u64(origin, line, value));
        } else if (key == "n_grid") {
            std::istringstream in(value);
            std::string item;
            while (std::getline(in, item, ',')) {
                s.n_grid.push_back(parse_u64(origin, line, trim(item)));
            }
        } else if (key == "threads") {
            s.threads = static_cast<int>(parse_u64(origin, line, value));
        } else {
            config_fail(origin, line, "unknown key '" + key + "'");
        }
    }
    if (!have_p || !have_q) {
        throw ConfigError(origin + ": scenario '" + raw.name + "' must define both p and q");
    }
    validate_scenario(s);
    return s;
}

} // namespace

std::vector<Scenario> parse_config_text(const std::string& text, const std::string& origin) {
    std::vector<RawScenario> raw;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') config_fail(origin, lineno, "unterminated section header");
            std::istringstream header(line.substr(1, line.size() - 2));
            std::string kind, name;
            header >> kind >> name;
            if (kind != "scenario" || name.empty()) {
                config_fail(origin, lineno, "section header must be [scenario NAME]");
            }
            for (const auto& r : raw) {
                if (r.name == name) config_fail(origin, lineno, "duplicate scenario '" + name + "'");
            }
            raw.push_back(RawScenario{name, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) config_fail(origin, lineno, "expected 'key = value'");
        if (raw.empty()) config_fail(origin, lineno, "key outside of a [scenario ...] section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) config_fail(origin, lineno, "empty key or value");
        raw.back().entries.emplace_back(lineno, key, value);
    }
    if (raw.empty()) throw ConfigError(origin + ": no scenarios defined");
    std::vector<Scenario> scenarios;
    scenarios.reserve(raw.size());
    for (const auto& r : raw) scenarios.push_back(materialize(origin, r));
    return scenarios;
}

std::vector<Scenario> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

// -------------------------------------------------------------------- csv ---

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_csv_header(std::ostream& os) { os << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& os, const Scenario& scenario, std::size_t n,
                   const RiskEstimate& estimate) {
    os << scenario.name << ',' << scenario.test << ',' << n << ',' << fmt17(scenario.eta) << ','
       << estimate.trials << ',' << estimate.rejections << ',' << fmt17(estimate.rejection_rate)
       << ',' << fmt17(estimate.ci_lo) << ',' << fmt17(estimate.ci_hi) << ','
       << fmt17(estimate.mean_stat) << ',' << fmt17(estimate.mean_threshold) << ','
       << scenario.master_seed << '\n';
}

// -------------------------------------------------------------- run modes ---

namespace {

bool same_distribution(const DistributionSpec& a, const DistributionSpec& b) {
    return a.family == b.family && a.manifold.kind == b.manifold.kind &&
           a.manifold.ambient_dim == b.manifold.ambient_dim &&
           a.manifold.rotation_seed == b.manifold.rotation_seed && a.kappa == b.kappa &&
           a.mu == b.mu && a.amplitude == b.amplitude && a.center == b.center &&
           a.width == b.width;
}

nlohmann::json estimate_json(const RiskEstimate& e) {
    return nlohmann::json{{"trials", e.trials},
                          {"rejections", e.rejections},
                          {"rate", e.rejection_rate},
                          {"ci_lo", e.ci_lo},
                          {"ci_hi", e.ci_hi},
                          {"mean_stat", e.mean_stat},
                          {"mean_threshold", e.mean_threshold}};
}

} // namespace

int run_config(const std::string& config_path, const std::string& out_dir, RunMode mode,
               const Overrides& overrides, std::ostream& log) {
    std::vector<Scenario> scenarios;
    try {
        scenarios = parse_config_file(config_path);
        for (auto& s : scenarios) {
            if (overrides.seed) s.master_seed = *overrides.seed;
            if (overrides.trials) s.trials = *overrides.trials;
            if (overrides.threads) s.threads = *overrides.threads;
            if (mode == RunMode::Calibrate && !same_distribution(s.p, s.q)) {
                throw ConfigError("scenario '" + s.name +
                                  "': calibration requires p and q to coincide");
            }
            if (mode == RunMode::PowerCurve && s.n_grid.empty()) {
                throw ConfigError("scenario '" + s.name + "': power-curve mode needs n_grid");
            }
        }
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        std::filesystem::create_directories(out_dir);
        for (const auto& s : scenarios) {
            nlohmann::json doc{{"scenario", s.name},
                               {"test", s.test},
                               {"eta", s.eta},
                               {"seed", s.master_seed},
                               {"mode", s.threshold.mode == ThresholdMode::Analytic
                                            ? "analytic"
                                            : "bootstrap"}};
            std::ofstream csv(std::filesystem::path(out_dir) / (s.name + ".csv"));
            write_csv_header(csv);
            if (mode == RunMode::PowerCurve) {
                const auto curve = power_curve(s, s.n_grid);
                nlohmann::json points = nlohmann::json::array();
                for (const auto& [n, est] : curve) {
                    write_csv_row(csv, s, n, est);
                    points.push_back({{"n", n}, {"estimate", estimate_json(est)}});
                }
                doc["points"] = points;
            } else {
                std::vector<TestReport> reports;
                const RiskEstimate est = estimate_risks(s, &reports);
                write_csv_row(csv, s, s.n, est);
                doc["n"] = s.n;
                doc["estimate"] = estimate_json(est);
                nlohmann::json rj = nlohmann::json::array();
                for (const auto& r : reports) rj.push_back(r.to_json());
                doc["reports"] = rj;
            }
            std::ofstream json_out(std::filesystem::path(out_dir) / (s.name + ".json"));
            json_out << doc.dump(2) << '\n';
            log << s.name << ": done\n";
        }
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "internal failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------- selftest ---

bool ot_selftest(std::size_t instances, std::uint64_t seed, std::ostream& log) {
    rng::Stream stream(seed);
    std::size_t failures = 0;
    double max_gap = 0.0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t n = 2 + stream.uniform_index(6); // 2..7
        const std::size_t dim = 1 + stream.uniform_index(3);
        std::vector<Vec> xs(n), ys(n);
        for (auto& p : xs) {
            p.resize(dim);
            for (auto& c : p) c = stream.uniform(-1.0, 1.0);
        }
        for (auto& p : ys) {
            p.resize(dim);
            for (auto& c : p) c = stream.uniform(-1.0, 1.0);
        }
        WeightedPointCloud cx, cy;
        cx.points = xs;
        cy.points = ys;
        cx.weights.assign(n, make_rational(1, static_cast<std::int64_t>(n)));
        cy.weights.assign(n, make_rational(1, static_cast<std::int64_t>(n)));

        const double solver = wasserstein1(cx, cy).first;
        const double oracle = assignment_oracle(xs, ys);
        // Equal-size uniform clouds: an optimal plan can be taken to be a
        // permutation (flow integrality), so the matching oracle value equals
        // the transport cost.
        const double gap = std::abs(solver - oracle) / std::max(1.0, std::abs(oracle));
        max_gap = std::max(max_gap, gap);
        if (gap > 1e-9) {
            ++failures;
            if (failures <= 5) {
                log << "instance " << inst << " (n=" << n << ", dim=" << dim
                    << "): solver=" << solver << " oracle=" << oracle << '\n';
            }
        }
    }
    log << "transport self-check: " << (instances - failures) << "/" << instances
        << " instances agree (max relative gap " << max_gap << ")\n";
    return failures == 0;
}

} // namespace mts
