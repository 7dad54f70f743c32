#include "tdsim/certify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tdsim/io.hpp"
#include "tdsim/krasovskii.hpp"
#include "tdsim/rfde.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/sampling.hpp"

namespace tdsim {

namespace {

using nlohmann::json;

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), count);
    if (workers < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

template <typename T>
T require_field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing config field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid config field: " + key);
    }
}

template <typename T>
T optional_field(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid config field: " + key);
    }
}

// Everything the pass/fail decision needs from one sampled run.
struct TrialMetrics {
    std::uint64_t seed = 0;
    bool diverged = false;
    double blowup_time = 0.0;
    bool entered = false;
    double entry_time = 0.0;
    double last_violation = 0.0;
    double e_bound = 0.0;
};

// Sup-norm bookkeeping for the stacked pair [x_t; xhat_{t_j}] over all
// window positions. The pairwise sup over (t, t_j) is bounded from above
// by hypot(sup_t, sup_tj) of the separate suffix maxima; certification
// uses that bound, which is at least as strict as checking any finite
// grid of pairs.
struct TrialEvaluator {
    const SampledRun& run;
    std::vector<double> abs_times;   // initial knots then record times
    std::vector<double> plant_sfx;   // suffix max of |x| over abs_times
    std::vector<double> obs_sup;     // reconstruction sup-norm per instant
    std::vector<double> obs_sfx;

    explicit TrialEvaluator(const SampledRun& r) : run(r) {
        const auto& init = run.plant.initial();
        const auto& times = run.plant.times();
        std::vector<double> norms;
        for (std::size_t i = 0; i + 1 < init.knots().size(); ++i) {
            abs_times.push_back(init.knots()[i]);
            norms.push_back(init.values().col(static_cast<Eigen::Index>(i)).norm());
        }
        for (std::size_t i = 0; i < times.size(); ++i) {
            abs_times.push_back(times[i]);
            norms.push_back(run.plant.states().col(static_cast<Eigen::Index>(i)).norm());
        }
        plant_sfx.assign(norms.size() + 1, 0.0);
        for (std::size_t i = norms.size(); i-- > 0;)
            plant_sfx[i] = std::max(norms[i], plant_sfx[i + 1]);

        obs_sup.reserve(run.observer_times.size());
        for (const double tj : run.observer_times)
            obs_sup.push_back(reconstruct_observer_history(run, tj).sup_norm());
        obs_sfx.assign(obs_sup.size() + 1, 0.0);
        for (std::size_t j = obs_sup.size(); j-- > 0;)
            obs_sfx[j] = std::max(obs_sup[j], obs_sfx[j + 1]);
    }

    // sup over t >= T of the plant window norm == sup over s >= T - delay
    double plant_tail(double t_from) const {
        const double cut = std::max(t_from - run.plant.delay(), -run.plant.delay());
        const auto it = std::lower_bound(abs_times.begin(), abs_times.end(), cut);
        double tail = plant_sfx[static_cast<std::size_t>(it - abs_times.begin())];
        tail = std::max(tail, run.plant.value_at(cut).norm());
        return tail;
    }

    double observer_tail(double t_from) const {
        const auto it =
            std::lower_bound(run.observer_times.begin(), run.observer_times.end(), t_from);
        return obs_sfx[static_cast<std::size_t>(it - run.observer_times.begin())];
    }

    double stacked_bound() const { return std::hypot(plant_sfx[0], obs_sfx[0]); }
};

TrialMetrics evaluate_trial(const ModelPair& model, const ScenarioConfig& cfg, double delta,
                            std::size_t trial) {
    TrialMetrics m;
    m.seed = derive_seed(cfg.seed, 3 * trial);
    const double component_radius = cfg.initial_radius / std::sqrt(2.0);
    const Segment x0 = sample_initial_state(component_radius, cfg.q_tilde, model.delay,
                                            model.state_dim, m.seed);
    const Segment xhat0 = sample_initial_state(component_radius, cfg.q_tilde, model.delay,
                                               model.state_dim, derive_seed(cfg.seed, 3 * trial + 1));
    const Partition partition =
        generate_partition(cfg.a, delta, cfg.horizon, derive_seed(cfg.seed, 3 * trial + 2));

    SampledOptions opts;
    opts.substeps = cfg.substeps;
    opts.q_tilde = cfg.q_tilde;
    try {
        const SampledRun run = simulate_sampled(model, x0, xhat0, partition, opts);
        const TrialEvaluator ev(run);
        m.e_bound = ev.stacked_bound();
        const double spacing = delta / 4.0;
        const auto grid_count = static_cast<std::size_t>(std::floor(cfg.horizon / spacing)) + 1;
        m.last_violation = cfg.horizon;
        for (std::size_t g = 0; g < grid_count; ++g) {
            const double t = std::min(static_cast<double>(g) * spacing, cfg.horizon);
            const double bound = std::hypot(ev.plant_tail(t), ev.observer_tail(t));
            if (bound <= cfg.target_radius) {
                m.entered = true;
                m.entry_time = t;
                break;  // tails are non-increasing in t, so the bound stays below r
            }
            m.last_violation = t;
        }
    } catch (const DivergenceError& err) {
        m.diverged = true;
        m.blowup_time = err.time;
    }
    return m;
}

bool trial_passed(const TrialMetrics& m, const ScenarioConfig& cfg) {
    return !m.diverged && m.entered && m.entry_time <= 0.8 * cfg.horizon;
}

void validate_scenario(const ScenarioConfig& cfg) {
    if (!(cfg.target_radius > 0.0) || !(cfg.initial_radius > cfg.target_radius))
        throw ConfigError("invalid config field: r (require 0 < r < R)");
    if (!(cfg.a > 0.0) || cfg.a > 1.0) throw ConfigError("invalid config field: a (need (0,1])");
    if (!(cfg.horizon > 0.0)) throw ConfigError("invalid config field: horizon");
    if (cfg.trials < 1) throw ConfigError("invalid config field: trials");
    if (cfg.substeps < 1) throw ConfigError("invalid config field: substeps");
    if (!(cfg.q_tilde > 0.0)) throw ConfigError("invalid config field: q_tilde");
    if (cfg.delta_search) {
        if (!(cfg.delta_search->delta_min > 0.0) ||
            !(cfg.delta_search->delta_min < cfg.delta_search->delta_max))
            throw ConfigError("invalid config field: delta_search (need 0 < delta_min < delta_max)");
        if (cfg.delta_search->bisection_steps < 0)
            throw ConfigError("invalid config field: delta_search.bisection_steps");
    }
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ScenarioConfig cfg;
    if (!j.contains("model")) throw ConfigError("missing config field: model");
    const json& jm = j.at("model");
    cfg.model_name = require_field<std::string>(jm, "name");
    if (jm.contains("params")) {
        for (const auto& [key, value] : jm.at("params").items()) {
            if (!value.is_number()) throw ConfigError("invalid config field: model.params." + key);
            cfg.model_params[key] = value.get<double>();
        }
    }
    cfg.initial_radius = require_field<double>(j, "R");
    cfg.target_radius = require_field<double>(j, "r");
    cfg.a = require_field<double>(j, "a");
    cfg.horizon = require_field<double>(j, "horizon");
    cfg.seed = optional_field<std::uint64_t>(j, "seed", 0);
    cfg.q_tilde = optional_field<double>(j, "q_tilde", 1.0);
    cfg.trials = optional_field<int>(j, "trials", 20);
    cfg.substeps = optional_field<int>(j, "substeps", 16);
    cfg.lkf_samples = optional_field<int>(j, "lkf_samples", 1000);
    cfg.lkf_sup_norm = optional_field<double>(j, "lkf_sup_norm", 2.0);
    if (j.contains("delta_search")) {
        const json& s = j.at("delta_search");
        DeltaSearch ds;
        ds.delta_max = require_field<double>(s, "delta_max");
        ds.delta_min = require_field<double>(s, "delta_min");
        ds.bisection_steps = optional_field<int>(s, "bisection_steps", 6);
        cfg.delta_search = ds;
    }
    if (j.contains("delta_grid"))
        cfg.delta_grid = require_field<std::vector<double>>(j, "delta_grid");
    if (j.contains("delta")) cfg.delta = require_field<double>(j, "delta");
    validate_scenario(cfg);
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_config(ss.str());
}

StabilityReport certify_practical_stability(const ScenarioConfig& cfg) {
    validate_scenario(cfg);
    if (!cfg.delta_search) throw ConfigError("missing config field: delta_search");
    const ModelPair model = make_benchmark(cfg.model_name, cfg.model_params).model;

    StabilityReport report;
    report.trials = cfg.trials;

    std::vector<TrialMetrics> metrics(static_cast<std::size_t>(cfg.trials));
    auto eval_delta = [&](double delta) {
        parallel_for(metrics.size(), [&](std::size_t i) {
            metrics[i] = evaluate_trial(model, cfg, delta, i);
        });
        bool all = true;
        for (const auto& m : metrics) all = all && trial_passed(m, cfg);
        report.tested.push_back({delta, all});
        return all;
    };
    auto fill_passing = [&]() {
        report.e_hat = 0.0;
        report.t_hat = 0.0;
        for (const auto& m : metrics) {
            report.e_hat = std::max(report.e_hat, m.e_bound);
            report.t_hat = std::max(report.t_hat, m.entry_time);
        }
    };
    auto fill_failures = [&]() {
        report.failures.clear();
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            const auto& m = metrics[i];
            if (trial_passed(m, cfg)) continue;
            report.failures.push_back({static_cast<int>(i), m.seed,
                                       m.diverged ? m.blowup_time : m.last_violation,
                                       m.diverged ? "diverged" : "no-entry"});
        }
    };

    const DeltaSearch& search = *cfg.delta_search;
    if (eval_delta(search.delta_max)) {
        report.passed = true;
        report.delta_star = search.delta_max;
        fill_passing();
    } else if (!eval_delta(search.delta_min)) {
        report.passed = false;
        fill_failures();
    } else {
        double lo = search.delta_min;  // passes
        double hi = search.delta_max;  // fails
        std::vector<TrialMetrics> best = metrics;
        for (int step = 0; step < search.bisection_steps; ++step) {
            const double mid = 0.5 * (lo + hi);
            if (eval_delta(mid)) {
                lo = mid;
                best = metrics;
            } else {
                hi = mid;
            }
        }
        metrics = best;
        report.passed = true;
        report.delta_star = lo;
        fill_passing();
    }

    // Shrinking the sampling bound should never break a passing loop, but
    // randomized partitions add noise; inversions are logged as anomalies
    // rather than treated as errors.
    for (const auto& lo_out : report.tested)
        for (const auto& hi_out : report.tested)
            if (lo_out.delta < hi_out.delta && !lo_out.passed && hi_out.passed)
                report.anomalies.push_back("delta " + format_double(lo_out.delta) +
                                           " failed while larger delta " +
                                           format_double(hi_out.delta) + " passed");
    return report;
}

std::string stability_report_json(const StabilityReport& report) {
    json j;
    j["passed"] = report.passed;
    j["delta_star"] = report.delta_star;
    j["E_hat"] = report.e_hat;
    j["T_hat"] = report.t_hat;
    j["trials"] = report.trials;
    j["failures"] = json::array();
    for (const auto& f : report.failures)
        j["failures"].push_back(
            {{"trial", f.trial}, {"seed", f.seed}, {"time", f.time}, {"reason", f.reason}});
    j["tested"] = json::array();
    for (const auto& t : report.tested)
        j["tested"].push_back({{"delta", t.delta}, {"passed", t.passed}});
    j["anomalies"] = report.anomalies;
    return j.dump(2) + "\n";
}

std::vector<ConvergenceRow> convergence_study(const ModelPair& model,
                                              const std::vector<double>& deltas,
                                              const StudyOptions& opts) {
    if (deltas.empty()) throw std::domain_error("convergence_study: empty delta list");
    for (std::size_t i = 1; i < deltas.size(); ++i)
        if (!(deltas[i] < deltas[i - 1]))
            throw std::domain_error("convergence_study: deltas must be strictly decreasing");

    const int n = model.state_dim;
    const Segment x0 = Segment::constant(model.delay, Eigen::VectorXd::Ones(n));
    const Segment xhat0 = Segment::zero(model.delay, n);
    IntegratorConfig ref_cfg;
    ref_cfg.step = opts.reference_step;
    ref_cfg.scheme = Scheme::rk4;
    ref_cfg.horizon = opts.horizon;
    const Trajectory reference = integrate_continuous(model, x0, xhat0, ref_cfg);

    std::vector<ConvergenceRow> rows(deltas.size());
    parallel_for(deltas.size(), [&](std::size_t i) {
        ConvergenceRow row;
        row.delta = deltas[i];
        try {
            const Partition partition =
                generate_partition(opts.a, deltas[i], opts.horizon, opts.seed);
            SampledOptions sopts;
            sopts.substeps = opts.substeps;
            const SampledRun run = simulate_sampled(model, x0, xhat0, partition, sopts);
            double err = 0.0;
            Eigen::VectorXd ref_state(2 * n);
            for (std::size_t k = 0; k < run.plant.times().size(); ++k) {
                const double t = run.plant.times()[k];
                if (t > opts.horizon) break;
                reference.value_at_into(t, ref_state);
                err = std::max(err, (run.plant.states().col(static_cast<Eigen::Index>(k)) -
                                     ref_state.head(n))
                                        .norm());
            }
            row.sup_error = err;
        } catch (const DivergenceError& e) {
            row.blowup_time = e.time;
        }
        rows[i] = row;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].blowup_time || rows[i - 1].blowup_time) continue;
        const double ratio = deltas[i - 1] / deltas[i];
        if (std::abs(ratio - 2.0) > 1e-9) continue;
        if (rows[i].sup_error > 0.0 && rows[i - 1].sup_error > 0.0)
            rows[i].order = std::log2(rows[i - 1].sup_error / rows[i].sup_error);
    }
    return rows;
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
    std::string out = "delta,sup_error,order,blowup_time\n";
    for (const auto& row : rows) {
        out += format_double(row.delta);
        out += ',';
        out += row.blowup_time ? "" : format_double(row.sup_error);
        out += ',';
        if (row.order) out += format_double(*row.order);
        out += ',';
        if (row.blowup_time) out += format_double(*row.blowup_time);
        out += '\n';
    }
    return out;
}

int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir, bool verbose) {
    if (!cfg.delta_search) throw ConfigError("missing config field: delta_search");
    std::filesystem::create_directories(out_dir);

    const BenchmarkSpec bench = make_benchmark(cfg.model_name, cfg.model_params);
    const StabilityReport report = certify_practical_stability(cfg);
    write_text_file(out_dir + "/stability_report.json", stability_report_json(report));
    if (verbose)
        std::cout << "certification " << (report.passed ? "passed" : "failed")
                  << ", delta_star=" << report.delta_star << "\n";

    // representative trajectories: trial 0 at the certified delta (or the
    // smallest tested delta when nothing passed)
    const double export_delta =
        report.passed ? report.delta_star : cfg.delta_search->delta_min;
    bool exported_diverged = false;
    try {
        const double component_radius = cfg.initial_radius / std::sqrt(2.0);
        const Segment x0 = sample_initial_state(component_radius, cfg.q_tilde, bench.model.delay,
                                                bench.model.state_dim, derive_seed(cfg.seed, 0));
        const Segment xhat0 =
            sample_initial_state(component_radius, cfg.q_tilde, bench.model.delay,
                                 bench.model.state_dim, derive_seed(cfg.seed, 1));
        const Partition partition =
            generate_partition(cfg.a, export_delta, cfg.horizon, derive_seed(cfg.seed, 2));
        SampledOptions opts;
        opts.substeps = cfg.substeps;
        opts.q_tilde = cfg.q_tilde;
        const SampledRun run = simulate_sampled(bench.model, x0, xhat0, partition, opts);
        write_sampled_run_csv(run, out_dir, "trial0_");
    } catch (const DivergenceError&) {
        exported_diverged = true;  // expected for destabilized scenarios
    }

    bool checks_passed = true;
    const auto suite = suite_for_benchmark(cfg.model_name, bench.model.delay);
    std::vector<std::string> check_files;
    if (suite) {
        const auto samples = sample_segments(bench.model.delay, 2 * bench.model.state_dim,
                                             cfg.lkf_samples, cfg.lkf_sup_norm,
                                             derive_seed(cfg.seed, 0xC0FFEE));
        const CheckReport sep = check_smooth_separability(*suite, samples);
        const CheckReport a1 = check_assumption1(*suite, bench.model, samples);
        const CheckReport sd =
            check_steepest_descent(*suite, bench.model, samples, DescentMode::proof_form);
        for (const auto* rep : {&sep, &a1, &sd}) {
            const std::string file = "check_" + rep->checker + ".json";
            write_text_file(out_dir + "/" + file, check_report_json(*rep));
            check_files.push_back(file);
            checks_passed = checks_passed && rep->passed;
        }
    }

    json manifest = json::object();
    manifest["model"] = cfg.model_name;
    manifest["R"] = cfg.initial_radius;
    manifest["r"] = cfg.target_radius;
    manifest["a"] = cfg.a;
    manifest["q_tilde"] = cfg.q_tilde;
    manifest["seed"] = cfg.seed;
    manifest["trials"] = cfg.trials;
    manifest["passed"] = report.passed;
    manifest["delta_star"] = report.delta_star;
    manifest["export_delta"] = export_delta;
    manifest["export_diverged"] = exported_diverged;
    manifest["lkf_suite"] = suite.has_value();
    manifest["check_reports"] = check_files;
    write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    if (verbose && suite)
        std::cout << "lkf checks " << (checks_passed ? "passed" : "failed") << "\n";
    return (report.passed && checks_passed) ? 0 : 1;
}

int run_scenario(const std::string& config_path, const std::string& out_dir, bool verbose) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario_config(config_path);
        if (!cfg.delta_search) throw ConfigError("missing config field: delta_search");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return run_scenario(cfg, out_dir, verbose);
}

}  // namespace tdsim
