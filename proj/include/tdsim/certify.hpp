#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdsim/models.hpp"

namespace tdsim {

/// Malformed or incomplete scenario configuration; the message names the
/// offending field. Maps to exit code 2 at the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DeltaSearch {
    double delta_max = 0.0;
    double delta_min = 0.0;
    int bisection_steps = 6;
};

/// One experiment description (JSON on disk; see README for the schema).
struct ScenarioConfig {
    std::string model_name;
    std::map<std::string, double> model_params;
    double initial_radius = 0.0;  // R: stacked initial states drawn from C^{2n}_R
    double target_radius = 0.0;   // r: ball the stacked state must enter and keep
    double a = 1.0;               // partition lower-gap fraction, in (0, 1]
    double q_tilde = 1.0;
    double horizon = 0.0;
    int trials = 20;
    std::uint64_t seed = 0;
    int substeps = 16;
    std::optional<DeltaSearch> delta_search;  // certification
    std::vector<double> delta_grid;           // sweeps
    std::optional<double> delta;              // single simulation runs
    int lkf_samples = 1000;
    double lkf_sup_norm = 2.0;
};

ScenarioConfig parse_scenario_config(const std::string& json_text);
ScenarioConfig load_scenario_config(const std::string& path);

struct TrialFailure {
    int trial = 0;
    std::uint64_t seed = 0;  // the trial's x0 draw seed
    double time = 0.0;       // blow-up time, or the last time outside the target ball
    std::string reason;      // "diverged" | "no-entry"
};

struct DeltaOutcome {
    double delta = 0.0;
    bool passed = false;
};

/// Empirical counterpart of the practical-stability conclusion: delta_star
/// is the largest sampling bound found whose trials all stay bounded,
/// enter the target ball by 0.8 * horizon and never leave it afterwards;
/// e_hat bounds the stacked segment norm over every trial and t_hat is the
/// worst measured entry time.
struct StabilityReport {
    bool passed = false;
    double delta_star = 0.0;
    double e_hat = 0.0;
    double t_hat = 0.0;
    int trials = 0;
    std::vector<TrialFailure> failures;   // from the smallest tested delta when failing
    std::vector<DeltaOutcome> tested;     // bisection path in evaluation order
    std::vector<std::string> anomalies;   // non-monotone pass/fail observations
};

/// Bisection certification over [delta_min, delta_max]. Trials run
/// concurrently; aggregation is ordered by trial index so reports are
/// byte-deterministic for a fixed config and seed. A configuration whose
/// whole range fails yields passed = false with the failure ledger, not an
/// exception.
StabilityReport certify_practical_stability(const ScenarioConfig& cfg);

std::string stability_report_json(const StabilityReport& report);

struct StudyOptions {
    double horizon = 5.0;
    int substeps = 16;
    double a = 1.0;  // 1 = periodic partitions, the cleanest order measurement
    std::uint64_t seed = 0;
    double reference_step = 1e-4;
};

struct ConvergenceRow {
    double delta = 0.0;
    double sup_error = 0.0;
    std::optional<double> order;        // log2(e_prev / e) for halving steps
    std::optional<double> blowup_time;  // set when the run diverged
};

/// Sampled-vs-continuous plant error sweep from x0 == 1, xhat0 == 0.
/// `deltas` must be strictly decreasing; divergence is recorded per row.
std::vector<ConvergenceRow> convergence_study(const ModelPair& model,
                                              const std::vector<double>& deltas,
                                              const StudyOptions& opts = {});

std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

/// Full pipeline: certify, run the LKF checkers when a suite ships for
/// the model, export trajectories and reports under out_dir. Returns 0
/// when everything passed, 1 on a failed criterion and 2 on a config
/// error (path overload only).
int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir, bool verbose = false);
int run_scenario(const std::string& config_path, const std::string& out_dir,
                 bool verbose = false);

}  // namespace tdsim
