#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdsim/certify.hpp"
#include "tdsim/io.hpp"
#include "tdsim/krasovskii.hpp"
#include "tdsim/rfde.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/sampling.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "scenario config JSON")->required();
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_flag("--verbose", args.verbose, "print progress");
}

tdsim::ScenarioConfig load(const CommonArgs& args) {
    tdsim::ScenarioConfig cfg = tdsim::load_scenario_config(args.config);
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

int cmd_simulate(const CommonArgs& args) {
    const auto cfg = load(args);
    if (!cfg.delta) throw tdsim::ConfigError("missing config field: delta (required by simulate)");
    const auto bench = tdsim::make_benchmark(cfg.model_name, cfg.model_params);
    std::filesystem::create_directories(args.out);

    const double component_radius = cfg.initial_radius / std::sqrt(2.0);
    const auto x0 = tdsim::sample_initial_state(component_radius, cfg.q_tilde, bench.model.delay,
                                                bench.model.state_dim, tdsim::derive_seed(cfg.seed, 0));
    const auto xhat0 =
        tdsim::sample_initial_state(component_radius, cfg.q_tilde, bench.model.delay,
                                    bench.model.state_dim, tdsim::derive_seed(cfg.seed, 1));

    tdsim::IntegratorConfig icfg;
    icfg.step = *cfg.delta / cfg.substeps;
    icfg.horizon = cfg.horizon;
    const auto continuous = tdsim::integrate_continuous(bench.model, x0, xhat0, icfg);
    tdsim::write_trajectory_csv(continuous, args.out + "/continuous.csv");
    tdsim::write_trajectory_meta(continuous, args.out + "/continuous.json");

    const auto partition = tdsim::generate_partition(cfg.a, *cfg.delta, cfg.horizon,
                                                     tdsim::derive_seed(cfg.seed, 2));
    tdsim::SampledOptions sopts;
    sopts.substeps = cfg.substeps;
    sopts.q_tilde = cfg.q_tilde;
    const auto run = tdsim::simulate_sampled(bench.model, x0, xhat0, partition, sopts);
    tdsim::write_sampled_run_csv(run, args.out, "sampled_");

    nlohmann::json manifest;
    manifest["model"] = cfg.model_name;
    manifest["a"] = cfg.a;
    manifest["delta"] = *cfg.delta;
    manifest["q_tilde"] = cfg.q_tilde;
    manifest["R"] = cfg.initial_radius;
    manifest["seed"] = cfg.seed;
    manifest["substeps"] = cfg.substeps;
    manifest["integrator_step"] = icfg.step;
    manifest["terminal_sup_norm_continuous"] = continuous.window(cfg.horizon).sup_norm();
    manifest["terminal_sup_norm_sampled_plant"] = run.plant.window(cfg.horizon).sup_norm();
    tdsim::write_text_file(args.out + "/manifest.json", manifest.dump(2) + "\n");
    if (args.verbose)
        std::cout << "wrote continuous + sampled trajectories to " << args.out << "\n";
    return 0;
}

int cmd_check_lkf(const CommonArgs& args) {
    const auto cfg = load(args);
    const auto bench = tdsim::make_benchmark(cfg.model_name, cfg.model_params);
    const auto suite = tdsim::suite_for_benchmark(cfg.model_name, bench.model.delay);
    if (!suite) {
        std::cerr << "no functional suite registered for model " << cfg.model_name << "\n";
        return 2;
    }
    std::filesystem::create_directories(args.out);
    const auto samples =
        tdsim::sample_segments(bench.model.delay, 2 * bench.model.state_dim, cfg.lkf_samples,
                               cfg.lkf_sup_norm, tdsim::derive_seed(cfg.seed, 0xC0FFEE));
    bool all = true;
    const auto sep = tdsim::check_smooth_separability(*suite, samples);
    const auto a1 = tdsim::check_assumption1(*suite, bench.model, samples);
    const auto sd4 = tdsim::check_steepest_descent(*suite, bench.model, samples,
                                                   tdsim::DescentMode::definition4);
    const auto sdp = tdsim::check_steepest_descent(*suite, bench.model, samples,
                                                   tdsim::DescentMode::proof_form);
    for (const auto* rep : {&sep, &a1, &sd4, &sdp}) {
        tdsim::write_text_file(args.out + "/check_" + rep->checker + ".json",
                               tdsim::check_report_json(*rep));
        all = all && rep->passed;
        if (args.verbose)
            std::cout << rep->checker << ": " << (rep->passed ? "pass" : "FAIL") << " ("
                      << rep->violations.size() << " violations, " << rep->flagged.size()
                      << " flagged)\n";
    }
    return all ? 0 : 1;
}

int cmd_sweep(const CommonArgs& args) {
    const auto cfg = load(args);
    if (cfg.delta_grid.empty())
        throw tdsim::ConfigError("missing config field: delta_grid (required by sweep)");
    const auto bench = tdsim::make_benchmark(cfg.model_name, cfg.model_params);
    std::filesystem::create_directories(args.out);
    tdsim::StudyOptions opts;
    opts.horizon = cfg.horizon;
    opts.substeps = cfg.substeps;
    opts.a = cfg.a;
    opts.seed = cfg.seed;
    const auto rows = tdsim::convergence_study(bench.model, cfg.delta_grid, opts);
    tdsim::write_text_file(args.out + "/convergence.csv", tdsim::convergence_csv(rows));
    if (args.verbose)
        for (const auto& row : rows)
            std::cout << "delta " << row.delta << " sup_error " << row.sup_error
                      << (row.order ? " order " + std::to_string(*row.order) : "") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sampled-data emulation toolkit for nonlinear time-delay systems"};
    app.require_subcommand(1);

    CommonArgs sim_args, cert_args, lkf_args, sweep_args;
    auto* simulate = app.add_subcommand("simulate", "one continuous + sampled run, CSV export");
    add_common(simulate, sim_args);
    auto* certify = app.add_subcommand("certify", "practical-stability certification pipeline");
    add_common(certify, cert_args);
    auto* check = app.add_subcommand("check-lkf", "run the functional-suite checkers");
    add_common(check, lkf_args);
    auto* sweep = app.add_subcommand("sweep", "sampled-vs-continuous convergence sweep");
    add_common(sweep, sweep_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(sim_args);
        if (certify->parsed())
            return tdsim::run_scenario(load(cert_args), cert_args.out, cert_args.verbose);
        if (check->parsed()) return cmd_check_lkf(lkf_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
    } catch (const tdsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
