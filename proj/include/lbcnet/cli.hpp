#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lbcnet/benchmark.hpp"
#include "lbcnet/csv.hpp"
#include "lbcnet/json_io.hpp"

namespace lbcnet {

inline int exit_code_for(errc code) {
    switch (code) {
        case errc::config_error:
            return 2;
        case errc::io_error:
            return 3;
        case errc::numeric_error:
        case errc::degenerate_neighborhood:
            return 5;
        default:
            return 4;  // validation: csv_*, domain, dimension, degenerate data
    }
}

namespace cli_detail {

struct Preset {
    double lbc_lr;
    int lbc_hidden;
    double bce_lr;
    int bce_hidden;
};

inline Preset preset_for(const std::string& name) {
    if (name == "ks-1k" || name == "ks-5k") return {0.005, 10, 0.005, 5};
    if (name == "ssmr") return {0.005, 100, 0.001, 10};
    if (name == "eqls") return {0.001, 100, 0.001, 10};
    fail(errc::config_error, "unknown preset '" + name + "' (expected ks-1k, ks-5k, ssmr, eqls)");
}

// CLI11 only processes a config file registered on the root command, so each
// subcommand drains its own --config here, from inside its callback (by which
// point every command-line flag is final). File values fill options the
// command line left unset and never override explicit flags.
inline void apply_config(CLI::App* cmd) {
    CLI::Option* copt = cmd->get_config_ptr();
    if (copt == nullptr || copt->count() == 0) return;
    const auto path = copt->as<std::string>();
    std::vector<CLI::ConfigItem> items;
    try {
        items = cmd->get_config_formatter()->from_file(path);
    } catch (const CLI::Error& e) {
        fail(errc::config_error, e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty()) {
            fail(errc::config_error, "unexpected section [" + item.fullname() + "] in " + path);
        }
        CLI::Option* op = cmd->get_option_no_throw("--" + item.name);
        if (op == nullptr || op == copt) {
            fail(errc::config_error, "unknown option '" + item.name + "' in " + path);
        }
        if (op->count() > 0) continue;
        for (const auto& input : item.inputs) op->add_result(input);
        try {
            op->run_callback();
        } catch (const CLI::Error& e) {
            fail(errc::config_error, "bad value for '" + item.name + "' in " + path + ": " + e.what());
        }
    }
}

// Train-related flags shared by fit, estimate (bootstrap refits), and
// benchmark; option pointers kept so presets only fill values the user
// did not set explicitly.
struct TrainFlags {
    double learning_rate = 0.005;
    int epochs = 20000;
    int hidden = 10;
    double lambda = 1.0;
    int grid_size = 19;
    double span = 0.1;
    std::uint64_t seed = 0;
    std::string method = "lbc";
    std::string scale_grad = "full";
    std::string preset;

    CLI::Option* lr_opt = nullptr;
    CLI::Option* hidden_opt = nullptr;

    void add_to(CLI::App* cmd, int default_epochs, bool with_method = true) {
        epochs = default_epochs;
        if (with_method) {
            cmd->add_option("--method", method, "Propensity loss")
                ->check(CLI::IsMember({"lbc", "bce"}))
                ->capture_default_str();
        }
        lr_opt = cmd->add_option("--learning-rate", learning_rate, "ADAM learning rate")
                     ->check(CLI::PositiveNumber)
                     ->capture_default_str();
        cmd->add_option("--epochs", epochs, "Training epochs")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        hidden_opt = cmd->add_option("--hidden", hidden, "Hidden width of both layers")
                         ->check(CLI::PositiveNumber)
                         ->capture_default_str();
        cmd->add_option("--lambda", lambda, "Calibration weight in the objective")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        cmd->add_option("--grid-size", grid_size, "Number of local grid points")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--span", span, "Neighborhood span (fraction of subjects)")
            ->check(CLI::Range(1e-6, 1.0))
            ->capture_default_str();
        cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
        cmd->add_option("--scale-grad", scale_grad, "Scale-matrix gradient mode")
            ->check(CLI::IsMember({"full", "detached"}))
            ->capture_default_str();
        cmd->add_option("--preset", preset, "Named hyperparameters: ks-1k, ks-5k, ssmr, eqls");
    }

    TrainConfig resolve(std::optional<bool> force_bce = std::nullopt) const {
        TrainConfig c;
        c.learning_rate = learning_rate;
        c.epochs = epochs;
        c.lambda = lambda;
        c.grid_size = grid_size;
        c.span = span;
        c.seed = seed;
        c.hidden = hidden;
        const bool bce = force_bce.value_or(method == "bce");
        c.loss = bce ? LossKind::bce : LossKind::lbc;
        c.scale_mode = scale_grad == "detached" ? ScaleGradMode::detached : ScaleGradMode::full;
        if (!preset.empty()) {
            const Preset p = preset_for(preset);
            if (!lr_opt || lr_opt->count() == 0) c.learning_rate = bce ? p.bce_lr : p.lbc_lr;
            if (!hidden_opt || hidden_opt->count() == 0) c.hidden = bce ? p.bce_hidden : p.lbc_hidden;
        }
        return c;
    }
};

struct DataFlags {
    std::string path;
    std::string treatment_col = "treatment";
    std::string outcome_col = "outcome";
    std::string id_col;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--data", path, "Input CSV")->required();
        cmd->add_option("--treatment-col", treatment_col, "Treatment column name")
            ->capture_default_str();
        cmd->add_option("--outcome-col", outcome_col, "Outcome column name (used if present)")
            ->capture_default_str();
        cmd->add_option("--id-col", id_col, "Optional row-label column");
    }

    Dataset load() const {
        ColumnRoles roles;
        roles.treatment = treatment_col;
        roles.outcome = outcome_col;
        if (!id_col.empty()) roles.id = id_col;
        return ingest_csv(path, roles);
    }
};

struct ScoreSource {
    std::string scores_path;
    std::string fit_path;

    void add_to(CLI::App* cmd) {
        auto* s = cmd->add_option("--scores", scores_path, "Score CSV produced by fit");
        auto* f = cmd->add_option("--fit", fit_path, "fit.json produced by fit");
        s->excludes(f);
    }

    Vector load(Eigen::Index expected_rows) const {
        if (scores_path.empty() == fit_path.empty())
            fail(errc::config_error, "exactly one of --scores or --fit is required");
        Vector scores = scores_path.empty() ? fit_from_json(read_json(fit_path)).scores
                                            : read_scores_csv(scores_path);
        if (scores.size() != expected_rows)
            fail(errc::dimension_mismatch,
                 "score count " + std::to_string(scores.size()) + " does not match data rows " +
                     std::to_string(expected_rows));
        for (Eigen::Index i = 0; i < scores.size(); ++i) {
            if (!(scores[i] > 0.0 && scores[i] < 1.0))
                fail(errc::domain_error, "score outside (0,1) at row " + std::to_string(i + 1));
        }
        return scores;
    }
};

inline std::filesystem::path resolve_output_dir(const std::string& flag_value) {
    std::string dir = flag_value;
    if (dir.empty()) {
        if (const char* env = std::getenv("LBCNET_OUTPUT_DIR")) dir = env;
    }
    if (dir.empty()) dir = ".";
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) fail(errc::io_error, "cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

inline void add_output_dir(CLI::App* cmd, std::string& out) {
    cmd->add_option("--output-dir", out,
                    "Output directory (default: $LBCNET_OUTPUT_DIR or the working directory)");
}

}  // namespace cli_detail

/// Dispatches one CLI invocation (without the program name). Writes
/// artifacts on success; on failure prints a one-line error JSON to stderr
/// and returns a code identifying the failure class: 1 usage, 2 config,
/// 3 I/O, 4 input validation, 5 numeric.
inline int run_command(const std::vector<std::string>& args) {
    CLI::App app{"Propensity scores by local balance and calibration, with IPW estimation,\n"
                 "balance diagnostics, and simulation benchmarks."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "lbcnet 0.1.0");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "Generate a benchmark dataset");
    struct {
        std::string scenario;
        Eigen::Index n = 1000;
        std::uint64_t seed = 0;
        std::string outdir;
    } sim_args;
    simulate->add_option("--scenario", sim_args.scenario, "ks-correct, ks-mis, ssmr-correct, ssmr-mis")
        ->required();
    simulate->add_option("--n", sim_args.n, "Sample size")->check(CLI::PositiveNumber)
        ->capture_default_str();
    simulate->add_option("--seed", sim_args.seed, "RNG seed")->capture_default_str();
    cli_detail::add_output_dir(simulate, sim_args.outdir);
    simulate->set_config("--config");
    simulate->callback([&] {
        cli_detail::apply_config(simulate);
        const auto outdir = cli_detail::resolve_output_dir(sim_args.outdir);
        const SimulatedDataset sim = generate_scenario(sim_args.scenario, sim_args.n, sim_args.seed);
        write_dataset_csv((outdir / "data.csv").string(), sim.data);
        write_json((outdir / "truth.json").string(), to_json(sim));
    });

    // ---- fit ----
    auto* fit_cmd = app.add_subcommand("fit", "Fit a propensity model to a CSV dataset");
    struct {
        cli_detail::DataFlags data;
        cli_detail::TrainFlags train;
        std::string outdir;
    } fit_args;
    fit_args.data.add_to(fit_cmd);
    fit_args.train.add_to(fit_cmd, 20000);
    cli_detail::add_output_dir(fit_cmd, fit_args.outdir);
    fit_cmd->set_config("--config");
    fit_cmd->callback([&] {
        cli_detail::apply_config(fit_cmd);
        const auto outdir = cli_detail::resolve_output_dir(fit_args.outdir);
        const Dataset data = fit_args.data.load();
        const PropensityFit fit = fit_propensity(data, fit_args.train.resolve());
        write_json((outdir / "fit.json").string(), to_json(fit));
        write_scores_csv((outdir / "scores.csv").string(), fit.scores);
    });

    // ---- estimate ----
    auto* estimate = app.add_subcommand("estimate", "IPW treatment-effect estimates from scores");
    struct {
        cli_detail::DataFlags data;
        cli_detail::ScoreSource scores;
        cli_detail::TrainFlags train;  // used only by bootstrap refits
        double truncate = 0.0;
        int bootstrap = 0;
        int jobs = 1;
        std::string outdir;
    } est_args;
    est_args.data.add_to(estimate);
    est_args.scores.add_to(estimate);
    estimate->add_option("--truncate", est_args.truncate, "Symmetric weight-truncation quantile")
        ->check(CLI::Range(0.0, 0.49))
        ->capture_default_str();
    estimate->add_option("--bootstrap", est_args.bootstrap, "Bootstrap repetitions (0 = off)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    estimate->add_option("--jobs", est_args.jobs, "Concurrent bootstrap replicates")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    est_args.train.add_to(estimate, 20000);
    cli_detail::add_output_dir(estimate, est_args.outdir);
    estimate->set_config("--config");
    estimate->callback([&] {
        const auto outdir = cli_detail::resolve_output_dir(est_args.outdir);
        const Dataset data = est_args.data.load();
        const Vector scores = est_args.scores.load(data.n());
        EstimateReport report = estimate_effect(data, scores, est_args.truncate);
        if (est_args.bootstrap > 0) {
            const TrainConfig refit = est_args.train.resolve();
            const double truncate = est_args.truncate;
            const EstimateFn fn = [&refit, truncate](const Dataset& d, std::uint64_t seed) {
                TrainConfig tc = refit;
                tc.seed = seed;
                const PropensityFit f = fit_propensity(d, tc);
                Vector w = ipw_weights(f.scores, d.treatment);
                if (truncate > 0.0) w = truncate_weights(w, truncate);
                return ate_hajek(*d.outcome, d.treatment, w);
            };
            report.bootstrap_se =
                bootstrap_se(data, fn, est_args.bootstrap, refit.seed, est_args.jobs);
            report.bootstrap_reps = est_args.bootstrap;
            report.warnings.push_back("bootstrap refits used " + std::to_string(refit.epochs) +
                                      " epochs per replicate");
        }
        write_json((outdir / "estimate.json").string(), to_json(report));
    });

    // ---- diagnose ----
    auto* diagnose = app.add_subcommand("diagnose", "Balance and calibration diagnostics");
    struct {
        cli_detail::DataFlags data;
        cli_detail::ScoreSource scores;
        double span = 0.1;
        std::string outdir;
    } diag_args;
    diag_args.data.add_to(diagnose);
    diag_args.scores.add_to(diagnose);
    diagnose->add_option("--span", diag_args.span, "Neighborhood span for local diagnostics")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    cli_detail::add_output_dir(diagnose, diag_args.outdir);
    diagnose->set_config("--config");
    diagnose->callback([&] {
        const auto outdir = cli_detail::resolve_output_dir(diag_args.outdir);
        const Dataset data = diag_args.data.load();
        const Vector scores = diag_args.scores.load(data.n());
        const BalanceReport report = balance_report(data, scores, diag_args.span);
        write_balance_csv((outdir / "balance.csv").string(), report);
        write_json((outdir / "balance.json").string(), to_json(report));
        write_calibration_csv((outdir / "calibration.csv").string(),
                              hosmer_lemeshow_table(scores, data.treatment));
    });

    // ---- benchmark ----
    auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo study on a simulated scenario");
    struct {
        std::string scenario = "ks-correct";
        int reps = 20;
        Eigen::Index n = 1000;
        std::string methods = "true-ps,logistic,bce,lbc-net";
        cli_detail::TrainFlags train;
        bool extended = false;
        bool no_balance = false;
        int jobs = 1;
        std::string outdir;
    } bench_args;
    benchmark
        ->add_option("--scenario", bench_args.scenario,
                     "A scenario tag, or a family (ks, ssmr) to run correct and mis side by side")
        ->capture_default_str();
    auto* reps_opt = benchmark->add_option("--reps", bench_args.reps, "Monte Carlo repetitions")
                         ->check(CLI::PositiveNumber)
                         ->capture_default_str();
    auto* n_opt = benchmark->add_option("--n", bench_args.n, "Sample size per repetition")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
    benchmark->add_option("--methods", bench_args.methods, "Comma-separated method list")
        ->capture_default_str();
    bench_args.train.add_to(benchmark, 5000, /*with_method=*/false);
    benchmark->add_flag("--extended", bench_args.extended,
                        "Study-scale run: 100 reps, 20000 epochs, SSMR n=15000");
    benchmark->add_flag("--no-balance", bench_args.no_balance, "Skip per-rep GSD/LSD summaries");
    benchmark->add_option("--jobs", bench_args.jobs, "Concurrent repetitions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cli_detail::add_output_dir(benchmark, bench_args.outdir);
    benchmark->set_config("--config");
    benchmark->callback([&] {
        const auto outdir = cli_detail::resolve_output_dir(bench_args.outdir);

        std::string family = bench_args.scenario;
        std::optional<bool> mis;
        if (family != "ks" && family != "ssmr") {
            const Scenario s = parse_scenario(bench_args.scenario);
            family = s.family;
            mis = s.misspecified;
        }

        BenchmarkConfig config;
        config.reps = bench_args.reps;
        config.n = bench_args.n;
        config.seed = bench_args.train.seed;
        config.jobs = bench_args.jobs;
        config.balance_summaries = !bench_args.no_balance;
        if (bench_args.extended) {
            if (reps_opt->count() == 0) config.reps = 100;
            if (n_opt->count() == 0 && family == "ssmr") config.n = 15000;
        }

        cli_detail::TrainFlags train = bench_args.train;
        if (train.preset.empty())
            train.preset = family == "ssmr" ? "ssmr" : (config.n >= 2500 ? "ks-5k" : "ks-1k");
        config.lbc = train.resolve(/*force_bce=*/false);
        config.bce = train.resolve(/*force_bce=*/true);
        if (bench_args.extended && benchmark->count("--epochs") == 0) {
            config.lbc.epochs = 20000;
            config.bce.epochs = 20000;
        }

        config.methods.clear();
        std::stringstream list(bench_args.methods);
        std::string item;
        while (std::getline(list, item, ',')) {
            if (!item.empty()) config.methods.push_back(parse_method(item));
        }

        if (mis) {
            config.scenario = family + (*mis ? "-mis" : "-correct");
            const BenchmarkResult result = run_benchmark(config);
            write_metrics_csv((outdir / "metrics.csv").string(), result);
            write_json((outdir / "metrics.json").string(), to_json(result));
        } else {
            config.scenario = family + "-correct";
            const BenchmarkResult correct = run_benchmark(config);
            config.scenario = family + "-mis";
            const BenchmarkResult mis_result = run_benchmark(config);
            write_metrics_csv((outdir / "metrics.csv").string(), correct, mis_result);
            Json j{{"scenario", family},
                   {"n", config.n},
                   {"reps", config.reps},
                   {"seed", config.seed},
                   {"correct", to_json(correct)},
                   {"mis", to_json(mis_result)}};
            write_json((outdir / "metrics.json").string(), j);
        }
    });

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("lbcnet");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << Json{{"error", Json{{"code", "usage-error"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 1;
    } catch (const Error& e) {
        std::cerr << error_json(e).dump() << std::endl;
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << Json{{"error", Json{{"code", "internal-error"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 5;
    }
}

}  // namespace lbcnet
