#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/diagnostics.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/estimators.hpp"
#include "lbcnet/generators.hpp"
#include "lbcnet/logistic.hpp"
#include "lbcnet/train.hpp"

namespace lbcnet {

enum class Method { true_ps, logistic, bce, lbc_net };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::true_ps: return "true-ps";
        case Method::logistic: return "logistic";
        case Method::bce: return "bce";
        case Method::lbc_net: return "lbc-net";
    }
    fail(errc::domain_error, "method_name: unknown method");
}

inline Method parse_method(const std::string& name) {
    if (name == "true-ps") return Method::true_ps;
    if (name == "logistic") return Method::logistic;
    if (name == "bce") return Method::bce;
    if (name == "lbc-net") return Method::lbc_net;
    fail(errc::config_error,
         "unknown method '" + name + "' (expected true-ps, logistic, bce, lbc-net)");
}

struct Aggregate {
    double percent_bias = 0.0;
    double rmse = 0.0;
    double variance = 0.0;  // population variance, so rmse^2 = variance + bias^2
};

inline Aggregate aggregate_metrics(const std::vector<double>& estimates, double truth) {
    if (estimates.empty()) fail(errc::degenerate_data, "aggregate_metrics: no estimates");
    if (truth == 0.0) fail(errc::domain_error, "aggregate_metrics: zero truth makes %bias undefined");
    const double r = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= r;
    double mse = 0.0, var = 0.0;
    for (double e : estimates) {
        mse += (e - truth) * (e - truth);
        var += (e - mean) * (e - mean);
    }
    Aggregate a;
    a.percent_bias = 100.0 * (mean - truth) / truth;
    a.rmse = std::sqrt(mse / r);
    a.variance = var / r;
    return a;
}

/// A method whose repetitions fail this often indicates a broken setup, not
/// sampling noise; the harness aborts instead of averaging the survivors.
inline bool failure_budget_exceeded(int failed, int requested) {
    return failed * 10 > requested;
}

struct MethodMetrics {
    std::string method;
    double truth = 0.0;
    double percent_bias = 0.0;
    double rmse = 0.0;
    double variance = 0.0;
    int reps_requested = 0;
    int reps_completed = 0;
    int reps_failed = 0;
    std::vector<double> estimates;  // completed reps, in repetition order
    double mean_gsd = 0.0;          // averaged over completed reps
    double max_gsd = 0.0;
    double mean_lsd = 0.0;
    std::vector<std::string> warnings;
};

struct BenchmarkConfig {
    std::string scenario = "ks-correct";  // ks-correct | ks-mis | ssmr-correct | ssmr-mis
    std::vector<Method> methods{Method::true_ps, Method::logistic, Method::bce, Method::lbc_net};
    int reps = 20;
    Eigen::Index n = 1000;
    std::uint64_t seed = 0;
    TrainConfig lbc;               // used by the lbc-net method
    TrainConfig bce;               // used by the bce method (loss forced to bce)
    bool balance_summaries = true; // per-rep GSD/LSD summaries
    int jobs = 1;

    void validate() const {
        parse_scenario(scenario);
        if (reps < 1) fail(errc::config_error, "benchmark: reps must be >= 1");
        if (n < 2) fail(errc::config_error, "benchmark: n must be >= 2");
        if (methods.empty()) fail(errc::config_error, "benchmark: no methods selected");
        lbc.validate();
        bce.validate();
    }
};

struct BenchmarkResult {
    std::string scenario;
    Eigen::Index n = 0;
    int reps = 0;
    std::uint64_t seed = 0;
    std::vector<MethodMetrics> methods;
};

namespace detail {

struct RepOutcome {
    std::optional<double> estimate;
    double mean_gsd = 0.0, max_gsd = 0.0, mean_lsd = 0.0;
    std::string warning;
};

inline Vector method_scores(Method m, const SimulatedDataset& sim, const BenchmarkConfig& config,
                            std::uint64_t train_seed) {
    switch (m) {
        case Method::true_ps:
            return clamp_scores(sim.true_propensity);
        case Method::logistic:
            return predict_proba(fit_logistic(sim.data), sim.data.covariates);
        case Method::bce: {
            TrainConfig tc = config.bce;
            tc.loss = LossKind::bce;
            tc.seed = train_seed;
            return fit_propensity(sim.data, tc).scores;
        }
        case Method::lbc_net: {
            TrainConfig tc = config.lbc;
            tc.loss = LossKind::lbc;
            tc.seed = train_seed;
            return fit_propensity(sim.data, tc).scores;
        }
    }
    fail(errc::domain_error, "method_scores: unknown method");
}

}  // namespace detail

/// Monte Carlo harness: per repetition, generate a dataset, fit each method,
/// estimate the scenario's target (treated-arm mean or ATE), and summarize
/// balance. Repetition seeds derive from the master seed, so results do not
/// depend on the job count. Per-repetition failures are excluded with a
/// warning; more than 10% failures for a method aborts.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
    config.validate();
    const size_t n_methods = config.methods.size();
    std::vector<std::vector<detail::RepOutcome>> outcomes(
        n_methods, std::vector<detail::RepOutcome>(static_cast<size_t>(config.reps)));
    double truth = 0.0;

    auto run_rep = [&](int rep) {
        const std::uint64_t rep_seed = split_seed(config.seed, static_cast<std::uint64_t>(rep));
        const SimulatedDataset sim = generate_scenario(config.scenario, config.n, rep_seed);
        if (rep == 0) truth = sim.estimand;
        for (size_t mi = 0; mi < n_methods; ++mi) {
            detail::RepOutcome& slot = outcomes[mi][static_cast<size_t>(rep)];
            try {
                const Vector scores = detail::method_scores(
                    config.methods[mi], sim, config,
                    split_seed(rep_seed, 1 + static_cast<std::uint64_t>(mi)));
                const Vector w = ipw_weights(scores, sim.data.treatment);
                slot.estimate = sim.estimand_kind == EstimandKind::treated_mean
                                    ? hajek_treated_mean(*sim.data.outcome, sim.data.treatment, w)
                                    : ate_hajek(*sim.data.outcome, sim.data.treatment, w);
                if (config.balance_summaries) {
                    const BalanceReport br = balance_report(sim.data, scores, config.lbc.span);
                    slot.mean_gsd = br.mean_gsd;
                    slot.max_gsd = br.max_gsd;
                    slot.mean_lsd = br.mean_lsd;
                }
            } catch (const Error& e) {
                slot.warning = "rep " + std::to_string(rep) + ": " + e.what();
            }
        }
    };

    const int workers = std::max(1, std::min(config.jobs, config.reps));
    if (workers == 1) {
        for (int rep = 0; rep < config.reps; ++rep) run_rep(rep);
    } else {
        // rep 0 first so `truth` is set without a race
        run_rep(0);
        std::vector<std::thread> pool;
        std::atomic<int> next{1};
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int rep = next.fetch_add(1); rep < config.reps; rep = next.fetch_add(1))
                    run_rep(rep);
            });
        }
        for (auto& t : pool) t.join();
    }

    BenchmarkResult result;
    result.scenario = config.scenario;
    result.n = config.n;
    result.reps = config.reps;
    result.seed = config.seed;

    for (size_t mi = 0; mi < n_methods; ++mi) {
        MethodMetrics metrics;
        metrics.method = method_name(config.methods[mi]);
        metrics.truth = truth;
        metrics.reps_requested = config.reps;
        double gsd_sum = 0.0, gsd_max = 0.0, lsd_sum = 0.0;
        for (int rep = 0; rep < config.reps; ++rep) {
            const detail::RepOutcome& slot = outcomes[mi][static_cast<size_t>(rep)];
            if (slot.estimate) {
                metrics.estimates.push_back(*slot.estimate);
                gsd_sum += slot.mean_gsd;
                gsd_max = std::max(gsd_max, slot.max_gsd);
                lsd_sum += slot.mean_lsd;
            } else {
                metrics.warnings.push_back(slot.warning);
            }
        }
        metrics.reps_completed = static_cast<int>(metrics.estimates.size());
        metrics.reps_failed = config.reps - metrics.reps_completed;
        if (failure_budget_exceeded(metrics.reps_failed, config.reps))
            fail(errc::numeric_error, "benchmark: method " + metrics.method + " failed " +
                                          std::to_string(metrics.reps_failed) + " of " +
                                          std::to_string(config.reps) + " repetitions");
        const Aggregate agg = aggregate_metrics(metrics.estimates, truth);
        metrics.percent_bias = agg.percent_bias;
        metrics.rmse = agg.rmse;
        metrics.variance = agg.variance;
        if (metrics.reps_completed > 0 && config.balance_summaries) {
            metrics.mean_gsd = gsd_sum / metrics.reps_completed;
            metrics.max_gsd = gsd_max;
            metrics.mean_lsd = lsd_sum / metrics.reps_completed;
        }
        result.methods.push_back(std::move(metrics));
    }
    return result;
}

}  // namespace lbcnet
