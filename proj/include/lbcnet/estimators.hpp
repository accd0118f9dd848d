#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/rng.hpp"

namespace lbcnet {

/// Per-subject inverse-probability weights: 1/p for the treated, 1/(1-p)
/// for controls. Always >= 1; no truncation here.
inline Vector ipw_weights(const Vector& scores, const Vector& treatment) {
    if (scores.size() != treatment.size())
        fail(errc::dimension_mismatch, "ipw_weights: length mismatch");
    Vector w(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (scores[i] <= 0.0 || scores[i] >= 1.0)
            fail(errc::domain_error, "ipw_weights: score outside (0,1) at row " + std::to_string(i));
        w[i] = 1.0 / (treatment[i] * scores[i] + (1.0 - treatment[i]) * (1.0 - scores[i]));
    }
    return w;
}

/// Symmetric truncation at the q and 1-q empirical quantiles of the weights
/// (nearest-rank). q=0 is a no-op.
inline Vector truncate_weights(const Vector& weights, double quantile) {
    if (quantile < 0.0 || quantile >= 0.5)
        fail(errc::domain_error, "truncate_weights: quantile must be in [0, 0.5)");
    if (quantile == 0.0) return weights;
    std::vector<double> sorted(weights.data(), weights.data() + weights.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const auto rank = [&](double q) {
        const auto r = static_cast<size_t>(std::ceil(q * static_cast<double>(n))) ;
        return sorted[std::min(n - 1, r == 0 ? 0 : r - 1)];
    };
    const double lo = rank(quantile), hi = rank(1.0 - quantile);
    Vector out = weights;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lo, hi);
    return out;
}

/// Ratio (Hajek) IPW contrast: weighted treated mean minus weighted control
/// mean. Invariant to rescaling all weights.
inline double ate_hajek(const Vector& outcome, const Vector& treatment, const Vector& weights) {
    const Eigen::Index n = outcome.size();
    if (treatment.size() != n || weights.size() != n)
        fail(errc::dimension_mismatch, "ate_hajek: length mismatch");
    double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (treatment[i] == 1.0) {
            num1 += weights[i] * outcome[i];
            den1 += weights[i];
        } else {
            num0 += weights[i] * outcome[i];
            den0 += weights[i];
        }
    }
    if (den1 <= 0.0 || den0 <= 0.0)
        fail(errc::degenerate_data, "ate_hajek: zero weight mass in one arm");
    return num1 / den1 - num0 / den0;
}

/// Weighted mean of the treated arm alone, normalized by treated weight
/// mass. The estimand for missing-outcome designs where controls carry no
/// usable outcome.
inline double hajek_treated_mean(const Vector& outcome, const Vector& treatment, const Vector& weights) {
    const Eigen::Index n = outcome.size();
    if (treatment.size() != n || weights.size() != n)
        fail(errc::dimension_mismatch, "hajek_treated_mean: length mismatch");
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (treatment[i] == 1.0) {
            num += weights[i] * outcome[i];
            den += weights[i];
        }
    }
    if (den <= 0.0) fail(errc::degenerate_data, "hajek_treated_mean: zero treated weight mass");
    return num / den;
}

/// Unnormalized (Horvitz-Thompson) IPW contrast divided by N.
inline double ate_horvitz_thompson(const Vector& outcome, const Vector& treatment,
                                   const Vector& weights, Eigen::Index n_total) {
    const Eigen::Index n = outcome.size();
    if (treatment.size() != n || weights.size() != n)
        fail(errc::dimension_mismatch, "ate_horvitz_thompson: length mismatch");
    if (n_total <= 0) fail(errc::domain_error, "ate_horvitz_thompson: N must be positive");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        acc += (treatment[i] == 1.0 ? 1.0 : -1.0) * weights[i] * outcome[i];
    }
    return acc / static_cast<double>(n_total);
}

/// Kish effective sample sizes (sum W)^2 / sum W^2 per arm.
struct EffectiveSizes {
    double treated = 0.0;
    double control = 0.0;
};

inline EffectiveSizes effective_sample_size(const Vector& treatment, const Vector& weights) {
    if (treatment.size() != weights.size())
        fail(errc::dimension_mismatch, "effective_sample_size: length mismatch");
    double s1 = 0.0, q1 = 0.0, s0 = 0.0, q0 = 0.0;
    for (Eigen::Index i = 0; i < treatment.size(); ++i) {
        const double w = weights[i];
        if (treatment[i] == 1.0) {
            s1 += w;
            q1 += w * w;
        } else {
            s0 += w;
            q0 += w * w;
        }
    }
    if (q1 <= 0.0 || q0 <= 0.0)
        fail(errc::degenerate_data, "effective_sample_size: an arm is empty or unweighted");
    return {s1 * s1 / q1, s0 * s0 / q0};
}

/// Resample row indices with replacement until both treatment classes
/// appear; gives up after ten single-class draws.
inline std::vector<Eigen::Index> bootstrap_indices(Rng& rng, const Vector& treatment) {
    const Eigen::Index n = treatment.size();
    for (int attempt = 0; attempt < 10; ++attempt) {
        std::vector<Eigen::Index> idx(static_cast<size_t>(n));
        bool any_treated = false, any_control = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
            idx[static_cast<size_t>(i)] = j;
            (treatment[j] == 1.0 ? any_treated : any_control) = true;
        }
        if (any_treated && any_control) return idx;
    }
    fail(errc::degenerate_data, "bootstrap: ten consecutive single-class resamples");
}

inline Dataset resample(const Dataset& data, const std::vector<Eigen::Index>& idx) {
    Dataset out;
    out.covariates.resize(static_cast<Eigen::Index>(idx.size()), data.covariates.cols());
    out.treatment.resize(static_cast<Eigen::Index>(idx.size()));
    if (data.outcome) out.outcome = Vector(static_cast<Eigen::Index>(idx.size()));
    out.covariate_names = data.covariate_names;
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out.covariates.row(r) = data.covariates.row(idx[i]);
        out.treatment[r] = data.treatment[idx[i]];
        if (data.outcome) (*out.outcome)[r] = (*data.outcome)[idx[i]];
        if (!data.ids.empty()) out.ids.push_back(data.ids[static_cast<size_t>(idx[i])]);
    }
    return out;
}

/// Estimate producer for one bootstrap replicate: receives the resampled
/// dataset and a replicate-specific seed.
using EstimateFn = std::function<double(const Dataset&, std::uint64_t seed)>;

/// Nonparametric bootstrap standard error of an estimator: the sample
/// standard deviation of the estimate over `reps` resamples-with-replacement
/// of subjects. Replicates derive independent seeds from the master seed,
/// so the result does not depend on `jobs`.
inline double bootstrap_se(const Dataset& data, const EstimateFn& estimate, int reps,
                           std::uint64_t seed, int jobs = 1) {
    if (reps < 2) fail(errc::domain_error, "bootstrap_se: need at least 2 repetitions");
    data.validate();
    data.require_both_classes();

    std::vector<double> estimates(static_cast<size_t>(reps));
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto run_range = [&](int begin, int end) {
        for (int b = begin; b < end; ++b) {
            try {
                Rng rng(split_seed(seed, static_cast<std::uint64_t>(b)));
                const auto idx = bootstrap_indices(rng, data.treatment);
                const Dataset sample = resample(data, idx);
                estimates[static_cast<size_t>(b)] =
                    estimate(sample, split_seed(seed, static_cast<std::uint64_t>(reps + b)));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int workers = std::max(1, std::min(jobs, reps));
    if (workers == 1) {
        run_range(0, reps);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (reps + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(reps, begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    return std::sqrt(ss / static_cast<double>(reps - 1));
}

struct EstimateReport {
    double ate_hajek = 0.0;
    double ate_horvitz_thompson = 0.0;
    double ess_treated = 0.0;
    double ess_control = 0.0;
    std::optional<double> bootstrap_se;
    int bootstrap_reps = 0;
    double truncation_quantile = 0.0;  // 0 = off
    std::vector<std::string> warnings;
};

/// Point estimates and effective sizes from fitted scores; bootstrap SE is
/// attached separately by the caller when requested.
inline EstimateReport estimate_effect(const Dataset& data, const Vector& scores,
                                      double truncation_quantile = 0.0) {
    data.validate();
    data.require_both_classes();
    if (!data.outcome) fail(errc::degenerate_data, "estimate_effect: dataset has no outcome column");
    if (scores.size() != data.n()) fail(errc::dimension_mismatch, "estimate_effect: score length mismatch");

    Vector w = ipw_weights(scores, data.treatment);
    if (truncation_quantile > 0.0) w = truncate_weights(w, truncation_quantile);

    EstimateReport report;
    report.truncation_quantile = truncation_quantile;
    report.ate_hajek = ate_hajek(*data.outcome, data.treatment, w);
    report.ate_horvitz_thompson = ate_horvitz_thompson(*data.outcome, data.treatment, w, data.n());
    const EffectiveSizes ess = effective_sample_size(data.treatment, w);
    report.ess_treated = ess.treated;
    report.ess_control = ess.control;
    return report;
}

}  // namespace lbcnet
