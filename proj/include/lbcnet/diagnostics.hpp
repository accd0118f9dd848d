#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/estimators.hpp"
#include "lbcnet/kernel.hpp"

namespace lbcnet {

namespace detail {

struct ArmMoments {
    double mean = 0.0;
    double variance = 0.0;  // weighted, mass-normalized
    double mass = 0.0;
    double mass_sq = 0.0;
    int positive = 0;

    double kish() const { return mass_sq > 0.0 ? mass * mass / mass_sq : 0.0; }
};

inline ArmMoments weighted_moments(const Vector& values, const Vector& weights,
                                   const Vector& treatment, double arm) {
    ArmMoments m;
    double wsum = 0.0, wx = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (treatment[i] != arm) continue;
        const double w = weights[i];
        wsum += w;
        wx += w * values[i];
        m.mass_sq += w * w;
        if (w > 0.0) ++m.positive;
    }
    m.mass = wsum;
    if (wsum > 0.0) {
        m.mean = wx / wsum;
        double ss = 0.0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (treatment[i] != arm) continue;
            const double d = values[i] - m.mean;
            ss += weights[i] * d * d;
        }
        m.variance = ss / wsum;
    }
    return m;
}

// Shared core of the global and local standardized differences:
// 100 |mean1 - mean0| / sqrt((v1 + v0)/2) with mass-normalized weighted
// variances. Zero spread with equal means reports 0; with unequal means it
// reports infinite imbalance. A constant covariate accumulates rounding-level
// spread (~eps^2 * scale^2) under weighted sums, so degeneracy is judged
// relative to the covariate's magnitude rather than against exact zero.
inline double standardized_difference(const ArmMoments& treated, const ArmMoments& control) {
    const double pooled = 0.5 * (treated.variance + control.variance);
    const double gap = std::abs(treated.mean - control.mean);
    const double scale = std::max({std::abs(treated.mean), std::abs(control.mean), 1.0});
    if (pooled <= 1e-24 * scale * scale) {
        return gap <= 1e-12 * scale ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 100.0 * gap / std::sqrt(pooled);
}

}  // namespace detail

/// Global standardized mean difference in percent for one covariate under
/// the given weights.
inline double gsd(const Vector& covariate, const Vector& treatment, const Vector& weights) {
    const Eigen::Index n = covariate.size();
    if (treatment.size() != n || weights.size() != n)
        fail(errc::dimension_mismatch, "gsd: length mismatch");
    const auto m1 = detail::weighted_moments(covariate, weights, treatment, 1.0);
    const auto m0 = detail::weighted_moments(covariate, weights, treatment, 0.0);
    if (m1.positive < 2 || m0.positive < 2)
        fail(errc::degenerate_data, "gsd: an arm has fewer than 2 positively weighted subjects");
    return detail::standardized_difference(m1, m0);
}

/// Bandwidths for diagnostic evaluation points: the same nearest-neighbor
/// rule the fit uses, applied to the scores under diagnosis.
inline std::vector<double> evaluation_bandwidths(const Vector& scores,
                                                 const std::vector<double>& points, double span) {
    return adaptive_bandwidths(scores, points, span);
}

/// The 99 equally spaced probabilities 0.01 .. 0.99.
inline std::vector<double> default_evaluation_points() {
    std::vector<double> p(99);
    for (int i = 0; i < 99; ++i) p[static_cast<size_t>(i)] = static_cast<double>(i + 1) / 100.0;
    return p;
}

/// Local standardized mean difference of one covariate at each evaluation
/// point: the GSD formula with kernel-localized inverse-probability weights
/// w(p0,p_i)/d_i. Neighborhoods with fewer than two effective subjects in
/// either arm yield NaN (missing), not zero.
inline std::vector<double> lsd_curve(const Vector& covariate, const Vector& treatment,
                                     const Vector& scores, const std::vector<double>& points,
                                     const std::vector<double>& bandwidths) {
    const Eigen::Index n = covariate.size();
    if (treatment.size() != n || scores.size() != n)
        fail(errc::dimension_mismatch, "lsd_curve: length mismatch");
    if (points.size() != bandwidths.size())
        fail(errc::dimension_mismatch, "lsd_curve: points/bandwidths mismatch");

    std::vector<double> curve(points.size());
    Vector local(n);
    for (size_t k = 0; k < points.size(); ++k) {
        const double p0 = points[k];
        if (p0 <= 0.0 || p0 >= 1.0) fail(errc::domain_error, "lsd_curve: evaluation point outside (0,1)");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = treatment[i] * scores[i] + (1.0 - treatment[i]) * (1.0 - scores[i]);
            local[i] = kernel_weight(p0, bandwidths[k], scores[i]) / d;
        }
        const auto m1 = detail::weighted_moments(covariate, local, treatment, 1.0);
        const auto m0 = detail::weighted_moments(covariate, local, treatment, 0.0);
        if (m1.kish() < 2.0 || m0.kish() < 2.0) {
            curve[k] = std::numeric_limits<double>::quiet_NaN();
        } else {
            curve[k] = detail::standardized_difference(m1, m0);
        }
    }
    return curve;
}

struct CalibrationRow {
    double lower = 0.0;
    double upper = 0.0;
    double mean_score = std::numeric_limits<double>::quiet_NaN();
    double treated_proportion = std::numeric_limits<double>::quiet_NaN();
    Eigen::Index count = 0;
};

struct CalibrationTable {
    std::vector<CalibrationRow> rows;  // 10 equal-length bins over [0,1]
};

/// Hosmer-Lemeshow style table: mean fitted score vs observed treated
/// proportion within 10 equal-length score bins. Empty bins keep zero
/// counts and NaN summaries.
inline CalibrationTable hosmer_lemeshow_table(const Vector& scores, const Vector& treatment) {
    const Eigen::Index n = scores.size();
    if (treatment.size() != n) fail(errc::dimension_mismatch, "hosmer_lemeshow_table: length mismatch");
    if (n < 10) fail(errc::degenerate_data, "hosmer_lemeshow_table: need at least 10 subjects");

    CalibrationTable table;
    table.rows.resize(10);
    std::vector<double> score_sum(10, 0.0), treated_sum(10, 0.0);
    for (int b = 0; b < 10; ++b) {
        table.rows[static_cast<size_t>(b)].lower = b / 10.0;
        table.rows[static_cast<size_t>(b)].upper = (b + 1) / 10.0;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (scores[i] < 0.0 || scores[i] > 1.0)
            fail(errc::domain_error, "hosmer_lemeshow_table: score outside [0,1]");
        const int b = std::min(static_cast<int>(scores[i] * 10.0), 9);
        table.rows[static_cast<size_t>(b)].count += 1;
        score_sum[static_cast<size_t>(b)] += scores[i];
        treated_sum[static_cast<size_t>(b)] += treatment[i];
    }
    for (size_t b = 0; b < 10; ++b) {
        if (table.rows[b].count > 0) {
            const double c = static_cast<double>(table.rows[b].count);
            table.rows[b].mean_score = score_sum[b] / c;
            table.rows[b].treated_proportion = treated_sum[b] / c;
        }
    }
    return table;
}

struct BalanceReport {
    std::vector<std::string> covariate_names;    // raw covariates, no intercept
    std::vector<double> gsd;                     // percent, per covariate
    std::vector<std::vector<double>> lsd;        // [covariate][evaluation point], NaN = missing
    std::vector<double> evaluation_points;
    std::vector<double> bandwidths;              // per evaluation point
    std::vector<double> ess_treated;             // localized Kish sizes per point
    std::vector<double> ess_control;
    double max_gsd = 0.0;
    double mean_gsd = 0.0;
    double max_lsd = 0.0;   // over non-missing entries
    double mean_lsd = 0.0;
};

/// Full balance diagnosis of a score vector against a dataset: per-covariate
/// GSD under IPW weights plus LSD curves over the evaluation grid. The
/// intercept column is excluded (identically balanced by construction).
inline BalanceReport balance_report(const Dataset& data, const Vector& scores, double span = 0.1,
                                    std::vector<double> points = default_evaluation_points()) {
    data.validate();
    data.require_both_classes();
    if (scores.size() != data.n()) fail(errc::dimension_mismatch, "balance_report: score length mismatch");

    BalanceReport report;
    report.covariate_names.assign(data.covariate_names.begin() + 1, data.covariate_names.end());
    report.evaluation_points = std::move(points);
    report.bandwidths = evaluation_bandwidths(scores, report.evaluation_points, span);

    const Vector weights = ipw_weights(scores, data.treatment);
    const Matrix raw = data.raw_covariates();
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        report.gsd.push_back(gsd(raw.col(c), data.treatment, weights));
        report.lsd.push_back(lsd_curve(raw.col(c), data.treatment, scores,
                                       report.evaluation_points, report.bandwidths));
    }

    Vector local(data.n());
    for (size_t k = 0; k < report.evaluation_points.size(); ++k) {
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double d =
                data.treatment[i] * scores[i] + (1.0 - data.treatment[i]) * (1.0 - scores[i]);
            local[i] = kernel_weight(report.evaluation_points[k], report.bandwidths[k], scores[i]) / d;
        }
        const auto m1 = detail::weighted_moments(local, local, data.treatment, 1.0);
        const auto m0 = detail::weighted_moments(local, local, data.treatment, 0.0);
        report.ess_treated.push_back(m1.kish());
        report.ess_control.push_back(m0.kish());
    }

    double gsd_sum = 0.0;
    for (double g : report.gsd) {
        report.max_gsd = std::max(report.max_gsd, g);
        gsd_sum += g;
    }
    report.mean_gsd = report.gsd.empty() ? 0.0 : gsd_sum / static_cast<double>(report.gsd.size());

    double lsd_sum = 0.0;
    size_t lsd_n = 0;
    for (const auto& curve : report.lsd) {
        for (double v : curve) {
            if (std::isnan(v)) continue;
            report.max_lsd = std::max(report.max_lsd, v);
            lsd_sum += v;
            ++lsd_n;
        }
    }
    report.mean_lsd = lsd_n == 0 ? 0.0 : lsd_sum / static_cast<double>(lsd_n);
    return report;
}

}  // namespace lbcnet
