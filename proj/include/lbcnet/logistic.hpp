#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"

namespace lbcnet {

// Probability clamp used in likelihood evaluation; simulated data is
// separation-prone and log(0) must stay off the table.
inline constexpr double kLikelihoodClamp = 1e-12;

struct LogisticModel {
    Vector coefficients;   // length L, intercept first
    bool converged = false;
    int iterations = 0;
    double deviance = 0.0;
    std::vector<std::string> warnings;
};

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Fitted probabilities sigmoid(Z * beta), clamped into the open interval
/// (0,1) so downstream logs and weights stay finite.
inline Vector predict_proba(const LogisticModel& model, const Matrix& covariates) {
    if (covariates.cols() != model.coefficients.size())
        fail(errc::dimension_mismatch, "predict_proba: covariate columns != coefficient length");
    Vector eta = covariates * model.coefficients;
    Vector p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        p[i] = std::min(std::max(sigmoid(eta[i]), 1e-13), 1.0 - 1e-13);
    }
    return p;
}

namespace detail {

inline double binomial_deviance(const Vector& t, const Vector& p) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double pi = std::min(std::max(p[i], kLikelihoodClamp), 1.0 - kLikelihoodClamp);
        ll += t[i] * std::log(pi) + (1.0 - t[i]) * std::log(1.0 - pi);
    }
    return -2.0 * ll;
}

}  // namespace detail

/// Main-effects logistic regression of T on Z by iteratively reweighted
/// least squares with step-halving. Converged when the score equations are
/// satisfied to 1e-8 (max component) within 100 iterations; exact
/// separation typically exhausts the cap and is reported as a warning.
inline LogisticModel fit_logistic(const Matrix& covariates, const Vector& treatment) {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index l = covariates.cols();
    if (n != treatment.size()) fail(errc::dimension_mismatch, "fit_logistic: rows != treatment length");
    if (n < l) fail(errc::degenerate_data, "fit_logistic: fewer rows than coefficients");
    const double ones = treatment.sum();
    if (ones <= 0.0 || ones >= static_cast<double>(n))
        fail(errc::degenerate_data, "fit_logistic: treatment contains a single class");

    constexpr int kMaxIter = 100;
    constexpr double kScoreTol = 1e-8;

    LogisticModel model;
    model.coefficients = Vector::Zero(l);
    Vector p = predict_proba(model, covariates);
    double dev = detail::binomial_deviance(treatment, p);

    for (int iter = 1; iter <= kMaxIter; ++iter) {
        model.iterations = iter;
        const Vector score = covariates.transpose() * (treatment - p);
        // A saturated probability means the likelihood is still climbing
        // toward the boundary (separation): the clamp alone can silence the
        // score equations, so it must not count as convergence.
        const bool saturated = (p.array() <= kLikelihoodClamp).any() ||
                               (p.array() >= 1.0 - kLikelihoodClamp).any();
        if (!saturated && score.cwiseAbs().maxCoeff() < kScoreTol) {
            model.converged = true;
            break;
        }
        const Vector w = p.array() * (1.0 - p.array());
        const Matrix info = covariates.transpose() * w.asDiagonal() * covariates;
        Vector step = info.ldlt().solve(score);
        if (!step.allFinite()) break;  // no usable direction (singular information)

        // step-halving keeps the deviance monotone
        double new_dev = 0.0;
        Vector candidate;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            candidate = model.coefficients + step;
            LogisticModel trial;
            trial.coefficients = candidate;
            const Vector trial_p = predict_proba(trial, covariates);
            new_dev = detail::binomial_deviance(treatment, trial_p);
            if (new_dev <= dev + 1e-12) {
                model.coefficients = candidate;
                p = trial_p;
                dev = new_dev;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no usable descent direction left
    }
    model.deviance = dev;
    if (!model.converged) {
        model.warnings.push_back(
            "logistic fit did not converge in " + std::to_string(model.iterations) +
            " iterations (possible separation); coefficients returned at the cap");
    }
    return model;
}

inline LogisticModel fit_logistic(const Dataset& data) {
    data.validate();
    return fit_logistic(data.covariates, data.treatment);
}

}  // namespace lbcnet
