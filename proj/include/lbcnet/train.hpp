#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lbcnet/adam.hpp"
#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/kernel.hpp"
#include "lbcnet/logistic.hpp"
#include "lbcnet/network.hpp"
#include "lbcnet/objective.hpp"

namespace lbcnet {

enum class LossKind { lbc, bce };

/// Whether the gradient differentiates through the scale matrices (full,
/// the default: matches what generic autodiff of the objective computes)
/// or treats them as constants per evaluation (detached).
enum class ScaleGradMode { full, detached };

struct TrainConfig {
    double learning_rate = 0.005;
    int epochs = 20000;
    double lambda = 1.0;
    int grid_size = 19;
    double span = 0.1;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::lbc;
    ScaleGradMode scale_mode = ScaleGradMode::full;
    int hidden = 10;

    void validate() const {
        if (learning_rate <= 0.0) fail(errc::config_error, "TrainConfig: learning rate must be positive");
        if (epochs < 1) fail(errc::config_error, "TrainConfig: epochs must be >= 1");
        if (lambda < 0.0) fail(errc::config_error, "TrainConfig: lambda must be >= 0");
        if (grid_size < 1) fail(errc::config_error, "TrainConfig: grid size must be >= 1");
        if (!(span > 0.0 && span <= 1.0)) fail(errc::config_error, "TrainConfig: span must be in (0,1]");
        if (hidden < 1) fail(errc::config_error, "TrainConfig: hidden width must be >= 1");
    }
};

struct TraceEntry {
    double total = 0.0;
    double balance = 0.0;      // zero under the cross-entropy loss
    double calibration = 0.0;  // zero under the cross-entropy loss
};

struct PropensityFit {
    NetworkParams params;
    Vector scores;  // eval-mode, clamped into (0,1)
    std::vector<TraceEntry> trace;
    LocalGrid grid;
    TrainConfig config;
    std::vector<std::string> warnings;
};

struct ScoreGrad {
    ObjectiveValue value;
    Vector dscore;  // d(loss)/d(score_j)
};

/// Balance + calibration loss and its exact gradient with respect to the
/// score vector. One pass per grid point; kernel weights are shared between
/// the loss terms and their derivatives.
inline ScoreGrad lbc_loss_and_score_grad(const LocalGrid& grid, const Matrix& covariates,
                                         const Vector& treatment, const Vector& scores,
                                         double lambda, ScaleGradMode mode) {
    grid.validate();
    const Eigen::Index n = covariates.rows();
    if (treatment.size() != n || scores.size() != n)
        fail(errc::dimension_mismatch, "lbc_loss_and_score_grad: row mismatch");
    const int kcount = grid.count();
    const double kinv = 1.0 / static_cast<double>(kcount);

    const Eigen::ArrayXd p = scores.array();
    const Eigen::ArrayXd t = treatment.array();
    const Eigen::ArrayXd sign = 2.0 * t - 1.0;
    const Eigen::ArrayXd denom = t * p + (1.0 - t) * (1.0 - p);
    const Eigen::ArrayXd resid = t - p;

    Eigen::ArrayXd grad = Eigen::ArrayXd::Zero(n);
    double q1 = 0.0, q2 = 0.0;
    Matrix weighted(n, covariates.cols());

    for (int k = 0; k < kcount; ++k) {
        const double c = grid.centers[k];
        const double h = grid.bandwidths[k];
        const Eigen::ArrayXd x = (p - c) / h;
        const Eigen::ArrayXd w = (-0.5 * x.square()).exp() * (0.3989422804014327 / h);
        const Eigen::ArrayXd wp = -x * w / h;  // dw/dp

        // balance contrast, scale matrix, whitened contrast
        const Eigen::ArrayXd vweight = w * sign / denom;
        const Vector d1 = covariates.transpose() * vweight.matrix();
        weighted = (w * w).matrix().asDiagonal() * covariates;
        Matrix sigma = (covariates.transpose() * weighted) / (c * (1.0 - c));
        const Eigen::LLT<Matrix> llt = detail::jittered_llt(sigma, k);
        const Vector u = llt.solve(d1);
        q1 += d1.dot(u);
        const Eigen::ArrayXd a = (covariates * u).array();

        Eigen::ArrayXd gk = 2.0 * a * (wp * sign / denom - w / denom.square());
        if (mode == ScaleGradMode::full) {
            gk -= 2.0 * w * wp * a.square() / (c * (1.0 - c));
        }

        // calibration ratio at this grid point
        const double mass = w.sum();
        if (mass < kNeighborhoodFloor)
            fail(errc::degenerate_neighborhood,
                 "loss: no kernel mass at grid point " + std::to_string(k));
        const double anum = (w * resid.square()).sum();
        const double b = c * (1.0 - c) * mass;
        q2 += anum / b;
        const Eigen::ArrayXd g2k =
            (wp * resid.square() - 2.0 * w * resid) / b - (anum / b) * (c * (1.0 - c) / b) * wp;

        grad += gk + lambda * g2k;
    }

    ScoreGrad out;
    out.value.balance = q1 * kinv;
    out.value.calibration = q2 * kinv;
    out.value.total = out.value.balance + lambda * out.value.calibration;
    out.dscore = (grad * kinv).matrix();
    return out;
}

/// Mean binary cross-entropy and its score gradient.
inline ScoreGrad bce_loss_and_score_grad(const Vector& treatment, const Vector& scores) {
    if (treatment.size() != scores.size())
        fail(errc::dimension_mismatch, "bce_loss_and_score_grad: length mismatch");
    const double n = static_cast<double>(scores.size());
    const Eigen::ArrayXd p = scores.array();
    const Eigen::ArrayXd t = treatment.array();
    ScoreGrad out;
    out.value.total = -(t * p.log() + (1.0 - t) * (1.0 - p).log()).sum() / n;
    out.value.balance = 0.0;
    out.value.calibration = 0.0;
    out.dscore = (-(t / p - (1.0 - t) / (1.0 - p)) / n).matrix();
    return out;
}

struct LossGrad {
    ObjectiveValue value;
    Vector grad;  // w.r.t. the flat trainable parameter vector
};

/// One training-mode forward/backward evaluation: the loss at the current
/// parameters and its exact gradient. Mutates running batch-norm statistics,
/// as a training step does.
inline LossGrad loss_and_gradient(NetworkParams& params, const Dataset& data,
                                  const LocalGrid& grid, const TrainConfig& config) {
    config.validate();
    ForwardCache cache;
    const Vector p = forward_train(params, data.raw_covariates(), cache);
    const ScoreGrad sg = config.loss == LossKind::bce
                             ? bce_loss_and_score_grad(data.treatment, p)
                             : lbc_loss_and_score_grad(grid, data.covariates, data.treatment, p,
                                                       config.lambda, config.scale_mode);
    if (!std::isfinite(sg.value.total))
        fail(errc::numeric_error, "loss evaluated to a non-finite value");
    LossGrad out;
    out.value = sg.value;
    out.grad = backward(params, cache, sg.dscore).flatten();
    return out;
}

using TrainCallback = std::function<void(int epoch, const NetworkParams& params)>;

/// Full-batch ADAM descent for the configured number of epochs. The trace
/// records the loss at the parameters each step starts from; final scores
/// are computed in eval mode. Deterministic given the seed.
inline PropensityFit train(const Dataset& data, const LocalGrid& grid, const TrainConfig& config,
                           const TrainCallback& checkpoint = {}) {
    config.validate();
    data.validate();
    data.require_both_classes();
    grid.validate();

    Architecture arch{static_cast<int>(data.raw_covariates().cols()), config.hidden};
    NetworkParams params = init_params(config.seed, arch);
    params.standardizer = Standardizer::fit(data.raw_covariates());

    Vector flat = params.trainable();
    AdamState opt(flat.size());

    PropensityFit fit;
    fit.grid = grid;
    fit.config = config;
    fit.trace.reserve(static_cast<size_t>(config.epochs));

    // The local-balance asymptotics assume non-overlapping neighborhoods
    // (2*h_k <= grid spacing). Adaptive bandwidths routinely exceed that at
    // practical sample sizes; flag it rather than refuse to fit.
    const double spacing = 1.0 / (grid.count() + 1.0);
    const double widest = 2.0 * *std::max_element(grid.bandwidths.begin(), grid.bandwidths.end());
    if (widest > spacing)
        fit.warnings.push_back("widest neighborhood (2h = " + std::to_string(widest) +
                               ") exceeds the grid spacing " + std::to_string(spacing) +
                               "; neighborhoods overlap");

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        try {
            LossGrad lg = loss_and_gradient(params, data, grid, config);
            fit.trace.push_back({lg.value.total, lg.value.balance, lg.value.calibration});
            adam_step(flat, opt, lg.grad, config.learning_rate);
            params.set_trainable(flat);
        } catch (const Error& e) {
            fail(e.code(), "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (checkpoint) checkpoint(epoch, params);
    }

    fit.params = std::move(params);
    fit.scores = forward_eval(fit.params, data.raw_covariates());
    return fit;
}

/// End-to-end propensity fit: preliminary logistic scores anchor the local
/// grid (centers and nearest-neighbor bandwidths), then the network is
/// trained against it.
inline PropensityFit fit_propensity(const Dataset& data, const TrainConfig& config,
                                    const TrainCallback& checkpoint = {}) {
    config.validate();
    data.validate();
    data.require_both_classes();

    LogisticModel prelim = fit_logistic(data);
    const Vector prelim_scores = predict_proba(prelim, data.covariates);
    const LocalGrid grid = LocalGrid::from_scores(config.grid_size, prelim_scores, config.span);

    PropensityFit fit = train(data, grid, config, checkpoint);
    fit.warnings.insert(fit.warnings.begin(), prelim.warnings.begin(), prelim.warnings.end());
    return fit;
}

}  // namespace lbcnet
