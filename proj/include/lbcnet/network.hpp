#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/logistic.hpp"
#include "lbcnet/rng.hpp"

namespace lbcnet {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Per-covariate affine map fitted at ingestion so the network always sees
/// zero-mean/unit-variance inputs. Balance statistics elsewhere use the
/// original scales.
struct Standardizer {
    Vector mean;
    Vector sd;

    static Standardizer fit(const Matrix& raw) {
        const Eigen::Index n = raw.rows();
        if (n < 2) fail(errc::degenerate_data, "Standardizer: need at least two rows");
        Standardizer s;
        s.mean = raw.colwise().mean();
        s.sd.resize(raw.cols());
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            const double var = (raw.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(n);
            s.sd[c] = std::sqrt(var);
            if (!(s.sd[c] > 0.0))
                fail(errc::degenerate_data,
                     "Standardizer: covariate column " + std::to_string(c) + " is constant");
        }
        return s;
    }

    static Standardizer identity(Eigen::Index dim) {
        Standardizer s;
        s.mean = Vector::Zero(dim);
        s.sd = Vector::Ones(dim);
        return s;
    }

    Matrix apply(const Matrix& raw) const {
        if (raw.cols() != mean.size())
            fail(errc::dimension_mismatch, "Standardizer: column count mismatch");
        return (raw.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
    }
};

struct Architecture {
    int input_dim = 0;
    int hidden = 10;
};

struct LinearParams {
    Matrix weight;  // out x in
    Vector bias;
};

struct BatchNormParams {
    Vector gamma;
    Vector beta;
    Vector running_mean;
    Vector running_var;
};

/// Full state of the propensity network: two equal-width hidden layers with
/// batch norm, ReLU, and a residual skip from the first hidden activation
/// to the second, then a scalar batch-normed sigmoid head.
struct NetworkParams {
    Architecture arch;
    Standardizer standardizer;
    LinearParams lin1, lin2, lin3;
    BatchNormParams bn1, bn2, bn3;

    Eigen::Index trainable_count() const {
        const Eigen::Index m = arch.input_dim, h = arch.hidden;
        return (h * m + 3 * h) + (h * h + 3 * h) + (h + 3);
    }

    void validate() const {
        const Eigen::Index m = arch.input_dim, h = arch.hidden;
        if (m <= 0 || h <= 0) fail(errc::domain_error, "NetworkParams: non-positive dimensions");
        if (lin1.weight.rows() != h || lin1.weight.cols() != m || lin1.bias.size() != h ||
            lin2.weight.rows() != h || lin2.weight.cols() != h || lin2.bias.size() != h ||
            lin3.weight.rows() != 1 || lin3.weight.cols() != h || lin3.bias.size() != 1)
            fail(errc::dimension_mismatch, "NetworkParams: layer shape mismatch");
        if (standardizer.mean.size() != m || standardizer.sd.size() != m)
            fail(errc::dimension_mismatch, "NetworkParams: standardizer size mismatch");
        if ((standardizer.sd.array() <= 0.0).any())
            fail(errc::degenerate_data, "NetworkParams: non-positive standardizer sd");
        for (const BatchNormParams* bn : {&bn1, &bn2, &bn3}) {
            if ((bn->running_var.array() <= 0.0).any())
                fail(errc::degenerate_data, "NetworkParams: non-positive running variance");
        }
    }

    /// Trainable parameters as one flat vector, in the fixed order
    /// [W1,b1,g1,B1, W2,b2,g2,B2, W3,b3,g3,B3], weights row-major.
    /// Running statistics are not trainable and not included.
    Vector trainable() const {
        Vector out(trainable_count());
        Eigen::Index at = 0;
        auto put_mat = [&](const Matrix& w) {
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) out[at++] = w(r, c);
        };
        auto put_vec = [&](const Vector& v) {
            out.segment(at, v.size()) = v;
            at += v.size();
        };
        for (const auto& [lin, bn] : {std::pair{&lin1, &bn1}, {&lin2, &bn2}, {&lin3, &bn3}}) {
            put_mat(lin->weight);
            put_vec(lin->bias);
            put_vec(bn->gamma);
            put_vec(bn->beta);
        }
        return out;
    }

    void set_trainable(const Vector& flat) {
        if (flat.size() != trainable_count())
            fail(errc::dimension_mismatch, "set_trainable: flat length mismatch");
        Eigen::Index at = 0;
        auto take_mat = [&](Matrix& w) {
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[at++];
        };
        auto take_vec = [&](Vector& v) {
            v = flat.segment(at, v.size());
            at += v.size();
        };
        for (auto& [lin, bn] : {std::pair{&lin1, &bn1}, {&lin2, &bn2}, {&lin3, &bn3}}) {
            take_mat(lin->weight);
            take_vec(lin->bias);
            take_vec(bn->gamma);
            take_vec(bn->beta);
        }
    }
};

/// He-style fan-in initialization with a fixed seed: weights drawn
/// N(0, 2/fan_in), biases zero, batch-norm at identity, running stats (0,1).
inline NetworkParams init_params(std::uint64_t seed, const Architecture& arch) {
    if (arch.input_dim <= 0) fail(errc::domain_error, "init_params: input dim must be positive");
    if (arch.hidden <= 0) fail(errc::domain_error, "init_params: hidden width must be positive");
    const Eigen::Index m = arch.input_dim, h = arch.hidden;
    Rng rng(seed);

    auto he_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
        const double sd = std::sqrt(2.0 / static_cast<double>(cols));
        Matrix w(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = sd * rng.normal();
        return w;
    };
    auto identity_bn = [](Eigen::Index width) {
        BatchNormParams bn;
        bn.gamma = Vector::Ones(width);
        bn.beta = Vector::Zero(width);
        bn.running_mean = Vector::Zero(width);
        bn.running_var = Vector::Ones(width);
        return bn;
    };

    NetworkParams p;
    p.arch = arch;
    p.standardizer = Standardizer::identity(m);
    p.lin1 = {he_matrix(h, m), Vector::Zero(h)};
    p.lin2 = {he_matrix(h, h), Vector::Zero(h)};
    p.lin3 = {he_matrix(1, h), Vector::Zero(1)};
    p.bn1 = identity_bn(h);
    p.bn2 = identity_bn(h);
    p.bn3 = identity_bn(1);
    return p;
}

/// Everything the backward pass needs from one training-mode forward pass.
struct ForwardCache {
    Matrix x;                   // standardized input, N x M
    Matrix xhat1, xhat2;        // normalized pre-activations, N x H
    Vector invstd1, invstd2;    // per-feature 1/sqrt(var+eps)
    Matrix mask1, mask2;        // ReLU pass-through indicators (0/1)
    Matrix h1, h2;              // post-ReLU layer 1; layer 2 + residual
    Vector xhat3;               // normalized scalar head
    double invstd3 = 0.0;
    Vector sig;                 // sigmoid before clamping
    Vector clamp_mask;          // 1 where the clamp did not bind
    Vector p;                   // final clamped scores
};

namespace detail {

// Train-mode batch norm over the columns of `a`; updates running stats and
// records the normalized values and inverse stddevs for the backward pass.
inline Matrix batchnorm_train(const Matrix& a, BatchNormParams& bn, Matrix& xhat, Vector& invstd) {
    const Eigen::Index n = a.rows(), width = a.cols();
    if (n < 2) fail(errc::degenerate_data, "batch norm: training batch must have at least two rows");
    xhat.resize(n, width);
    invstd.resize(width);
    Matrix out(n, width);
    for (Eigen::Index c = 0; c < width; ++c) {
        const double mu = a.col(c).mean();
        const double var = (a.col(c).array() - mu).square().sum() / static_cast<double>(n);
        const double unbiased = var * static_cast<double>(n) / static_cast<double>(n - 1);
        invstd[c] = 1.0 / std::sqrt(var + kBatchNormEps);
        xhat.col(c) = (a.col(c).array() - mu) * invstd[c];
        out.col(c) = bn.gamma[c] * xhat.col(c).array() + bn.beta[c];
        bn.running_mean[c] = (1.0 - kBatchNormMomentum) * bn.running_mean[c] + kBatchNormMomentum * mu;
        bn.running_var[c] = (1.0 - kBatchNormMomentum) * bn.running_var[c] + kBatchNormMomentum * unbiased;
    }
    return out;
}

inline Matrix batchnorm_eval(const Matrix& a, const BatchNormParams& bn) {
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double invstd = 1.0 / std::sqrt(bn.running_var[c] + kBatchNormEps);
        out.col(c) = bn.gamma[c] * ((a.col(c).array() - bn.running_mean[c]) * invstd) + bn.beta[c];
    }
    return out;
}

// dL/dx for train-mode batch norm given dL/dy, reusing cached xhat/invstd.
inline Matrix batchnorm_backward(const Matrix& dy, const Matrix& xhat, const Vector& invstd,
                                 const Vector& gamma, Vector& dgamma, Vector& dbeta) {
    const Eigen::Index n = dy.rows(), width = dy.cols();
    const double m = static_cast<double>(n);
    dgamma.resize(width);
    dbeta.resize(width);
    Matrix dx(n, width);
    for (Eigen::Index c = 0; c < width; ++c) {
        dbeta[c] = dy.col(c).sum();
        dgamma[c] = dy.col(c).dot(xhat.col(c));
        dx.col(c) = (gamma[c] * invstd[c]) *
                    (dy.col(c).array() - dbeta[c] / m - xhat.col(c).array() * (dgamma[c] / m));
    }
    return dx;
}

inline Vector clamp_forward(const Vector& sig, Vector& mask) {
    mask = Vector::Ones(sig.size());
    Vector p = sig;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] < kScoreClamp) {
            p[i] = kScoreClamp;
            mask[i] = 0.0;
        } else if (p[i] > 1.0 - kScoreClamp) {
            p[i] = 1.0 - kScoreClamp;
            mask[i] = 0.0;
        }
    }
    return p;
}

}  // namespace detail

/// Training-mode forward pass on raw covariates. Mutates running batch-norm
/// statistics and fills `cache` for the backward pass.
inline Vector forward_train(NetworkParams& params, const Matrix& raw, ForwardCache& cache) {
    params.validate();
    if (raw.cols() != params.arch.input_dim)
        fail(errc::dimension_mismatch, "forward: input column count mismatch");
    cache.x = params.standardizer.apply(raw);

    const Matrix a1 = (cache.x * params.lin1.weight.transpose()).rowwise() + params.lin1.bias.transpose();
    const Matrix bn1_out = detail::batchnorm_train(a1, params.bn1, cache.xhat1, cache.invstd1);
    cache.mask1 = (bn1_out.array() > 0.0).cast<double>();
    cache.h1 = bn1_out.cwiseProduct(cache.mask1);

    const Matrix a2 = (cache.h1 * params.lin2.weight.transpose()).rowwise() + params.lin2.bias.transpose();
    const Matrix bn2_out = detail::batchnorm_train(a2, params.bn2, cache.xhat2, cache.invstd2);
    cache.mask2 = (bn2_out.array() > 0.0).cast<double>();
    cache.h2 = bn2_out.cwiseProduct(cache.mask2) + cache.h1;  // residual skip

    const Matrix a3 = (cache.h2 * params.lin3.weight.transpose()).rowwise() + params.lin3.bias.transpose();
    Matrix xhat3m;
    Vector invstd3v;
    const Matrix z3 = detail::batchnorm_train(a3, params.bn3, xhat3m, invstd3v);
    cache.xhat3 = xhat3m.col(0);
    cache.invstd3 = invstd3v[0];

    cache.sig.resize(z3.rows());
    for (Eigen::Index i = 0; i < z3.rows(); ++i) cache.sig[i] = sigmoid(z3(i, 0));
    cache.p = detail::clamp_forward(cache.sig, cache.clamp_mask);
    return cache.p;
}

/// Evaluation-mode forward pass: pure function of the parameters, uses
/// running statistics, bit-identical on repeated calls.
inline Vector forward_eval(const NetworkParams& params, const Matrix& raw) {
    params.validate();
    if (raw.cols() != params.arch.input_dim)
        fail(errc::dimension_mismatch, "forward: input column count mismatch");
    const Matrix x = params.standardizer.apply(raw);

    const Matrix a1 = (x * params.lin1.weight.transpose()).rowwise() + params.lin1.bias.transpose();
    const Matrix h1 = detail::batchnorm_eval(a1, params.bn1).cwiseMax(0.0);
    const Matrix a2 = (h1 * params.lin2.weight.transpose()).rowwise() + params.lin2.bias.transpose();
    const Matrix h2 = detail::batchnorm_eval(a2, params.bn2).cwiseMax(0.0) + h1;
    const Matrix a3 = (h2 * params.lin3.weight.transpose()).rowwise() + params.lin3.bias.transpose();
    const Matrix z3 = detail::batchnorm_eval(a3, params.bn3);

    Vector sig(z3.rows());
    for (Eigen::Index i = 0; i < z3.rows(); ++i) sig[i] = sigmoid(z3(i, 0));
    Vector mask;
    return detail::clamp_forward(sig, mask);
}

enum class Mode { train, eval };

inline Vector forward(NetworkParams& params, const Matrix& raw, Mode mode) {
    if (mode == Mode::eval) return forward_eval(params, raw);
    ForwardCache cache;
    return forward_train(params, raw, cache);
}

/// Gradients with the same shapes as the trainable parameters.
struct ParamGrads {
    Matrix dw1, dw2, dw3;
    Vector db1, db2, db3;
    Vector dgamma1, dgamma2, dgamma3;
    Vector dbeta1, dbeta2, dbeta3;

    Vector flatten() const {
        Eigen::Index total = dw1.size() + db1.size() + dgamma1.size() + dbeta1.size() +
                             dw2.size() + db2.size() + dgamma2.size() + dbeta2.size() +
                             dw3.size() + db3.size() + dgamma3.size() + dbeta3.size();
        Vector out(total);
        Eigen::Index at = 0;
        auto put_mat = [&](const Matrix& w) {
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) out[at++] = w(r, c);
        };
        auto put_vec = [&](const Vector& v) {
            out.segment(at, v.size()) = v;
            at += v.size();
        };
        put_mat(dw1); put_vec(db1); put_vec(dgamma1); put_vec(dbeta1);
        put_mat(dw2); put_vec(db2); put_vec(dgamma2); put_vec(dbeta2);
        put_mat(dw3); put_vec(db3); put_vec(dgamma3); put_vec(dbeta3);
        return out;
    }
};

/// Backpropagates dL/dp (gradient w.r.t. the clamped output scores) through
/// the cached training-mode forward pass.
inline ParamGrads backward(const NetworkParams& params, const ForwardCache& cache, const Vector& dp) {
    if (dp.size() != cache.p.size()) fail(errc::dimension_mismatch, "backward: dp length mismatch");

    // head: clamp is identity where it did not bind, then sigmoid, then BN3
    Matrix dz3(dp.size(), 1);
    for (Eigen::Index i = 0; i < dp.size(); ++i) {
        const double s = cache.sig[i];
        dz3(i, 0) = dp[i] * cache.clamp_mask[i] * s * (1.0 - s);
    }
    ParamGrads g;
    {
        Matrix xhat3m = cache.xhat3;
        Vector invstd3v(1);
        invstd3v[0] = cache.invstd3;
        const Matrix da3 =
            detail::batchnorm_backward(dz3, xhat3m, invstd3v, params.bn3.gamma, g.dgamma3, g.dbeta3);
        g.dw3 = da3.transpose() * cache.h2;  // 1 x H
        g.db3 = da3.colwise().sum();
        // fan out into the residual sum h2 = relu(bn2) + h1
        const Matrix dh2 = da3 * params.lin3.weight;  // N x H
        const Matrix dbn2 = dh2.cwiseProduct(cache.mask2);
        const Matrix da2 =
            detail::batchnorm_backward(dbn2, cache.xhat2, cache.invstd2, params.bn2.gamma, g.dgamma2, g.dbeta2);
        g.dw2 = da2.transpose() * cache.h1;
        g.db2 = da2.colwise().sum();
        const Matrix dh1 = dh2 + da2 * params.lin2.weight;  // skip path + layer-2 path
        const Matrix dbn1 = dh1.cwiseProduct(cache.mask1);
        const Matrix da1 =
            detail::batchnorm_backward(dbn1, cache.xhat1, cache.invstd1, params.bn1.gamma, g.dgamma1, g.dbeta1);
        g.dw1 = da1.transpose() * cache.x;
        g.db1 = da1.colwise().sum();
    }
    return g;
}

}  // namespace lbcnet
