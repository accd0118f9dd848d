#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"

namespace lbcnet {

/// First/second-moment accumulators for ADAM over a flat parameter vector.
struct AdamState {
    Vector m;
    Vector v;
    long step = 0;

    explicit AdamState(Eigen::Index size) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One bias-corrected ADAM update, applied in place to `params`.
inline void adam_step(Vector& params, AdamState& state, const Vector& grad, double learning_rate) {
    if (params.size() != state.m.size() || grad.size() != state.m.size())
        fail(errc::dimension_mismatch, "adam_step: parameter/state/gradient sizes disagree");
    if (!grad.allFinite()) fail(errc::numeric_error, "adam_step: non-finite gradient");
    if (learning_rate <= 0.0) fail(errc::domain_error, "adam_step: learning rate must be positive");

    state.step += 1;
    state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grad;
    state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const double mc = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double vc = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    params.array() -=
        learning_rate * (state.m.array() / mc) / ((state.v.array() / vc).sqrt() + kAdamEps);
}

}  // namespace lbcnet
