#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/logistic.hpp"
#include "lbcnet/rng.hpp"

namespace lbcnet {

enum class EstimandKind { treated_mean, ate };

struct SimulatedDataset {
    Dataset data;
    Vector true_propensity;
    double estimand = 0.0;
    EstimandKind estimand_kind = EstimandKind::ate;
    std::string scenario;
    std::uint64_t seed = 0;
};

/// Four-covariate benchmark: i.i.d. standard-normal confounders, logistic
/// treatment assignment, linear outcome with population mean 210. The
/// misspecified variant exposes fixed nonlinear transforms of the same
/// draws, so true propensities are bit-identical across the two variants
/// for one (n, seed).
///
/// Per-subject draw order: 4 confounder normals, 1 treatment uniform,
/// 1 outcome-noise normal.
inline SimulatedDataset ks_generate(Eigen::Index n, std::uint64_t seed, bool misspecified) {
    if (n < 2) fail(errc::domain_error, "ks_generate: need at least 2 subjects");
    Rng rng(seed);

    Matrix observed(n, 4);
    Vector treatment(n), outcome(n), propensity(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal(), z3 = rng.normal(), z4 = rng.normal();
        const double p = sigmoid(-z1 + 0.5 * z2 - 0.25 * z3 - 0.1 * z4);
        propensity[i] = p;
        treatment[i] = rng.uniform() < p ? 1.0 : 0.0;
        outcome[i] = 210.0 + 27.4 * z1 + 13.7 * (z2 + z3 + z4) + rng.normal();
        if (misspecified) {
            observed(i, 0) = std::exp(z1 / 2.0);
            observed(i, 1) = z1 / (1.0 + std::exp(z1)) + 10.0;
            observed(i, 2) = std::pow(z1 * z3 / 25.0 + 0.6, 3.0);
            observed(i, 3) = (z2 + z4 + 20.0) * (z2 + z4 + 20.0);
        } else {
            observed(i, 0) = z1;
            observed(i, 1) = z2;
            observed(i, 2) = z3;
            observed(i, 3) = z4;
        }
    }

    std::vector<std::string> names;
    for (int c = 1; c <= 4; ++c)
        names.push_back((misspecified ? "x" : "z") + std::to_string(c));

    SimulatedDataset out;
    out.data = Dataset::from_raw(observed, treatment, outcome, names);
    out.true_propensity = std::move(propensity);
    out.estimand = 210.0;
    out.estimand_kind = EstimandKind::treated_mean;
    out.scenario = misspecified ? "ks-mis" : "ks-correct";
    out.seed = seed;
    return out;
}

/// 84-covariate benchmark: two Bernoulli confounders driving a
/// regime-switching bivariate-normal pair, an equicorrelated normal block
/// (variance 2, covariance 0.4, drawn via a shared factor), and an
/// independent Bernoulli block. The misspecified variant adds quadratic
/// terms to the true assignment logit; observed covariates are the same.
/// True ATE is 1.
///
/// Per-subject draw order: 2 uniforms for the Bernoulli confounders,
/// 2 normals for the bivariate pair, 1 + 40 normals for the factor block,
/// 40 uniforms for the Bernoulli block, 1 treatment uniform, 1 noise normal.
inline SimulatedDataset ssmr_generate(Eigen::Index n, std::uint64_t seed, bool misspecified) {
    if (n < 2) fail(errc::domain_error, "ssmr_generate: need at least 2 subjects");
    Rng rng(seed);

    constexpr int kCov = 84;
    Matrix z(n, kCov);
    Vector treatment(n), outcome(n), propensity(n);

    // Cholesky factors of the two covariance regimes for (Z1, Z2)
    const double l1_11 = 1.0, l1_21 = 0.5, l1_22 = std::sqrt(1.0 - 0.25);
    const double l0_11 = std::sqrt(2.0), l0_21 = 0.25 / l0_11,
                 l0_22 = std::sqrt(2.0 - l0_21 * l0_21);

    for (Eigen::Index i = 0; i < n; ++i) {
        const double z4 = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const double z3 = rng.uniform() < (0.6 * z4 + 0.4 * (1.0 - z4)) ? 1.0 : 0.0;
        const double g1 = rng.normal(), g2 = rng.normal();
        const double mu1 = -z3 + z4 + 0.5 * z3 * z4;
        const double mu2 = z3 - z4 + z3 * z4;
        double z1, z2;
        if (z3 == 1.0) {
            z1 = mu1 + l1_11 * g1;
            z2 = mu2 + l1_21 * g1 + l1_22 * g2;
        } else {
            z1 = mu1 + l0_11 * g1;
            z2 = mu2 + l0_21 * g1 + l0_22 * g2;
        }
        z(i, 0) = z1;
        z(i, 1) = z2;
        z(i, 2) = z3;
        z(i, 3) = z4;

        // equicorrelated block: var 2, cov 0.4 via shared factor
        const double shared = rng.normal();
        for (int c = 4; c < 44; ++c)
            z(i, c) = std::sqrt(0.4) * shared + std::sqrt(1.6) * rng.normal();
        for (int c = 44; c < 84; ++c) z(i, c) = rng.uniform() < 0.5 ? 1.0 : 0.0;

        auto block = [&](int first, int last) {  // 1-based, inclusive
            double s = 0.0;
            for (int c = first - 1; c < last; ++c) s += z(i, c);
            return s;
        };

        double logit = -1.5 + 0.5 * z1 - 0.75 * z2 + 2.0 * z3 - 0.5 * z4 - 0.1 * block(5, 14) +
                       0.15 * block(15, 24) - 0.1 * block(45, 54) + 0.15 * block(55, 64);
        if (misspecified) logit += 0.2 * z1 * z1 + 0.1 * z1 * z2 + 0.2 * z2 * z2;
        const double p = sigmoid(logit);
        propensity[i] = p;
        const double t = rng.uniform() < p ? 1.0 : 0.0;
        treatment[i] = t;
        outcome[i] = t + 0.5 + z1 + 0.6 * z2 + 2.2 * z3 - 1.2 * z4 + block(5, 14) - block(25, 34) +
                     block(45, 54) - block(65, 74) + rng.normal();
    }

    std::vector<std::string> names;
    for (int c = 1; c <= kCov; ++c) names.push_back("z" + std::to_string(c));

    SimulatedDataset out;
    out.data = Dataset::from_raw(z, treatment, outcome, names);
    out.true_propensity = std::move(propensity);
    out.estimand = 1.0;
    out.estimand_kind = EstimandKind::ate;
    out.scenario = misspecified ? "ssmr-mis" : "ssmr-correct";
    out.seed = seed;
    return out;
}

struct Scenario {
    std::string family;  // "ks" | "ssmr"
    bool misspecified = false;
};

inline Scenario parse_scenario(const std::string& tag) {
    if (tag == "ks-correct") return {"ks", false};
    if (tag == "ks-mis") return {"ks", true};
    if (tag == "ssmr-correct") return {"ssmr", false};
    if (tag == "ssmr-mis") return {"ssmr", true};
    fail(errc::config_error,
         "unknown scenario '" + tag + "' (expected ks-correct, ks-mis, ssmr-correct, ssmr-mis)");
}

inline SimulatedDataset generate_scenario(const std::string& tag, Eigen::Index n, std::uint64_t seed) {
    const Scenario s = parse_scenario(tag);
    return s.family == "ks" ? ks_generate(n, seed, s.misspecified)
                            : ssmr_generate(n, seed, s.misspecified);
}

}  // namespace lbcnet
