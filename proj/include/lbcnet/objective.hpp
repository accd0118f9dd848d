#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lbcnet/dataset.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/kernel.hpp"

namespace lbcnet {

// Kernel mass below this at a grid point means nobody lives there.
inline constexpr double kNeighborhoodFloor = 1e-8;

/// Kernel-localized inverse-probability weight: the kernel weight at the
/// subject's score divided by p for the treated, by (1-p) for controls.
inline double local_ipw_weight(double center, double bandwidth, double score, double treatment) {
    if (score <= 0.0 || score >= 1.0) fail(errc::domain_error, "local_ipw_weight: score outside (0,1)");
    const double d = treatment * score + (1.0 - treatment) * (1.0 - score);
    return kernel_weight(center, bandwidth, score) / d;
}

/// Signed, weighted covariate contrast at one grid point:
///   sum_j w(c,h,p_j) * (2T_j - 1) * Z_j / d_j,   d_j = T_j p_j + (1-T_j)(1-p_j).
/// Zero when kernel-weighted treated and control covariate means agree.
inline Vector local_balance_vector(double center, double bandwidth,
                                   const Matrix& covariates,
                                   const Vector& treatment,
                                   const Vector& scores) {
    const Eigen::Index n = covariates.rows();
    if (treatment.size() != n || scores.size() != n)
        fail(errc::dimension_mismatch, "local_balance_vector: row mismatch");
    Vector d1 = Vector::Zero(covariates.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = local_ipw_weight(center, bandwidth, scores[j], treatment[j]);
        const double sign = 2.0 * treatment[j] - 1.0;
        d1 += (w * sign) * covariates.row(j).transpose();
    }
    return d1;
}

/// Scale matrix for the balance contrast at one grid point:
///   [c(1-c)]^{-1} sum_j w(c,h,p_j)^2 Z_j Z_j^T.
inline Matrix local_scale_matrix(double center, double bandwidth,
                                 const Matrix& covariates,
                                 const Vector& scores) {
    const Eigen::Index n = covariates.rows();
    if (scores.size() != n) fail(errc::dimension_mismatch, "local_scale_matrix: row mismatch");
    if (center <= 0.0 || center >= 1.0) fail(errc::domain_error, "local_scale_matrix: center outside (0,1)");
    Matrix sigma = Matrix::Zero(covariates.cols(), covariates.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = kernel_weight(center, bandwidth, scores[j]);
        sigma.noalias() += (w * w) * (covariates.row(j).transpose() * covariates.row(j));
    }
    sigma /= center * (1.0 - center);
    return sigma;
}

/// Kernel-weighted treatment-minus-score residual at one grid point,
/// standardized by sqrt(c(1-c)).
inline double calibration_residual(double center, double bandwidth,
                                   const Vector& treatment,
                                   const Vector& scores) {
    if (treatment.size() != scores.size())
        fail(errc::dimension_mismatch, "calibration_residual: length mismatch");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < treatment.size(); ++j) {
        acc += kernel_weight(center, bandwidth, scores[j]) * (treatment[j] - scores[j]);
    }
    return acc / std::sqrt(center * (1.0 - center));
}

namespace detail {

/// LLT with escalating diagonal jitter. Starts at 1e-6 * mean diagonal
/// scale, multiplies by 10 on failure, gives up after 10 attempts.
inline Eigen::LLT<Matrix> jittered_llt(const Matrix& sigma, int grid_index) {
    if (!sigma.allFinite())
        fail(errc::numeric_error, "scale matrix at grid point " + std::to_string(grid_index) +
                                      " contains non-finite entries");
    const double scale = sigma.trace() / static_cast<double>(sigma.rows());
    double jitter = 1e-6 * scale;
    Eigen::LLT<Matrix> llt(sigma);
    for (int attempt = 0; attempt < 10 && llt.info() != Eigen::Success; ++attempt) {
        Matrix work = sigma + jitter * Matrix::Identity(sigma.rows(), sigma.cols());
        llt.compute(work);
        jitter *= 10.0;
    }
    if (llt.info() != Eigen::Success)
        fail(errc::numeric_error,
             "scale matrix at grid point " + std::to_string(grid_index) +
                 " is not positive definite after jitter escalation");
    return llt;
}

}  // namespace detail

/// Per-grid-point detail behind one objective evaluation; serializable for
/// trace inspection.
struct LossComponents {
    double balance = 0.0;                    // mean quadratic form
    double calibration = 0.0;                // mean standardized residual ratio
    std::vector<Vector> balance_vectors;     // one per grid point
    std::vector<Matrix> scale_matrices;      // one per grid point
    std::vector<double> calibration_residuals;
    std::vector<double> kernel_mass;         // sum_j w(c_k, p_j)
};

/// Mean over the grid of D^T Sigma^{-1} D. Optionally hands back the
/// whitened contrasts u_k = Sigma_k^{-1} D_k, which the gradient reuses.
inline double balance_loss(const LocalGrid& grid, const Matrix& covariates,
                           const Vector& treatment, const Vector& scores,
                           std::vector<Vector>* whitened = nullptr) {
    grid.validate();
    const int k = grid.count();
    if (whitened) whitened->assign(static_cast<size_t>(k), Vector());
    double q1 = 0.0;
    for (int i = 0; i < k; ++i) {
        const Vector d1 =
            local_balance_vector(grid.centers[i], grid.bandwidths[i], covariates, treatment, scores);
        const Matrix sigma = local_scale_matrix(grid.centers[i], grid.bandwidths[i], covariates, scores);
        const Eigen::LLT<Matrix> llt = detail::jittered_llt(sigma, i);
        const Vector u = llt.solve(d1);
        q1 += d1.dot(u);
        if (whitened) (*whitened)[static_cast<size_t>(i)] = u;
    }
    return q1 / static_cast<double>(k);
}

/// All per-grid-point scale matrices at the given scores.
inline std::vector<Matrix> scale_matrices(const LocalGrid& grid, const Matrix& covariates,
                                          const Vector& scores) {
    grid.validate();
    std::vector<Matrix> out;
    out.reserve(static_cast<size_t>(grid.count()));
    for (int i = 0; i < grid.count(); ++i)
        out.push_back(local_scale_matrix(grid.centers[i], grid.bandwidths[i], covariates, scores));
    return out;
}

/// Balance loss against externally supplied (frozen) scale matrices; the
/// detached-gradient counterpart of balance_loss.
inline double balance_loss_with_scales(const LocalGrid& grid, const Matrix& covariates,
                                       const Vector& treatment, const Vector& scores,
                                       const std::vector<Matrix>& sigmas) {
    grid.validate();
    const int k = grid.count();
    if (static_cast<int>(sigmas.size()) != k)
        fail(errc::dimension_mismatch, "balance_loss_with_scales: scale count mismatch");
    double q1 = 0.0;
    for (int i = 0; i < k; ++i) {
        const Vector d1 =
            local_balance_vector(grid.centers[i], grid.bandwidths[i], covariates, treatment, scores);
        const Eigen::LLT<Matrix> llt = detail::jittered_llt(sigmas[static_cast<size_t>(i)], i);
        q1 += d1.dot(llt.solve(d1));
    }
    return q1 / static_cast<double>(k);
}

/// Mean over the grid of [sum_j w (T_j - p_j)^2] / [c(1-c) sum_j w].
/// Near the true propensity this is a kernel-smoothed variance ratio and
/// hovers around 1.
inline double calibration_loss(const LocalGrid& grid, const Vector& treatment,
                               const Vector& scores) {
    grid.validate();
    if (treatment.size() != scores.size())
        fail(errc::dimension_mismatch, "calibration_loss: length mismatch");
    const int k = grid.count();
    double q2 = 0.0;
    for (int i = 0; i < k; ++i) {
        const double c = grid.centers[i];
        const double h = grid.bandwidths[i];
        double num = 0.0, mass = 0.0;
        for (Eigen::Index j = 0; j < treatment.size(); ++j) {
            const double w = kernel_weight(c, h, scores[j]);
            const double r = treatment[j] - scores[j];
            num += w * r * r;
            mass += w;
        }
        if (mass < kNeighborhoodFloor)
            fail(errc::degenerate_neighborhood,
                 "calibration_loss: no kernel mass at grid point " + std::to_string(i));
        q2 += num / (c * (1.0 - c) * mass);
    }
    return q2 / static_cast<double>(k);
}

struct ObjectiveValue {
    double total = 0.0;
    double balance = 0.0;
    double calibration = 0.0;
};

/// Q = balance + lambda * calibration.
inline ObjectiveValue objective(const LocalGrid& grid, const Matrix& covariates,
                                const Vector& treatment, const Vector& scores,
                                double lambda) {
    if (lambda < 0.0) fail(errc::domain_error, "objective: lambda must be >= 0");
    ObjectiveValue v;
    v.balance = balance_loss(grid, covariates, treatment, scores);
    v.calibration = calibration_loss(grid, treatment, scores);
    v.total = v.balance + lambda * v.calibration;
    return v;
}

/// Full per-grid-point breakdown of one evaluation.
inline LossComponents loss_components(const LocalGrid& grid, const Matrix& covariates,
                                      const Vector& treatment, const Vector& scores) {
    grid.validate();
    const int k = grid.count();
    LossComponents out;
    out.balance_vectors.reserve(static_cast<size_t>(k));
    out.scale_matrices.reserve(static_cast<size_t>(k));
    out.calibration_residuals.reserve(static_cast<size_t>(k));
    out.kernel_mass.reserve(static_cast<size_t>(k));
    double q1 = 0.0, q2 = 0.0;
    for (int i = 0; i < k; ++i) {
        const double c = grid.centers[i];
        const double h = grid.bandwidths[i];
        Vector d1 = local_balance_vector(c, h, covariates, treatment, scores);
        Matrix sigma = local_scale_matrix(c, h, covariates, scores);
        const Eigen::LLT<Matrix> llt = detail::jittered_llt(sigma, i);
        q1 += d1.dot(llt.solve(d1));

        double num = 0.0, mass = 0.0;
        for (Eigen::Index j = 0; j < treatment.size(); ++j) {
            const double w = kernel_weight(c, h, scores[j]);
            const double r = treatment[j] - scores[j];
            num += w * r * r;
            mass += w;
        }
        if (mass < kNeighborhoodFloor)
            fail(errc::degenerate_neighborhood,
                 "loss_components: no kernel mass at grid point " + std::to_string(i));
        q2 += num / (c * (1.0 - c) * mass);

        out.balance_vectors.push_back(std::move(d1));
        out.scale_matrices.push_back(std::move(sigma));
        out.calibration_residuals.push_back(calibration_residual(c, h, treatment, scores));
        out.kernel_mass.push_back(mass);
    }
    out.balance = q1 / static_cast<double>(k);
    out.calibration = q2 / static_cast<double>(k);
    return out;
}

}  // namespace lbcnet
