#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lbcnet/error.hpp"

namespace lbcnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Scores entering any inverse-probability weighting are clamped to this
// open interval so weights stay bounded.
inline constexpr double kScoreClamp = 1e-6;

inline Vector clamp_scores(const Vector& p) {
    return p.array().max(kScoreClamp).min(1.0 - kScoreClamp).matrix();
}

/// Observational sample. `covariates` carries the intercept in column 0;
/// balance statistics use the full matrix while the propensity network
/// consumes the remaining columns.
struct Dataset {
    Matrix covariates;                          // N x L, column 0 identically 1
    Vector treatment;                           // entries in {0,1}
    std::optional<Vector> outcome;              // required only for effect estimation
    std::vector<std::string> covariate_names;   // length L, names[0] == "(intercept)"
    std::vector<std::string> ids;               // optional, length N when present

    Eigen::Index n() const { return covariates.rows(); }
    Eigen::Index dim() const { return covariates.cols(); }

    // Covariates without the intercept column (network input).
    Matrix raw_covariates() const { return covariates.rightCols(covariates.cols() - 1); }

    void validate() const {
        if (covariates.rows() != treatment.size())
            fail(errc::dimension_mismatch, "Dataset: covariate rows != treatment length");
        if (outcome && outcome->size() != treatment.size())
            fail(errc::dimension_mismatch, "Dataset: outcome length != treatment length");
        if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != treatment.size())
            fail(errc::dimension_mismatch, "Dataset: id count != treatment length");
        if (covariate_names.size() != static_cast<std::size_t>(covariates.cols()))
            fail(errc::dimension_mismatch, "Dataset: covariate name count != column count");
        if (covariates.cols() < 1 || (covariates.col(0).array() != 1.0).any())
            fail(errc::domain_error, "Dataset: column 0 must be the intercept (all ones)");
        for (Eigen::Index i = 0; i < treatment.size(); ++i) {
            if (treatment[i] != 0.0 && treatment[i] != 1.0)
                fail(errc::domain_error, "Dataset: treatment must be 0/1 at row " + std::to_string(i + 1));
        }
    }

    bool has_both_classes() const {
        const double s = treatment.sum();
        return s > 0.0 && s < static_cast<double>(treatment.size());
    }

    void require_both_classes() const {
        if (!has_both_classes())
            fail(errc::degenerate_data, "Dataset: treatment indicator contains a single class");
    }

    static Dataset from_raw(Matrix raw, Vector t, std::optional<Vector> y,
                            std::vector<std::string> names, std::vector<std::string> row_ids = {}) {
        Dataset d;
        d.covariates.resize(raw.rows(), raw.cols() + 1);
        d.covariates.col(0).setOnes();
        d.covariates.rightCols(raw.cols()) = raw;
        d.treatment = std::move(t);
        d.outcome = std::move(y);
        d.covariate_names.reserve(names.size() + 1);
        d.covariate_names.emplace_back("(intercept)");
        for (auto& nm : names) d.covariate_names.push_back(std::move(nm));
        d.ids = std::move(row_ids);
        d.validate();
        return d;
    }
};

}  // namespace lbcnet
