#pragma once

// Shared construction helpers for the test suite.

#include <lbcnet/dataset.hpp>
#include <lbcnet/kernel.hpp>
#include <lbcnet/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fixtures {

using lbcnet::Matrix;
using lbcnet::Vector;

struct Instance {
    Matrix z;      // includes intercept column 0
    Vector t;      // binary
    Vector p;      // scores in (0,1)
    Vector y;      // synthetic outcome
};

// Random instance with an intercept column, standard-normal covariates,
// treatment drawn from a logistic model, and scores correlated with but not
// equal to the assignment probabilities.
inline Instance make_instance(std::uint64_t seed, int n, int l_with_intercept) {
    lbcnet::Rng rng(seed);
    Instance inst;
    inst.z = Matrix::Ones(n, l_with_intercept);
    for (int j = 1; j < l_with_intercept; ++j)
        for (int i = 0; i < n; ++i) inst.z(i, j) = rng.normal();
    inst.t.resize(n);
    inst.p.resize(n);
    inst.y.resize(n);
    for (int i = 0; i < n; ++i) {
        double lin = 0.3;
        for (int j = 1; j < l_with_intercept; ++j) lin += (j % 2 ? 0.8 : -0.5) * inst.z(i, j);
        const double truth = 1.0 / (1.0 + std::exp(-lin));
        inst.t[i] = rng.uniform() < truth ? 1.0 : 0.0;
        // scores: perturbed truth, kept away from the boundaries
        const double noisy = lin + 0.4 * rng.normal();
        inst.p[i] = std::clamp(1.0 / (1.0 + std::exp(-noisy)), 0.05, 0.95);
        inst.y[i] = 2.0 * inst.t[i] + inst.z.row(i).tail(l_with_intercept - 1).sum() + rng.normal();
    }
    // guarantee both classes
    inst.t[0] = 1.0;
    inst.t[1] = 0.0;
    return inst;
}

// A wide, well-conditioned evaluation grid covering the score range.
inline lbcnet::LocalGrid make_grid(int k) {
    lbcnet::LocalGrid grid;
    grid.span = 0.3;
    for (int i = 1; i <= k; ++i) {
        grid.centers.push_back(static_cast<double>(i) / (k + 1.0));
        grid.bandwidths.push_back(0.18 + 0.01 * i);
    }
    return grid;
}

inline std::vector<double> to_std(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(static_cast<size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows[static_cast<size_t>(i)].resize(static_cast<size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = m(i, j);
    }
    return rows;
}

inline lbcnet::Dataset to_dataset(const Instance& inst, bool with_outcome = true) {
    Matrix raw = inst.z.rightCols(inst.z.cols() - 1);
    std::vector<std::string> names;
    for (Eigen::Index j = 1; j < inst.z.cols(); ++j) names.push_back("z" + std::to_string(j));
    std::optional<Vector> y;
    if (with_outcome) y = inst.y;
    return lbcnet::Dataset::from_raw(raw, inst.t, y, names);
}

}  // namespace fixtures
