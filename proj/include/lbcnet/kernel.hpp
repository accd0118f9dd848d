#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lbcnet/error.hpp"

namespace lbcnet {

// Floor for adaptive bandwidths; keeps kernel weights finite when several
// scores coincide with a grid center.
inline constexpr double kMinBandwidth = 1e-4;

/// Standard normal density (2*pi)^(-1/2) * exp(-x^2/2).
inline double gaussian_kernel(double x) {
    if (!std::isfinite(x)) fail(errc::domain_error, "gaussian_kernel: non-finite input");
    return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

/// Kernel weight of a score p in the neighborhood centered at `center`
/// with bandwidth h: h^-1 K((p - center)/h).
inline double kernel_weight(double center, double bandwidth, double p) {
    if (!(bandwidth > 0.0)) fail(errc::domain_error, "kernel_weight: bandwidth must be positive");
    return gaussian_kernel((p - center) / bandwidth) / bandwidth;
}

/// Equally spaced probability grid {k/(K+1) : k = 1..K}.
inline std::vector<double> build_grid(int count) {
    if (count < 1) fail(errc::domain_error, "build_grid: grid size must be >= 1");
    std::vector<double> centers(static_cast<std::size_t>(count));
    for (int k = 1; k <= count; ++k) {
        centers[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / (count + 1);
    }
    return centers;
}

// ceil(span * n) with protection against cases like 0.1 * 100 landing a hair
// above an integer.
inline int neighborhood_size(double span, std::size_t n) {
    const double t = span * static_cast<double>(n);
    int m = static_cast<int>(std::ceil(t - 1e-9));
    m = std::max(m, 1);
    m = std::min(m, static_cast<int>(n));
    return m;
}

/// Per-center bandwidth: distance from the center to its ceil(span*N)-th
/// nearest preliminary score, floored at kMinBandwidth. Every neighborhood
/// [c-h, c+h] then holds at least a `span` fraction of the scores.
inline std::vector<double> adaptive_bandwidths(const std::vector<double>& prelim_scores,
                                               const std::vector<double>& centers,
                                               double span) {
    if (prelim_scores.empty()) fail(errc::domain_error, "adaptive_bandwidths: empty score list");
    if (!(span > 0.0) || span > 1.0) fail(errc::domain_error, "adaptive_bandwidths: span must be in (0,1]");
    for (double c : centers) {
        if (!(c > 0.0 && c < 1.0)) fail(errc::domain_error, "adaptive_bandwidths: centers must lie in (0,1)");
    }
    const int m = neighborhood_size(span, prelim_scores.size());
    std::vector<double> bandwidths;
    bandwidths.reserve(centers.size());
    std::vector<double> dist(prelim_scores.size());
    for (double c : centers) {
        for (std::size_t j = 0; j < prelim_scores.size(); ++j) dist[j] = std::abs(prelim_scores[j] - c);
        std::nth_element(dist.begin(), dist.begin() + (m - 1), dist.end());
        bandwidths.push_back(std::max(dist[static_cast<std::size_t>(m - 1)], kMinBandwidth));
    }
    return bandwidths;
}

inline std::vector<double> adaptive_bandwidths(const Eigen::VectorXd& prelim_scores,
                                               const std::vector<double>& centers,
                                               double span) {
    return adaptive_bandwidths(
        std::vector<double>(prelim_scores.data(), prelim_scores.data() + prelim_scores.size()),
        centers, span);
}

/// Grid of local neighborhoods on the propensity scale: centers c_k,
/// bandwidths h_k and the span that produced them.
struct LocalGrid {
    std::vector<double> centers;
    std::vector<double> bandwidths;
    double span = 0.0;

    int count() const { return static_cast<int>(centers.size()); }

    void validate() const {
        if (centers.empty()) fail(errc::domain_error, "LocalGrid: needs at least one center");
        if (centers.size() != bandwidths.size())
            fail(errc::dimension_mismatch, "LocalGrid: centers/bandwidths length mismatch");
        if (!(span > 0.0) || span > 1.0) fail(errc::domain_error, "LocalGrid: span must be in (0,1]");
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (!(centers[k] > 0.0 && centers[k] < 1.0))
                fail(errc::domain_error, "LocalGrid: centers must lie in (0,1)");
            if (!(bandwidths[k] > 0.0)) fail(errc::domain_error, "LocalGrid: bandwidths must be positive");
            if (k > 0 && !(centers[k] > centers[k - 1]))
                fail(errc::domain_error, "LocalGrid: centers must be strictly increasing");
        }
    }

    static LocalGrid from_scores(int count, const std::vector<double>& prelim_scores, double span) {
        LocalGrid g;
        g.centers = build_grid(count);
        g.bandwidths = adaptive_bandwidths(prelim_scores, g.centers, span);
        g.span = span;
        g.validate();
        return g;
    }

    static LocalGrid from_scores(int count, const Eigen::VectorXd& prelim_scores, double span) {
        return from_scores(
            count,
            std::vector<double>(prelim_scores.data(), prelim_scores.data() + prelim_scores.size()),
            span);
    }
};

}  // namespace lbcnet
