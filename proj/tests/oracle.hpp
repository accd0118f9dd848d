#pragma once

// Reference implementations used only by tests. Straight loops over
// std::vector, no linear-algebra library: a disagreement with the production
// headers should point at the production code, not a shared dependency.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // row-major

inline double kernel(double c, double h, double p) {
    const double x = (p - c) / h;
    return std::exp(-0.5 * x * x) / (h * std::sqrt(8.0 * std::atan(1.0)));
}

inline double arm_denom(double t, double p) { return t == 1.0 ? p : 1.0 - p; }

// Balance contrast at one grid point: sum_j w_kj (2T_j - 1) Z_j / d_j.
inline std::vector<double> d1k(const Mat& z, const std::vector<double>& t,
                               const std::vector<double>& p, double c, double h) {
    const size_t n = z.size(), l = z[0].size();
    std::vector<double> out(l, 0.0);
    for (size_t j = 0; j < n; ++j) {
        const double w = kernel(c, h, p[j]);
        const double v = w * (2.0 * t[j] - 1.0) / arm_denom(t[j], p[j]);
        for (size_t m = 0; m < l; ++m) out[m] += v * z[j][m];
    }
    return out;
}

// Scale matrix at one grid point: [c(1-c)]^-1 sum_j w^2 Z_j Z_j^T.
inline Mat sigma_k(const Mat& z, const std::vector<double>& p, double c, double h) {
    const size_t n = z.size(), l = z[0].size();
    Mat out(l, std::vector<double>(l, 0.0));
    for (size_t j = 0; j < n; ++j) {
        const double w = kernel(c, h, p[j]);
        for (size_t a = 0; a < l; ++a)
            for (size_t b = 0; b < l; ++b) out[a][b] += w * w * z[j][a] * z[j][b];
    }
    for (auto& row : out)
        for (auto& v : row) v /= c * (1.0 - c);
    return out;
}

// Gauss-Jordan inverse with partial pivoting. Test instances are chosen
// well-conditioned, so no jitter path is needed here.
inline Mat invert(Mat a) {
    const size_t l = a.size();
    Mat inv(l, std::vector<double>(l, 0.0));
    for (size_t i = 0; i < l; ++i) inv[i][i] = 1.0;
    for (size_t col = 0; col < l; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < l; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("oracle::invert: singular matrix");
        std::swap(a[pivot], a[col]);
        std::swap(inv[pivot], inv[col]);
        const double d = a[col][col];
        for (size_t m = 0; m < l; ++m) {
            a[col][m] /= d;
            inv[col][m] /= d;
        }
        for (size_t r = 0; r < l; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (size_t m = 0; m < l; ++m) {
                a[r][m] -= f * a[col][m];
                inv[r][m] -= f * inv[col][m];
            }
        }
    }
    return inv;
}

inline double quadratic_form(const std::vector<double>& v, const Mat& minv) {
    double out = 0.0;
    for (size_t a = 0; a < v.size(); ++a)
        for (size_t b = 0; b < v.size(); ++b) out += v[a] * minv[a][b] * v[b];
    return out;
}

inline double q1(const Mat& z, const std::vector<double>& t, const std::vector<double>& p,
                 const std::vector<double>& centers, const std::vector<double>& bandwidths) {
    double total = 0.0;
    for (size_t k = 0; k < centers.size(); ++k) {
        const auto d1 = d1k(z, t, p, centers[k], bandwidths[k]);
        const auto sinv = invert(sigma_k(z, p, centers[k], bandwidths[k]));
        total += quadratic_form(d1, sinv);
    }
    return total / static_cast<double>(centers.size());
}

// Calibration contrast at one grid point: sum_j w (T_j - p_j) / sqrt(c(1-c)).
inline double d2k(const std::vector<double>& t, const std::vector<double>& p, double c,
                  double h) {
    double out = 0.0;
    for (size_t j = 0; j < t.size(); ++j) out += kernel(c, h, p[j]) * (t[j] - p[j]);
    return out / std::sqrt(c * (1.0 - c));
}

inline double q2(const std::vector<double>& t, const std::vector<double>& p,
                 const std::vector<double>& centers, const std::vector<double>& bandwidths) {
    double total = 0.0;
    for (size_t k = 0; k < centers.size(); ++k) {
        double num = 0.0, mass = 0.0;
        for (size_t j = 0; j < t.size(); ++j) {
            const double w = kernel(centers[k], bandwidths[k], p[j]);
            num += w * (t[j] - p[j]) * (t[j] - p[j]);
            mass += w;
        }
        total += num / (centers[k] * (1.0 - centers[k]) * mass);
    }
    return total / static_cast<double>(centers.size());
}

// Weighted standardized mean difference in percent; weighted variances use
// the weight-mass denominator.
inline double standardized_pct(const std::vector<double>& x, const std::vector<double>& t,
                               const std::vector<double>& w) {
    double m1 = 0.0, m0 = 0.0, s1 = 0.0, s0 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (t[i] == 1.0) {
            m1 += w[i] * x[i];
            s1 += w[i];
        } else {
            m0 += w[i] * x[i];
            s0 += w[i];
        }
    }
    m1 /= s1;
    m0 /= s0;
    double v1 = 0.0, v0 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - (t[i] == 1.0 ? m1 : m0);
        (t[i] == 1.0 ? v1 : v0) += w[i] * d * d;
    }
    v1 /= s1;
    v0 /= s0;
    const double pooled = 0.5 * (v1 + v0);
    if (pooled == 0.0)
        return m1 == m0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 100.0 * std::fabs(m1 - m0) / std::sqrt(pooled);
}

inline double gsd(const std::vector<double>& x, const std::vector<double>& t,
                  const std::vector<double>& p) {
    std::vector<double> w(p.size());
    for (size_t i = 0; i < p.size(); ++i) w[i] = 1.0 / arm_denom(t[i], p[i]);
    return standardized_pct(x, t, w);
}

// Localized standardized difference at p0; NaN when either arm's effective
// count falls below 2.
inline double lsd_at(const std::vector<double>& x, const std::vector<double>& t,
                     const std::vector<double>& p, double p0, double h0) {
    std::vector<double> w(p.size());
    double s1 = 0.0, q1m = 0.0, s0 = 0.0, q0m = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        w[i] = kernel(p0, h0, p[i]) / arm_denom(t[i], p[i]);
        if (t[i] == 1.0) {
            s1 += w[i];
            q1m += w[i] * w[i];
        } else {
            s0 += w[i];
            q0m += w[i] * w[i];
        }
    }
    const double kish1 = q1m > 0.0 ? s1 * s1 / q1m : 0.0;
    const double kish0 = q0m > 0.0 ? s0 * s0 / q0m : 0.0;
    if (kish1 < 2.0 || kish0 < 2.0) return std::numeric_limits<double>::quiet_NaN();
    return standardized_pct(x, t, w);
}

inline double hajek(const std::vector<double>& y, const std::vector<double>& t,
                    const std::vector<double>& w) {
    double n1 = 0.0, d1 = 0.0, n0 = 0.0, d0 = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (t[i] == 1.0) {
            n1 += w[i] * y[i];
            d1 += w[i];
        } else {
            n0 += w[i] * y[i];
            d0 += w[i];
        }
    }
    return n1 / d1 - n0 / d0;
}

inline double horvitz_thompson(const std::vector<double>& y, const std::vector<double>& t,
                               const std::vector<double>& w, double n) {
    double s1 = 0.0, s0 = 0.0;
    for (size_t i = 0; i < y.size(); ++i) (t[i] == 1.0 ? s1 : s0) += w[i] * y[i];
    return s1 / n - s0 / n;
}

inline std::pair<double, double> effective_sizes(const std::vector<double>& t,
                                                 const std::vector<double>& w) {
    double s1 = 0.0, q1m = 0.0, s0 = 0.0, q0m = 0.0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == 1.0) {
            s1 += w[i];
            q1m += w[i] * w[i];
        } else {
            s0 += w[i];
            q0m += w[i] * w[i];
        }
    }
    return {s1 * s1 / q1m, s0 * s0 / q0m};
}

}  // namespace oracle
