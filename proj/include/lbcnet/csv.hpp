#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lbcnet/benchmark.hpp"
#include "lbcnet/dataset.hpp"
#include "lbcnet/diagnostics.hpp"
#include "lbcnet/error.hpp"

namespace lbcnet {

/// 17 significant digits: enough to round-trip any double exactly.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct Table {
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

}  // namespace detail

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open '" + path + "' for reading");
    Table table;
    std::string line;
    if (!std::getline(in, line)) fail(errc::csv_malformed, path + ": empty file");
    table.headers = detail::split_csv_line(line);
    if (table.headers.empty() || table.headers[0].empty())
        fail(errc::csv_malformed, path + ": missing header row");
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != table.headers.size())
            fail(errc::csv_malformed, path + ": line " + std::to_string(lineno) + " has " +
                                          std::to_string(cells.size()) + " fields, expected " +
                                          std::to_string(table.headers.size()));
        table.rows.push_back(std::move(cells));
    }
    return table;
}

struct ColumnRoles {
    std::string treatment = "treatment";
    std::optional<std::string> outcome = "outcome";  // used only if present
    std::optional<std::string> id;                   // optional row-label column
    std::vector<std::string> covariates;             // empty = every remaining column
};

namespace detail {

inline bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "na";
}

inline double parse_number(const std::string& cell, const std::string& context) {
    if (is_missing(cell)) fail(errc::csv_missing_value, "missing value at " + context);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        fail(errc::csv_malformed, "unparsable number '" + cell + "' at " + context);
    return v;
}

}  // namespace detail

/// Reads and validates an analysis dataset. Treatment must be strictly 0/1,
/// every cell must parse, and constant covariates are rejected; the
/// intercept column is appended internally.
inline Dataset ingest_csv(const std::string& path, const ColumnRoles& roles = {}) {
    const Table table = read_table(path);
    if (table.rows.empty()) fail(errc::csv_malformed, path + ": no data rows");

    auto column_index = [&](const std::string& name) -> std::optional<size_t> {
        const auto it = std::find(table.headers.begin(), table.headers.end(), name);
        if (it == table.headers.end()) return std::nullopt;
        return static_cast<size_t>(it - table.headers.begin());
    };

    const auto t_col = column_index(roles.treatment);
    if (!t_col)
        fail(errc::csv_missing_column, path + ": no treatment column '" + roles.treatment + "'");
    std::optional<size_t> y_col;
    if (roles.outcome) y_col = column_index(*roles.outcome);
    std::optional<size_t> id_col;
    if (roles.id) {
        id_col = column_index(*roles.id);
        if (!id_col) fail(errc::csv_missing_column, path + ": no id column '" + *roles.id + "'");
    }

    std::vector<size_t> cov_cols;
    std::vector<std::string> cov_names;
    if (roles.covariates.empty()) {
        for (size_t c = 0; c < table.headers.size(); ++c) {
            if (c == *t_col || (y_col && c == *y_col) || (id_col && c == *id_col)) continue;
            cov_cols.push_back(c);
            cov_names.push_back(table.headers[c]);
        }
    } else {
        for (const std::string& name : roles.covariates) {
            const auto idx = column_index(name);
            if (!idx) fail(errc::csv_missing_column, path + ": no covariate column '" + name + "'");
            cov_cols.push_back(*idx);
            cov_names.push_back(name);
        }
    }
    if (cov_cols.empty()) fail(errc::csv_missing_column, path + ": no covariate columns");

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Matrix raw(n, static_cast<Eigen::Index>(cov_cols.size()));
    Vector treatment(n);
    Vector outcome(n);
    std::vector<std::string> ids;

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<size_t>(i)];
        const std::string rowname = "row " + std::to_string(i + 1);
        const double t = detail::parse_number(row[*t_col], rowname + " column '" + roles.treatment + "'");
        if (t != 0.0 && t != 1.0)
            fail(errc::csv_non_binary_treatment,
                 path + ": treatment value '" + row[*t_col] + "' at " + rowname);
        treatment[i] = t;
        if (y_col)
            outcome[i] = detail::parse_number(row[*y_col], rowname + " column '" + *roles.outcome + "'");
        if (id_col) ids.push_back(row[*id_col]);
        for (size_t c = 0; c < cov_cols.size(); ++c) {
            raw(i, static_cast<Eigen::Index>(c)) =
                detail::parse_number(row[cov_cols[c]], rowname + " column '" + cov_names[c] + "'");
        }
    }

    for (size_t c = 0; c < cov_cols.size(); ++c) {
        const auto col = raw.col(static_cast<Eigen::Index>(c));
        if ((col.array() == col[0]).all())
            fail(errc::csv_constant_covariate, path + ": covariate '" + cov_names[c] + "' is constant");
    }

    Dataset data = Dataset::from_raw(raw, treatment,
                                     y_col ? std::optional<Vector>(outcome) : std::nullopt,
                                     cov_names, ids);
    data.validate();
    return data;
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) fail(errc::io_error, "cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

/// Observed data exactly as an analysis consumer should see it:
/// covariates, treatment, and outcome (truth lives in the JSON sidecar).
inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    data.validate();
    auto out = detail::open_for_write(path);
    for (size_t c = 1; c < data.covariate_names.size(); ++c) {
        out << data.covariate_names[c] << ',';
    }
    out << "treatment";
    if (data.outcome) out << ",outcome";
    out << '\n';
    const Matrix raw = data.raw_covariates();
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index c = 0; c < raw.cols(); ++c) out << format_double(raw(i, c)) << ',';
        out << format_double(data.treatment[i]);
        if (data.outcome) out << ',' << format_double((*data.outcome)[i]);
        out << '\n';
    }
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

inline void write_scores_csv(const std::string& path, const Vector& scores) {
    auto out = detail::open_for_write(path);
    out << "row,propensity\n";
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        out << (i + 1) << ',' << format_double(scores[i]) << '\n';
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

inline Vector read_scores_csv(const std::string& path) {
    const Table table = read_table(path);
    const auto it = std::find(table.headers.begin(), table.headers.end(), "propensity");
    if (it == table.headers.end())
        fail(errc::csv_missing_column, path + ": no propensity column");
    const auto col = static_cast<size_t>(it - table.headers.begin());
    Vector scores(static_cast<Eigen::Index>(table.rows.size()));
    for (size_t i = 0; i < table.rows.size(); ++i) {
        scores[static_cast<Eigen::Index>(i)] =
            detail::parse_number(table.rows[i][col], "row " + std::to_string(i + 1));
    }
    return scores;
}

/// One row per covariate: GSD first, then the LSD at each evaluation point.
inline void write_balance_csv(const std::string& path, const BalanceReport& report) {
    auto out = detail::open_for_write(path);
    out << "covariate,gsd";
    for (double p0 : report.evaluation_points) {
        char label[32];
        std::snprintf(label, sizeof(label), ",lsd_%g", p0);
        out << label;
    }
    out << '\n';
    for (size_t c = 0; c < report.covariate_names.size(); ++c) {
        out << report.covariate_names[c] << ',' << format_double(report.gsd[c]);
        for (double v : report.lsd[c]) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

inline void write_calibration_csv(const std::string& path, const CalibrationTable& table) {
    auto out = detail::open_for_write(path);
    out << "bin_lower,bin_upper,mean_score,treated_proportion,count\n";
    for (const auto& row : table.rows) {
        out << format_double(row.lower) << ',' << format_double(row.upper) << ','
            << format_double(row.mean_score) << ',' << format_double(row.treated_proportion) << ','
            << row.count << '\n';
    }
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

/// One row per method with the aggregate metrics for a single scenario.
inline void write_metrics_csv(const std::string& path, const BenchmarkResult& result) {
    auto out = detail::open_for_write(path);
    out << "method,percent_bias,rmse,variance,reps_completed,reps_failed,mean_gsd,max_gsd,mean_lsd\n";
    for (const auto& m : result.methods) {
        out << m.method << ',' << format_double(m.percent_bias) << ',' << format_double(m.rmse)
            << ',' << format_double(m.variance) << ',' << m.reps_completed << ',' << m.reps_failed
            << ',' << format_double(m.mean_gsd) << ',' << format_double(m.max_gsd) << ','
            << format_double(m.mean_lsd) << '\n';
    }
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

/// Side-by-side layout for a whole scenario family: per method, the
/// {bias, rmse, variance} triple under the correct and misspecified models.
inline void write_metrics_csv(const std::string& path, const BenchmarkResult& correct,
                              const BenchmarkResult& mis) {
    if (correct.methods.size() != mis.methods.size())
        fail(errc::dimension_mismatch, "write_metrics_csv: method lists differ");
    auto out = detail::open_for_write(path);
    out << "method,correct_percent_bias,correct_rmse,correct_variance,"
           "mis_percent_bias,mis_rmse,mis_variance\n";
    for (size_t i = 0; i < correct.methods.size(); ++i) {
        const auto& a = correct.methods[i];
        const auto& b = mis.methods[i];
        if (a.method != b.method)
            fail(errc::dimension_mismatch, "write_metrics_csv: method order differs");
        out << a.method << ',' << format_double(a.percent_bias) << ',' << format_double(a.rmse)
            << ',' << format_double(a.variance) << ',' << format_double(b.percent_bias) << ','
            << format_double(b.rmse) << ',' << format_double(b.variance) << '\n';
    }
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

}  // namespace lbcnet
