#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbcnet/benchmark.hpp"
#include "lbcnet/dataset.hpp"
#include "lbcnet/diagnostics.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/estimators.hpp"
#include "lbcnet/generators.hpp"
#include "lbcnet/train.hpp"

namespace lbcnet {

// Insertion-ordered documents keep key order fixed, so identical runs emit
// byte-identical files.
using Json = nlohmann::ordered_json;

namespace jsonio {

inline Json from_vector(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vector to_vector(const Json& a) {
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

inline Json from_matrix(const Matrix& m) {
    Json flat = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Matrix to_matrix(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& flat = j.at("data");
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        fail(errc::csv_malformed, "matrix payload size mismatch");
    Matrix m(rows, cols);
    size_t at = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[at++].get<double>();
    return m;
}

}  // namespace jsonio

inline Json to_json(const LocalGrid& grid) {
    return Json{{"centers", grid.centers},
                {"bandwidths", grid.bandwidths},
                {"span", grid.span}};
}

inline LocalGrid grid_from_json(const Json& j) {
    LocalGrid grid;
    grid.centers = j.at("centers").get<std::vector<double>>();
    grid.bandwidths = j.at("bandwidths").get<std::vector<double>>();
    grid.span = j.at("span").get<double>();
    grid.validate();
    return grid;
}

inline Json to_json(const TrainConfig& c) {
    return Json{{"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"lambda", c.lambda},
                {"grid_size", c.grid_size},
                {"span", c.span},
                {"seed", c.seed},
                {"loss", c.loss == LossKind::bce ? "bce" : "lbc"},
                {"scale_grad", c.scale_mode == ScaleGradMode::detached ? "detached" : "full"},
                {"hidden", c.hidden}};
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.grid_size = j.at("grid_size").get<int>();
    c.span = j.at("span").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.loss = j.at("loss").get<std::string>() == "bce" ? LossKind::bce : LossKind::lbc;
    c.scale_mode = j.at("scale_grad").get<std::string>() == "detached" ? ScaleGradMode::detached
                                                                       : ScaleGradMode::full;
    c.hidden = j.at("hidden").get<int>();
    return c;
}

inline Json to_json(const NetworkParams& p) {
    auto linear = [](const LinearParams& lin) {
        return Json{{"weight", jsonio::from_matrix(lin.weight)},
                    {"bias", jsonio::from_vector(lin.bias)}};
    };
    auto batchnorm = [](const BatchNormParams& bn) {
        return Json{{"gamma", jsonio::from_vector(bn.gamma)},
                    {"beta", jsonio::from_vector(bn.beta)},
                    {"running_mean", jsonio::from_vector(bn.running_mean)},
                    {"running_var", jsonio::from_vector(bn.running_var)}};
    };
    return Json{{"architecture", Json{{"input_dim", p.arch.input_dim}, {"hidden", p.arch.hidden}}},
                {"standardizer", Json{{"mean", jsonio::from_vector(p.standardizer.mean)},
                                      {"sd", jsonio::from_vector(p.standardizer.sd)}}},
                {"layer1", linear(p.lin1)},
                {"batchnorm1", batchnorm(p.bn1)},
                {"layer2", linear(p.lin2)},
                {"batchnorm2", batchnorm(p.bn2)},
                {"layer3", linear(p.lin3)},
                {"batchnorm3", batchnorm(p.bn3)}};
}

inline NetworkParams network_from_json(const Json& j) {
    auto linear = [](const Json& lj) {
        LinearParams lin;
        lin.weight = jsonio::to_matrix(lj.at("weight"));
        lin.bias = jsonio::to_vector(lj.at("bias"));
        return lin;
    };
    auto batchnorm = [](const Json& bj) {
        BatchNormParams bn;
        bn.gamma = jsonio::to_vector(bj.at("gamma"));
        bn.beta = jsonio::to_vector(bj.at("beta"));
        bn.running_mean = jsonio::to_vector(bj.at("running_mean"));
        bn.running_var = jsonio::to_vector(bj.at("running_var"));
        return bn;
    };
    NetworkParams p;
    p.arch.input_dim = j.at("architecture").at("input_dim").get<int>();
    p.arch.hidden = j.at("architecture").at("hidden").get<int>();
    p.standardizer.mean = jsonio::to_vector(j.at("standardizer").at("mean"));
    p.standardizer.sd = jsonio::to_vector(j.at("standardizer").at("sd"));
    p.lin1 = linear(j.at("layer1"));
    p.lin2 = linear(j.at("layer2"));
    p.lin3 = linear(j.at("layer3"));
    p.bn1 = batchnorm(j.at("batchnorm1"));
    p.bn2 = batchnorm(j.at("batchnorm2"));
    p.bn3 = batchnorm(j.at("batchnorm3"));
    p.validate();
    return p;
}

inline Json to_json(const PropensityFit& fit) {
    Json trace{{"total", Json::array()}, {"balance", Json::array()}, {"calibration", Json::array()}};
    for (const auto& e : fit.trace) {
        trace["total"].push_back(e.total);
        trace["balance"].push_back(e.balance);
        trace["calibration"].push_back(e.calibration);
    }
    return Json{{"network", to_json(fit.params)},
                {"grid", to_json(fit.grid)},
                {"config", to_json(fit.config)},
                {"scores", jsonio::from_vector(fit.scores)},
                {"trace", trace},
                {"warnings", fit.warnings}};
}

inline PropensityFit fit_from_json(const Json& j) {
    PropensityFit fit;
    fit.params = network_from_json(j.at("network"));
    fit.grid = grid_from_json(j.at("grid"));
    fit.config = train_config_from_json(j.at("config"));
    fit.scores = jsonio::to_vector(j.at("scores"));
    const auto& trace = j.at("trace");
    const auto& total = trace.at("total");
    const auto& balance = trace.at("balance");
    const auto& calibration = trace.at("calibration");
    for (size_t i = 0; i < total.size(); ++i) {
        fit.trace.push_back({total[i].get<double>(), balance[i].get<double>(),
                             calibration[i].get<double>()});
    }
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    return fit;
}

inline Json to_json(const EstimateReport& r) {
    Json j{{"ate_hajek", r.ate_hajek},
           {"ate_horvitz_thompson", r.ate_horvitz_thompson},
           {"ess_treated", r.ess_treated},
           {"ess_control", r.ess_control},
           {"bootstrap_se", nullptr},
           {"bootstrap_reps", r.bootstrap_reps},
           {"truncation_quantile", r.truncation_quantile},
           {"warnings", r.warnings}};
    if (r.bootstrap_se) j["bootstrap_se"] = *r.bootstrap_se;
    return j;
}

inline Json to_json(const BalanceReport& r) {
    Json lsd = Json::array();
    for (const auto& curve : r.lsd) {
        Json cells = Json::array();
        for (double v : curve) {
            if (std::isfinite(v)) cells.push_back(v);
            else cells.push_back(nullptr);  // starved neighborhoods are null, not NaN
        }
        lsd.push_back(std::move(cells));
    }
    return Json{{"covariates", r.covariate_names},
                {"gsd", r.gsd},
                {"lsd", lsd},
                {"evaluation_points", r.evaluation_points},
                {"bandwidths", r.bandwidths},
                {"ess_treated", r.ess_treated},
                {"ess_control", r.ess_control},
                {"summary", Json{{"max_gsd", r.max_gsd},
                                 {"mean_gsd", r.mean_gsd},
                                 {"max_lsd", r.max_lsd},
                                 {"mean_lsd", r.mean_lsd}}}};
}

inline Json to_json(const SimulatedDataset& sim) {
    return Json{{"scenario", sim.scenario},
                {"seed", sim.seed},
                {"n", sim.data.n()},
                {"estimand", sim.estimand},
                {"estimand_kind",
                 sim.estimand_kind == EstimandKind::treated_mean ? "treated_mean" : "ate"},
                {"true_propensity", jsonio::from_vector(sim.true_propensity)}};
}

inline Json to_json(const BenchmarkResult& r) {
    Json methods = Json::array();
    for (const auto& m : r.methods) {
        methods.push_back(Json{{"method", m.method},
                               {"truth", m.truth},
                               {"percent_bias", m.percent_bias},
                               {"rmse", m.rmse},
                               {"variance", m.variance},
                               {"reps_requested", m.reps_requested},
                               {"reps_completed", m.reps_completed},
                               {"reps_failed", m.reps_failed},
                               {"estimates", m.estimates},
                               {"mean_gsd", m.mean_gsd},
                               {"max_gsd", m.max_gsd},
                               {"mean_lsd", m.mean_lsd},
                               {"warnings", m.warnings}});
    }
    return Json{{"scenario", r.scenario},
                {"n", r.n},
                {"reps", r.reps},
                {"seed", r.seed},
                {"methods", methods}};
}

inline Json error_json(const Error& e) {
    return Json{{"error", Json{{"code", errc_name(e.code())}, {"message", e.what()}}}};
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_error, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) fail(errc::io_error, "write failed for '" + path + "'");
}

inline Json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open '" + path + "' for reading");
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::csv_malformed, path + ": invalid JSON: " + e.what());
    }
    return j;
}

}  // namespace lbcnet
