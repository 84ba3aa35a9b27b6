#pragma once

#include <json.hpp>

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/gee.hpp"
#include "bivarps/pseudo.hpp"
#include "bivarps/simulate.hpp"

namespace bivarps {

using nlohmann::json;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string csv_value(double v) { return is_available(v) ? format_double(v) : "NA"; }

inline std::string point_label(const TimePoint& p) { return format_double(p.t1) + ":" + format_double(p.t2); }

}  // namespace detail

/// Long-format surface: one `t1,t2,value` row per grid cell, NA where undefined.
inline void write_surface_csv(std::ostream& out, const SurvivalSurface& s) {
  out << "t1,t2,value\n";
  for (std::size_t a = 0; a < s.grid1().size(); ++a)
    for (std::size_t b = 0; b < s.grid2().size(); ++b)
      out << detail::format_double(s.grid1()[a]) << ',' << detail::format_double(s.grid2()[b]) << ','
          << detail::csv_value(s.values()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
}

/// `id` column (1-based record number) followed by one column per time point.
inline void write_pseudo_csv(std::ostream& out, const PseudoMatrix& pm) {
  out << "id";
  for (const auto& p : pm.grid) out << ',' << detail::point_label(p);
  out << '\n';
  for (Eigen::Index i = 0; i < pm.values.rows(); ++i) {
    out << i + 1;
    for (Eigen::Index j = 0; j < pm.values.cols(); ++j) out << ',' << detail::format_double(pm.values(i, j));
    out << '\n';
  }
}

inline void write_points_csv(std::ostream& out, const TimePointGrid& grid) {
  out << "t1,t2\n";
  for (const auto& p : grid) out << detail::format_double(p.t1) << ',' << detail::format_double(p.t2) << '\n';
}

/// Model artifact: coefficients with Wald statistics, covariance, convergence
/// diagnostics and the information needed to reuse the fit for prediction.
inline json fit_to_json(const GeeFit& fit, const TimePointGrid& grid, Estimator est,
                        const std::vector<std::string>& covariates, std::size_t n) {
  json j;
  j["link"] = fit.link.name();
  j["estimator"] = to_string(est);
  j["n"] = n;
  j["k"] = fit.k;
  j["p"] = fit.p;
  j["covariates"] = covariates;
  j["points"] = json::array();
  for (const auto& p : grid) j["points"].push_back({p.t1, p.t2});
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  j["vcov"] = json::array();
  for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row.push_back(fit.vcov(r, c));
    j["vcov"].push_back(row);
  }
  const Eigen::VectorXd se = fit.standard_errors();
  j["coefficients"] = json::array();
  for (Eigen::Index q = 0; q < fit.beta.size(); ++q) {
    const double z = fit.beta[q] / se[q];
    j["coefficients"].push_back({{"name", fit.names[static_cast<std::size_t>(q)]},
                                 {"estimate", fit.beta[q]},
                                 {"se", detail::number_or_null(se[q])},
                                 {"z", detail::number_or_null(z)},
                                 {"p", detail::number_or_null(wald_p_value(z))}});
  }
  j["convergence"] = {{"converged", fit.converged},
                      {"iterations", fit.iterations},
                      {"max_update", fit.max_update},
                      {"max_score", fit.max_score},
                      {"clamped_predictors", fit.clamped}};
  return j;
}

inline GeeFit fit_from_json(const json& j) {
  try {
    GeeFit fit;
    fit.link = LinkFunction::parse(j.at("link").get<std::string>());
    fit.k = j.at("k").get<std::size_t>();
    fit.p = j.at("p").get<std::size_t>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    if (beta.size() != fit.k + fit.p) throw ValidationError("fit file: beta has the wrong length");
    fit.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    const auto q = static_cast<Eigen::Index>(beta.size());
    fit.vcov.resize(q, q);
    const auto& v = j.at("vcov");
    if (v.size() != beta.size()) throw ValidationError("fit file: vcov has the wrong shape");
    for (Eigen::Index r = 0; r < q; ++r) {
      const auto row = v.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      if (row.size() != beta.size()) throw ValidationError("fit file: vcov has the wrong shape");
      for (Eigen::Index c = 0; c < q; ++c) fit.vcov(r, c) = row[static_cast<std::size_t>(c)];
    }
    for (const auto& c : j.at("coefficients")) fit.names.push_back(c.at("name").get<std::string>());
    const auto& conv = j.at("convergence");
    fit.converged = conv.at("converged").get<bool>();
    fit.iterations = conv.at("iterations").get<int>();
    fit.max_update = conv.at("max_update").get<double>();
    fit.max_score = conv.at("max_score").get<double>();
    fit.clamped = conv.at("clamped_predictors").get<std::size_t>();
    return fit;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed fit file: ") + e.what());
  }
}

/// Table-style report: one row per parameter and estimator (true, est, sd, se,
/// cov), plus failure counts, MAE summaries, seeds and optionally timing.
inline json report_to_json(const ReplicationReport& rep, bool include_timing = true) {
  const auto& c = rep.config;
  json j;
  j["preset"] = c.name;
  j["n"] = c.n;
  j["m"] = c.m;
  j["seed"] = c.seed;
  j["model"] = c.model == ModelKind::Logistic ? "logistic" : "lognormal";
  j["censoring"] = {{"mode", c.censoring.mode == CensoringMode::Univariate ? "univariate" : "bivariate"},
                    {"rate1", c.censoring.rate1},
                    {"rate2", c.censoring.rate2},
                    {"censored_fraction1", rep.censored1},
                    {"censored_fraction2", rep.censored2}};
  j["regression"] = c.mode == RegressionMode::Stacked ? "stacked" : "separate";
  j["grid"] = c.grid_source == GridSource::Fixed ? "fixed" : "equidistant";
  j["estimators"] = json::array();
  for (const auto& arm : rep.arms) {
    json a;
    a["estimator"] = to_string(arm.estimator);
    a["successes"] = arm.successes;
    a["failures"] = arm.failures;
    a["failure_messages"] = arm.failure_messages;
    a["parameters"] = json::array();
    for (const auto& p : arm.parameters)
      a["parameters"].push_back({{"parameter", p.name},
                                 {"true", detail::number_or_null(p.truth)},
                                 {"est", p.mean},
                                 {"sd", p.sd},
                                 {"se", p.se},
                                 {"cov", detail::number_or_null(p.coverage)}});
    a["median_mae"] = arm.median_mae;
    a["mean_mae"] = arm.mean_mae;
    j["estimators"].push_back(a);
  }
  j["seeds"] = rep.seeds;
  if (include_timing) j["seconds"] = rep.seconds;
  return j;
}

/// Long-format MAE table: replication, estimator, point, t1, t2, mae, smae.
inline void write_mae_csv(std::ostream& out, const ReplicationReport& rep) {
  out << "replication,estimator,point,t1,t2,mae,smae\n";
  for (const auto& r : rep.mae)
    out << r.replication << ',' << to_string(r.estimator) << ',' << r.point << ','
        << detail::format_double(r.at.t1) << ',' << detail::format_double(r.at.t2) << ','
        << detail::format_double(r.mae) << ',' << detail::format_double(r.smae) << '\n';
}

}  // namespace bivarps
