#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/gee.hpp"
#include "bivarps/parallel.hpp"
#include "bivarps/pseudo.hpp"
#include "bivarps/rng.hpp"
#include "bivarps/timepoints.hpp"

namespace bivarps {

// S(t1,t2|z) = expit(-kappa log(a1 t1 + a2 t2) + beta1 z), Z ~ U(z_low, z_high).
struct LogisticModelParams {
  double kappa = 1.0;
  double a1 = 1.0;
  double a2 = 3.0;
  double beta1 = 2.0;
  double z_low = 0.5;
  double z_high = 1.5;

  void validate() const {
    if (!(kappa > 0.0 && a1 > 0.0 && a2 > 0.0)) throw ValidationError("kappa, a1 and a2 must be positive");
    // c / (c + w^kappa) is convex in w = a1 t1 + a2 t2 only for kappa <= 1; above
    // that some rectangles get negative mass
    if (kappa > 1.0) throw ValidationError("kappa above 1 does not give a valid bivariate survival function");
    if (!(z_low <= z_high)) throw ValidationError("z_low must not exceed z_high");
  }

  [[nodiscard]] double beta0(double t1, double t2) const { return -kappa * std::log(a1 * t1 + a2 * t2); }
};

// (log T1, log T2) ~ N((gamma1 z, gamma2 z), [[s11, s12], [s12, s22]]), Z ~ U(z_low, z_high).
struct LogNormalModelParams {
  double gamma1 = 0.2;
  double gamma2 = 1.0;
  double sigma11 = 2.0;
  double sigma12 = 3.0;
  double sigma22 = 5.0;
  double z_low = 0.5;
  double z_high = 1.5;

  void validate() const {
    if (!(sigma11 > 0.0 && sigma22 > 0.0 && sigma11 * sigma22 - sigma12 * sigma12 > 0.0))
      throw ValidationError("log-normal covariance must be positive definite");
    if (!(z_low <= z_high)) throw ValidationError("z_low must not exceed z_high");
  }

  [[nodiscard]] double rho() const { return sigma12 / std::sqrt(sigma11 * sigma22); }
};

enum class CensoringMode { Univariate, BivariateIndependent };

struct CensoringSpec {
  CensoringMode mode = CensoringMode::Univariate;
  double rate1 = 0.3;
  double rate2 = 0.2;  // bivariate mode only

  void validate() const {
    if (!(rate1 > 0.0) || (mode == CensoringMode::BivariateIndependent && !(rate2 > 0.0)))
      throw ValidationError("censoring rates must be positive");
  }
};

/// Latent failure times with their scalar covariate.
struct TruePairs {
  std::vector<double> t1;
  std::vector<double> t2;
  std::vector<double> z;

  [[nodiscard]] std::size_t size() const noexcept { return t1.size(); }
};

inline double true_logistic_survival(const LogisticModelParams& p, double t1, double t2, double z) {
  if (t1 < 0.0 || t2 < 0.0) throw ValidationError("negative time");
  const double w = p.a1 * t1 + p.a2 * t2;
  if (w == 0.0) return 1.0;
  // expit(-kappa log w + beta1 z) = c / (c + w^kappa) with c = e^{beta1 z}
  const double c = std::exp(p.beta1 * z);
  return c / (c + std::pow(w, p.kappa));
}

/// Partial derivative of the logistic surface in t1.
inline double logistic_survival_dt1(const LogisticModelParams& p, double t1, double t2, double z) {
  const double w = p.a1 * t1 + p.a2 * t2;
  const double c = std::exp(p.beta1 * z);
  const double wk = std::pow(w, p.kappa);
  return -c * p.kappa * std::pow(w, p.kappa - 1.0) * p.a1 / ((c + wk) * (c + wk));
}

/// T1 from the closed-form marginal inverse, then T2 | T1 by bisection on the
/// conditional CDF 1 - dS(t1,t2)/dt1 / dS(t1,0)/dt1.
inline TruePairs sample_logistic(const LogisticModelParams& p, std::size_t n, Engine& rng) {
  p.validate();
  if (n < 1) throw ValidationError("n must be at least 1");
  TruePairs out;
  out.t1.resize(n);
  out.t2.resize(n);
  out.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = p.z_low + (p.z_high - p.z_low) * open_uniform(rng);
    const double c = std::exp(p.beta1 * z);
    const double u = open_uniform(rng);
    const double t1 = std::pow(c * (1.0 - u) / u, 1.0 / p.kappa) / p.a1;

    const double v = open_uniform(rng);
    const double d0 = logistic_survival_dt1(p, t1, 0.0, z);
    const auto cdf = [&](double t2) { return 1.0 - logistic_survival_dt1(p, t1, t2, z) / d0; };
    double lo = 0.0, hi = 1.0;
    for (int doubling = 0; cdf(hi) < v; ++doubling) {
      if (doubling > 1100) throw NumericalError("conditional CDF never brackets the target");
      lo = hi;
      hi *= 2.0;
    }
    while (hi - lo > 1e-10 * std::max(1.0, lo)) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (cdf(mid) < v ? lo : hi) = mid;
    }
    out.t1[i] = t1;
    out.t2[i] = 0.5 * (lo + hi);
    out.z[i] = z;
  }
  return out;
}

inline TruePairs sample_logistic(const LogisticModelParams& p, std::size_t n, std::uint64_t seed) {
  Engine rng(seed);
  return sample_logistic(p, n, rng);
}

inline TruePairs sample_lognormal(const LogNormalModelParams& p, std::size_t n, Engine& rng) {
  p.validate();
  if (n < 1) throw ValidationError("n must be at least 1");
  Eigen::Matrix2d sigma;
  sigma << p.sigma11, p.sigma12, p.sigma12, p.sigma22;
  const Eigen::Matrix2d L = sigma.llt().matrixL();
  std::normal_distribution<double> normal;
  TruePairs out;
  out.t1.resize(n);
  out.t2.resize(n);
  out.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = p.z_low + (p.z_high - p.z_low) * open_uniform(rng);
    Eigen::Vector2d e;
    e[0] = normal(rng);
    e[1] = normal(rng);
    const Eigen::Vector2d x = Eigen::Vector2d(p.gamma1 * z, p.gamma2 * z) + L * e;
    out.t1[i] = std::exp(x[0]);
    out.t2[i] = std::exp(x[1]);
    out.z[i] = z;
  }
  return out;
}

inline TruePairs sample_lognormal(const LogNormalModelParams& p, std::size_t n, std::uint64_t seed) {
  Engine rng(seed);
  return sample_lognormal(p, n, rng);
}

/// P(T1 > t1, T2 > t2 | z) as a one-dimensional integral over the first
/// standardized log-time.
inline double true_lognormal_survival(const LogNormalModelParams& p, double t1, double t2, double z) {
  if (t1 < 0.0 || t2 < 0.0) throw ValidationError("negative time");
  const double s1 = std::sqrt(p.sigma11), s2 = std::sqrt(p.sigma22), rho = p.rho();
  const double a = (std::log(t1) - p.gamma1 * z) / s1;
  const double b = (std::log(t2) - p.gamma2 * z) / s2;
  const double r = std::sqrt(1.0 - rho * rho);
  const auto upper_tail = [](double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); };
  constexpr double kLimit = 12.0;
  const double lo = std::max(a, -kLimit);
  if (lo >= kLimit) return 0.0;
  const auto f = [&](double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI) * upper_tail((b - rho * u) / r);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, kLimit, 15, 1e-13);
}

/// Y_j = min(T_j, C_j), delta_j = I(T_j <= C_j); one shared C in univariate mode.
inline BivariateSample apply_censoring(const TruePairs& pairs, const CensoringSpec& spec, Engine& rng) {
  spec.validate();
  std::vector<BivariateRecord> recs(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double c1 = -std::log(open_uniform(rng)) / spec.rate1;
    const double c2 =
        spec.mode == CensoringMode::Univariate ? c1 : -std::log(open_uniform(rng)) / spec.rate2;
    auto& r = recs[i];
    r.y1 = std::min(pairs.t1[i], c1);
    r.delta1 = pairs.t1[i] <= c1 ? 1 : 0;
    r.y2 = std::min(pairs.t2[i], c2);
    r.delta2 = pairs.t2[i] <= c2 ? 1 : 0;
    r.z = {pairs.z[i]};
  }
  return BivariateSample(std::move(recs), {"z"});
}

inline BivariateSample apply_censoring(const TruePairs& pairs, const CensoringSpec& spec, std::uint64_t seed) {
  Engine rng(seed);
  return apply_censoring(pairs, spec, rng);
}

enum class ModelKind { Logistic, LogNormal };
enum class GridSource { Fixed, Equidistant };
enum class RegressionMode { Stacked, Separate };

struct StudyConfig {
  std::string name = "custom";
  ModelKind model = ModelKind::Logistic;
  LogisticModelParams logistic;
  LogNormalModelParams lognormal;
  CensoringSpec censoring;
  std::size_t n = 200;
  std::size_t m = 200;
  GridSource grid_source = GridSource::Fixed;
  std::vector<TimePoint> fixed_points;
  SelectionConfig selection;
  std::vector<Estimator> estimators{Estimator::Dabrowska};
  RegressionMode mode = RegressionMode::Stacked;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  double max_failure_rate = 0.05;
  double level = 0.95;

  void validate() const {
    if (n < 10) throw ValidationError("n must be at least 10");
    if (m < 1) throw ValidationError("m must be at least 1");
    if (estimators.empty()) throw ValidationError("at least one estimator is required");
    if (grid_source == GridSource::Fixed) (void)TimePointGrid{fixed_points};
    else selection.validate();
    if (model == ModelKind::Logistic) logistic.validate();
    else lognormal.validate();
    censoring.validate();
  }
};

inline std::vector<TimePoint> logistic_design_points() {
  return {{0.5, 0.7}, {1.0, 0.7}, {0.5, 1.2}, {1.0, 1.2}, {0.5, 1.5}, {1.0, 1.5}};
}

inline std::vector<TimePoint> lognormal_design_points() {
  return {{0.25, 0.35}, {0.5, 0.6}, {1.0, 1.1}, {1.5, 1.6}, {3.0, 3.1}, {5.0, 5.1}};
}

/// Named study configurations: table1a, table1b, webtable1, lognormal.
inline StudyConfig preset(const std::string& name) {
  StudyConfig c;
  c.name = name;
  c.fixed_points = logistic_design_points();
  if (name == "table1a") {
    c.estimators = {Estimator::Dabrowska, Estimator::LinYing};
  } else if (name == "table1b") {
    c.censoring = {CensoringMode::BivariateIndependent, 0.3, 0.2};
    c.estimators = {Estimator::Dabrowska, Estimator::LinYingBivariate};
  } else if (name == "webtable1") {
    c.estimators = {Estimator::Dabrowska, Estimator::LinYing};
    c.mode = RegressionMode::Separate;
  } else if (name == "lognormal") {
    c.model = ModelKind::LogNormal;
    c.fixed_points = lognormal_design_points();
    c.estimators = {Estimator::Dabrowska, Estimator::LinYing};
    c.mode = RegressionMode::Separate;
  } else {
    throw ValidationError("unknown preset '" + name + "' (expected table1a, table1b, webtable1 or lognormal)");
  }
  return c;
}

inline double true_survival(const StudyConfig& cfg, double t1, double t2, double z) {
  return cfg.model == ModelKind::Logistic ? true_logistic_survival(cfg.logistic, t1, t2, z)
                                          : true_lognormal_survival(cfg.lognormal, t1, t2, z);
}

inline TruePairs draw_pairs(const StudyConfig& cfg, Engine& rng) {
  return cfg.model == ModelKind::Logistic ? sample_logistic(cfg.logistic, cfg.n, rng)
                                          : sample_lognormal(cfg.lognormal, cfg.n, rng);
}

/// One estimator's results within a replication.
struct ArmOutcome {
  bool ok = false;
  std::string error;
  std::vector<double> estimate;
  std::vector<double> se;
  std::vector<double> truth;  // NaN when the model has no true coefficients
  std::vector<double> mae;    // per time point
  std::vector<double> smae;
};

struct ReplicationOutcome {
  std::uint64_t seed = 0;
  std::vector<TimePoint> points;
  double censored1 = 0.0;
  double censored2 = 0.0;
  std::vector<ArmOutcome> arms;  // parallel to StudyConfig::estimators
};

/// Coefficient labels in report order.
inline std::vector<std::string> parameter_names(const StudyConfig& cfg, std::size_t k) {
  std::vector<std::string> names;
  const auto label = [&](std::size_t j) {
    if (cfg.grid_source == GridSource::Fixed) return detail::describe(cfg.fixed_points[j]);
    return "[" + std::to_string(j) + "]";
  };
  if (cfg.mode == RegressionMode::Stacked) {
    for (std::size_t j = 0; j < k; ++j) names.push_back("beta0" + label(j));
    names.push_back("beta1");
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      names.push_back("beta0" + label(j));
      names.push_back("beta1" + label(j));
    }
  }
  return names;
}

namespace detail {

inline ArmOutcome run_arm(const StudyConfig& cfg, const BivariateSample& sample, const TimePointGrid& grid,
                          Estimator est) {
  ArmOutcome arm;
  const auto pm = pseudo_observations(sample, grid, est, 1);
  const Eigen::MatrixXd z = covariate_matrix(sample);
  const LinkFunction link(LinkKind::Logit);
  const std::size_t k = grid.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool known = cfg.model == ModelKind::Logistic;

  // predicted(i, j) = fitted S(t_j | z_i)
  Eigen::MatrixXd predicted(z.rows(), static_cast<Eigen::Index>(k));
  if (cfg.mode == RegressionMode::Stacked) {
    const auto fit = fit_gee(pm, z, link);
    const Eigen::VectorXd se = fit.standard_errors();
    for (Eigen::Index q = 0; q < fit.beta.size(); ++q) {
      arm.estimate.push_back(fit.beta[q]);
      arm.se.push_back(se[q]);
    }
    for (std::size_t j = 0; j < k; ++j) arm.truth.push_back(known ? cfg.logistic.beta0(grid[j].t1, grid[j].t2) : nan);
    arm.truth.push_back(known ? cfg.logistic.beta1 : nan);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double zi = z(i, 0);
      for (std::size_t j = 0; j < k; ++j)
        predicted(i, static_cast<Eigen::Index>(j)) = predict_survival(fit, std::span<const double>(&zi, 1), j);
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      const auto fit = fit_gee(stack_design(pm.values.col(static_cast<Eigen::Index>(j)), z), link);
      const Eigen::VectorXd se = fit.standard_errors();
      arm.estimate.insert(arm.estimate.end(), {fit.beta[0], fit.beta[1]});
      arm.se.insert(arm.se.end(), {se[0], se[1]});
      arm.truth.push_back(known ? cfg.logistic.beta0(grid[j].t1, grid[j].t2) : nan);
      arm.truth.push_back(known ? cfg.logistic.beta1 : nan);
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double zi = z(i, 0);
        predicted(i, static_cast<Eigen::Index>(j)) = predict_survival(fit, std::span<const double>(&zi, 1), 0);
      }
    }
  }

  for (std::size_t j = 0; j < k; ++j) {
    double mae = 0.0, smae = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double truth = true_survival(cfg, grid[j].t1, grid[j].t2, z(i, 0));
      const double err = std::abs(predicted(i, static_cast<Eigen::Index>(j)) - truth);
      mae += err;
      smae += err / truth;
    }
    arm.mae.push_back(mae / static_cast<double>(z.rows()));
    arm.smae.push_back(smae / static_cast<double>(z.rows()));
  }
  arm.ok = true;
  return arm;
}

}  // namespace detail

/// Generate, censor, estimate and fit replication `index` of a study.
inline ReplicationOutcome run_single_replication(const StudyConfig& cfg, std::size_t index) {
  ReplicationOutcome out;
  out.seed = replication_seed(cfg.seed, index);
  Engine rng(out.seed);
  const auto pairs = draw_pairs(cfg, rng);
  const auto sample = apply_censoring(pairs, cfg.censoring, rng);
  for (const auto& r : sample.records()) {
    out.censored1 += r.delta1 == 0;
    out.censored2 += r.delta2 == 0;
  }
  out.censored1 /= static_cast<double>(sample.size());
  out.censored2 /= static_cast<double>(sample.size());

  std::optional<TimePointGrid> grid;
  std::string grid_error;
  try {
    grid = cfg.grid_source == GridSource::Fixed ? TimePointGrid(cfg.fixed_points)
                                                : select_equidistant(sample, cfg.selection);
    out.points = grid->points();
  } catch (const NumericalError& e) {
    grid_error = e.what();
  }
  for (auto est : cfg.estimators) {
    ArmOutcome arm;
    if (!grid) {
      arm.error = grid_error;
    } else {
      try {
        arm = detail::run_arm(cfg, sample, *grid, est);
      } catch (const NumericalError& e) {
        arm = ArmOutcome{};
        arm.error = e.what();
      }
    }
    out.arms.push_back(std::move(arm));
  }
  return out;
}

struct ParameterSummary {
  std::string name;
  double truth = 0.0;  // mean over replications of the true value
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;  // sqrt of the mean sandwich variance
  double coverage = 0.0;
};

struct ArmReport {
  Estimator estimator = Estimator::Dabrowska;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;  // first few, for diagnostics
  std::vector<ParameterSummary> parameters;
  std::vector<double> median_mae;  // per time point
  std::vector<double> mean_mae;
};

struct MaeRecord {
  std::size_t replication = 0;
  Estimator estimator = Estimator::Dabrowska;
  std::size_t point = 0;
  TimePoint at;
  double mae = 0.0;
  double smae = 0.0;
};

struct ReplicationReport {
  StudyConfig config;
  std::vector<ArmReport> arms;
  std::vector<MaeRecord> mae;
  std::vector<std::uint64_t> seeds;
  double censored1 = 0.0;  // mean censoring fractions
  double censored2 = 0.0;
  double seconds = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace detail

/// Fold per-replication outcomes (in index order) into a report.
inline ReplicationReport aggregate(const StudyConfig& cfg, const std::vector<ReplicationOutcome>& outcomes) {
  ReplicationReport rep;
  rep.config = cfg;
  const double q = boost::math::quantile(boost::math::normal(), 0.5 + cfg.level / 2.0);
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    rep.seeds.push_back(outcomes[r].seed);
    rep.censored1 += outcomes[r].censored1 / static_cast<double>(outcomes.size());
    rep.censored2 += outcomes[r].censored2 / static_cast<double>(outcomes.size());
  }

  for (std::size_t a = 0; a < cfg.estimators.size(); ++a) {
    ArmReport arm;
    arm.estimator = cfg.estimators[a];
    std::vector<const ArmOutcome*> good;
    for (const auto& o : outcomes) {
      if (o.arms[a].ok) {
        good.push_back(&o.arms[a]);
      } else {
        ++arm.failures;
        if (arm.failure_messages.size() < 5) arm.failure_messages.push_back(o.arms[a].error);
      }
    }
    arm.successes = good.size();
    if (static_cast<double>(arm.failures) > cfg.max_failure_rate * static_cast<double>(outcomes.size()))
      throw NumericalError(to_string(arm.estimator) + ": " + std::to_string(arm.failures) + " of " +
                           std::to_string(outcomes.size()) + " replications failed" +
                           (arm.failure_messages.empty() ? "" : "; first: " + arm.failure_messages.front()));
    if (good.empty()) {
      rep.arms.push_back(std::move(arm));
      continue;
    }

    const std::size_t k = good.front()->mae.size();
    const auto names = parameter_names(cfg, k);
    const double m = static_cast<double>(good.size());
    for (std::size_t p = 0; p < names.size(); ++p) {
      ParameterSummary s;
      s.name = names[p];
      double var = 0.0, hits = 0.0;
      for (const auto* g : good) {
        s.mean += g->estimate[p] / m;
        s.truth += g->truth[p] / m;
        var += g->se[p] * g->se[p] / m;
        hits += std::abs(g->estimate[p] - g->truth[p]) <= q * g->se[p];
      }
      double ss = 0.0;
      for (const auto* g : good) ss += (g->estimate[p] - s.mean) * (g->estimate[p] - s.mean);
      s.sd = good.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
      s.se = std::sqrt(var);
      s.coverage = std::isnan(s.truth) ? s.truth : hits / m;
      arm.parameters.push_back(s);
    }
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> col;
      for (const auto* g : good) col.push_back(g->mae[j]);
      arm.median_mae.push_back(detail::median(col));
      arm.mean_mae.push_back(std::accumulate(col.begin(), col.end(), 0.0) / m);
    }
    rep.arms.push_back(std::move(arm));
  }

  for (std::size_t r = 0; r < outcomes.size(); ++r)
    for (std::size_t a = 0; a < cfg.estimators.size(); ++a) {
      const auto& arm = outcomes[r].arms[a];
      if (!arm.ok) continue;
      for (std::size_t j = 0; j < arm.mae.size(); ++j)
        rep.mae.push_back({r, cfg.estimators[a], j, outcomes[r].points[j], arm.mae[j], arm.smae[j]});
    }
  return rep;
}

/// Monte Carlo study. Replication r uses the stream replication_seed(seed, r),
/// so results do not depend on scheduling or the worker count.
inline ReplicationReport run_replication(const StudyConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<ReplicationOutcome> outcomes(cfg.m);
  parallel_for(cfg.m, cfg.workers, [&](std::size_t r) { outcomes[r] = run_single_replication(cfg, r); });
  auto rep = aggregate(cfg, outcomes);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace bivarps
