#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/pseudo.hpp"

namespace bivarps {

enum class LinkKind { Logit, Cloglog, Identity, Log };

/// Link g with its inverse and the derivative of the inverse.
class LinkFunction {
 public:
  // Logit linear predictors are clamped to +-kLogitClamp before inversion.
  static constexpr double kLogitClamp = 30.0;

  constexpr LinkFunction(LinkKind kind = LinkKind::Logit) noexcept : kind_(kind) {}

  static LinkFunction parse(std::string_view name) {
    if (name == "logit") return LinkKind::Logit;
    if (name == "cloglog") return LinkKind::Cloglog;
    if (name == "identity") return LinkKind::Identity;
    if (name == "log") return LinkKind::Log;
    throw ValidationError("unknown link '" + std::string(name) + "' (expected logit, cloglog, identity or log)");
  }

  [[nodiscard]] LinkKind kind() const noexcept { return kind_; }

  [[nodiscard]] std::string name() const {
    switch (kind_) {
      case LinkKind::Logit: return "logit";
      case LinkKind::Cloglog: return "cloglog";
      case LinkKind::Identity: return "identity";
      case LinkKind::Log: return "log";
    }
    return "?";
  }

  [[nodiscard]] double forward(double x) const {
    switch (kind_) {
      case LinkKind::Logit: return std::log(x / (1.0 - x));
      case LinkKind::Cloglog: return std::log(-std::log1p(-x));
      case LinkKind::Identity: return x;
      case LinkKind::Log: return std::log(x);
    }
    return x;
  }

  [[nodiscard]] double inverse(double eta) const {
    switch (kind_) {
      case LinkKind::Logit:
        return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
      case LinkKind::Cloglog: return -std::expm1(-std::exp(eta));
      case LinkKind::Identity: return eta;
      case LinkKind::Log: return std::exp(eta);
    }
    return eta;
  }

  [[nodiscard]] double inverse_derivative(double eta) const {
    switch (kind_) {
      case LinkKind::Logit: {
        const double e = std::exp(-std::abs(eta));
        return e / ((1.0 + e) * (1.0 + e));
      }
      case LinkKind::Cloglog: return std::exp(eta - std::exp(eta));
      case LinkKind::Identity: return 1.0;
      case LinkKind::Log: return std::exp(eta);
    }
    return 1.0;
  }

  [[nodiscard]] double inverse_second_derivative(double eta) const {
    switch (kind_) {
      case LinkKind::Logit: {
        const double mu = inverse(eta);
        return inverse_derivative(eta) * (1.0 - 2.0 * mu);
      }
      case LinkKind::Cloglog: return std::exp(eta - std::exp(eta)) * (1.0 - std::exp(eta));
      case LinkKind::Identity: return 0.0;
      case LinkKind::Log: return std::exp(eta);
    }
    return 0.0;
  }

 private:
  LinkKind kind_;
};

/// Stacked regression data: row i*k + j holds (e_j | z_i) and pseudo-value (i, j).
struct StackedDesign {
  Eigen::MatrixXd rows;
  Eigen::VectorXd response;
  std::vector<std::size_t> cluster_id;
  std::size_t clusters = 0;
  std::size_t k = 0;  // rows per cluster

  [[nodiscard]] Eigen::Index num_coefficients() const noexcept { return rows.cols(); }
};

/// Build the stacked design from an n x k response matrix and n x p covariates.
inline StackedDesign stack_design(const Eigen::MatrixXd& responses, const Eigen::MatrixXd& covariates) {
  const Eigen::Index n = responses.rows(), k = responses.cols(), p = covariates.cols();
  if (covariates.rows() != n) throw ValidationError("covariate rows do not match response rows");
  if (k < 1) throw ValidationError("at least one time point is required");
  StackedDesign d;
  d.rows = Eigen::MatrixXd::Zero(n * k, k + p);
  d.response.resize(n * k);
  d.cluster_id.resize(static_cast<std::size_t>(n * k));
  d.clusters = static_cast<std::size_t>(n);
  d.k = static_cast<std::size_t>(k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index r = i * k + j;
      d.rows(r, j) = 1.0;
      d.rows.row(r).tail(p) = covariates.row(i);
      d.response[r] = responses(i, j);
      d.cluster_id[static_cast<std::size_t>(r)] = static_cast<std::size_t>(i);
    }
  return d;
}

/// Covariate matrix (n x p) of a sample.
inline Eigen::MatrixXd covariate_matrix(const BivariateSample& sample) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(sample.num_covariates()));
  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t c = 0; c < sample.num_covariates(); ++c)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = sample[i].z[c];
  return z;
}

struct GeeOptions {
  int max_iterations = 100;
  int max_halvings = 20;
  double score_tolerance = 1e-8;
  double step_tolerance = 1e-10;
};

/// Fitted stacked GEE: k intercepts followed by p slopes.
struct GeeFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  int iterations = 0;
  bool converged = false;
  double max_update = 0.0;
  double max_score = 0.0;
  std::size_t clamped = 0;  // logit linear predictors clamped at the solution
  std::size_t k = 0;
  std::size_t p = 0;
  LinkFunction link;
  std::vector<std::string> names;

  [[nodiscard]] Eigen::VectorXd standard_errors() const { return vcov.diagonal().cwiseSqrt(); }
};

/// Raised when scoring fails to converge; carries the last iterate.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, GeeFit last) : NumericalError(what), last_(std::move(last)) {}
  [[nodiscard]] const GeeFit& last() const noexcept { return last_; }

 private:
  GeeFit last_;
};

namespace detail {

struct ScoreState {
  Eigen::VectorXd score;        // U(beta)
  Eigen::MatrixXd information;  // I(beta)
  Eigen::MatrixXd hessian;      // exact Hessian of rss / 2, filled on request
  Eigen::MatrixXd cluster_scores;  // column i = U_i(beta)
  double rss = 0.0;                // sum of squared residuals; U = -grad(rss)/2 when V = I
  std::size_t clamped = 0;
};

inline ScoreState score_state(const StackedDesign& d, const Eigen::VectorXd& beta, const LinkFunction& link,
                              bool keep_clusters, bool want_hessian = false) {
  const Eigen::Index q = d.num_coefficients();
  ScoreState st;
  st.score = Eigen::VectorXd::Zero(q);
  st.information = Eigen::MatrixXd::Zero(q, q);
  if (keep_clusters) st.cluster_scores = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(d.clusters));
  if (want_hessian) st.hessian = Eigen::MatrixXd::Zero(q, q);
  const Eigen::VectorXd eta_all = d.rows * beta;
  for (Eigen::Index r = 0; r < d.rows.rows(); ++r) {
    double eta = eta_all[r];
    if (link.kind() == LinkKind::Logit && std::abs(eta) > LinkFunction::kLogitClamp) {
      eta = std::clamp(eta, -LinkFunction::kLogitClamp, LinkFunction::kLogitClamp);
      ++st.clamped;
    }
    const double mu = link.inverse(eta), dmu = link.inverse_derivative(eta);
    const auto x = d.rows.row(r).transpose();
    const double resid = d.response[r] - mu;
    st.rss += resid * resid;
    const Eigen::VectorXd u = (dmu * resid) * x;
    st.score += u;
    st.information.selfadjointView<Eigen::Lower>().rankUpdate(x, dmu * dmu);
    if (want_hessian)
      st.hessian.selfadjointView<Eigen::Lower>().rankUpdate(x, dmu * dmu - link.inverse_second_derivative(eta) * resid);
    if (keep_clusters) st.cluster_scores.col(static_cast<Eigen::Index>(d.cluster_id[static_cast<std::size_t>(r)])) += u;
  }
  st.information = st.information.selfadjointView<Eigen::Lower>();
  if (want_hessian) st.hessian = st.hessian.selfadjointView<Eigen::Lower>();
  return st;
}

inline std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

}  // namespace detail

/// Ordinary sandwich I^-1 (sum_i U_i U_i^T) I^-1 at beta.
inline Eigen::MatrixXd sandwich_variance(const StackedDesign& design, const Eigen::VectorXd& beta,
                                         const LinkFunction& link) {
  const auto st = detail::score_state(design, beta, link, true);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(st.information);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 1e-12 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff())).any())
    throw NumericalError("information matrix is singular at the solution");
  const Eigen::MatrixXd meat = st.cluster_scores * st.cluster_scores.transpose();
  const Eigen::MatrixXd half = ldlt.solve(meat);
  Eigen::MatrixXd v = ldlt.solve(half.transpose());
  return 0.5 * (v + v.transpose());
}

/// Solve sum_i D_i^T (theta_i - mu_i) = 0 with identity working covariance by
/// Fisher scoring from beta = 0. With V = I the scoring step is a Gauss-Newton
/// step for the residual sum of squares, so steps are halved until that drops;
/// |U| itself need not fall along the step far from the root.
inline GeeFit fit_gee(const StackedDesign& design, const LinkFunction& link, const GeeOptions& opt = {}) {
  const Eigen::Index q = design.num_coefficients();
  if (!design.response.allFinite()) throw ValidationError("responses must be finite");
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(design.rows).rank() < q)
    throw ValidationError("design matrix is rank deficient");

  GeeFit fit;
  fit.k = design.k;
  fit.p = static_cast<std::size_t>(q) - design.k;
  fit.link = link;
  fit.beta = Eigen::VectorXd::Zero(q);

  auto st = detail::score_state(design, fit.beta, link, false);
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    if (st.score.cwiseAbs().maxCoeff() < opt.score_tolerance) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(st.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("information matrix is not positive definite during scoring");
    Eigen::VectorXd step = ldlt.solve(st.score);
    if (!step.allFinite()) throw NumericalError("non-finite scoring step");

    // slack for round-off once the sum of squares is flat near the root
    const double allowed = st.rss + 1e-13 * std::max(1.0, st.rss);
    double full_update = step.cwiseAbs().maxCoeff();
    auto next = detail::score_state(design, fit.beta + step, link, false);
    if (!(next.rss <= allowed)) {
      // Gauss-Newton can stall when pseudo-values leave [0,1] and residuals are
      // large; take the exact Newton direction instead when it is a descent one
      const auto exact = detail::score_state(design, fit.beta, link, false, true);
      const Eigen::LLT<Eigen::MatrixXd> llt(exact.hessian);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd newton = llt.solve(st.score);
        if (newton.allFinite()) {
          step = newton;
          full_update = step.cwiseAbs().maxCoeff();
          next = detail::score_state(design, fit.beta + step, link, false);
        }
      }
    }
    for (int h = 0; h < opt.max_halvings && !(next.rss <= allowed); ++h) {
      step *= 0.5;
      next = detail::score_state(design, fit.beta + step, link, false);
    }
    fit.beta += step;
    st = std::move(next);
    fit.iterations = iter;
    fit.max_update = step.cwiseAbs().maxCoeff();
    if (full_update < opt.step_tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.max_score = st.score.cwiseAbs().maxCoeff();
  fit.clamped = st.clamped;
  if (!fit.converged && fit.max_score < opt.score_tolerance) fit.converged = true;
  if (!fit.converged)
    throw ConvergenceError("GEE did not converge after " + std::to_string(opt.max_iterations) +
                               " iterations; last beta " + detail::format_vector(fit.beta) +
                               ", max update " + std::to_string(fit.max_update),
                           fit);
  try {
    fit.vcov = sandwich_variance(design, fit.beta, link);
  } catch (const NumericalError& e) {
    if (fit.clamped == 0) throw;
    throw NumericalError(std::string(e.what()) + " (" + std::to_string(fit.clamped) +
                         " logit linear predictors clamped at +-30)");
  }
  for (std::size_t j = 0; j < fit.k; ++j) fit.names.push_back("beta0[" + std::to_string(j) + "]");
  for (std::size_t c = 0; c < fit.p; ++c) fit.names.push_back("beta[" + std::to_string(c) + "]");
  return fit;
}

/// Fit the stacked model to a pseudo-matrix with one intercept per time point
/// and shared slopes for the covariate columns.
inline GeeFit fit_gee(const PseudoMatrix& pseudo, const Eigen::MatrixXd& covariates, const LinkFunction& link,
                      const GeeOptions& opt = {}) {
  return fit_gee(stack_design(pseudo.values, covariates), link, opt);
}

/// Fitted g^-1(beta0_j + beta^T z).
inline double linear_predictor(const GeeFit& fit, std::span<const double> z, std::size_t j) {
  if (j >= fit.k) throw ValidationError("time-point index " + std::to_string(j) + " out of range");
  if (z.size() != fit.p)
    throw ValidationError("expected " + std::to_string(fit.p) + " covariates, got " + std::to_string(z.size()));
  double eta = fit.beta[static_cast<Eigen::Index>(j)];
  for (std::size_t c = 0; c < fit.p; ++c) eta += fit.beta[static_cast<Eigen::Index>(fit.k + c)] * z[c];
  return eta;
}

inline double predict_survival(const GeeFit& fit, std::span<const double> z, std::size_t j) {
  return fit.link.inverse(linear_predictor(fit, z, j));
}

enum class Conditioning {
  GivenFailed,    // P(T1 > t1 | T2 <= t2) = (S(t1,0) - S(t1,t2)) / (1 - S(0,t2))
  GivenSurvived,  // P(T1 > t1 | T2 > t2)  = S(t1,t2) / S(0,t2)
};

/// Fitted time-point indices of (t1,t2), (t1,0) and (0,t2).
struct ConditionalIndices {
  std::size_t both = 0;
  std::size_t first_only = 0;
  std::size_t second_only = 0;
};

struct ConditionalEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

namespace detail {

constexpr double kMinConditioningProbability = 1e-10;

}  // namespace detail

/// h(s) for s = (S(t1,t2), S(t1,0), S(0,t2)).
inline double conditional_probability(Conditioning c, const std::array<double, 3>& s) {
  if (c == Conditioning::GivenFailed) {
    const double den = 1.0 - s[2];
    if (den < detail::kMinConditioningProbability)
      throw NumericalError("conditioning event T2 <= t2 has vanishing estimated probability");
    return (s[1] - s[0]) / den;
  }
  if (s[2] < detail::kMinConditioningProbability)
    throw NumericalError("conditioning event T2 > t2 has vanishing estimated probability");
  return s[0] / s[2];
}

inline std::array<double, 3> conditional_gradient(Conditioning c, const std::array<double, 3>& s) {
  if (c == Conditioning::GivenFailed) {
    const double den = 1.0 - s[2];
    return {-1.0 / den, 1.0 / den, (s[1] - s[0]) / (den * den)};
  }
  return {1.0 / s[2], 0.0, -s[0] / (s[2] * s[2])};
}

/// Fitted survival at the three indices.
inline std::array<double, 3> conditional_inputs(const GeeFit& fit, std::span<const double> z,
                                                const ConditionalIndices& idx) {
  return {predict_survival(fit, z, idx.both), predict_survival(fit, z, idx.first_only),
          predict_survival(fit, z, idx.second_only)};
}

/// Delta-method variance grad^T Phi' (X_z^T V X_z) Phi' grad, where V is the
/// fitted sandwich covariance of beta, X_z holds the design columns of the
/// three time points at z and Phi' the inverse-link derivatives there.
inline double delta_method_variance(const GeeFit& fit, std::span<const double> z, const ConditionalIndices& idx,
                                    const std::array<double, 3>& gradient) {
  const std::array<std::size_t, 3> js{idx.both, idx.first_only, idx.second_only};
  const auto q = static_cast<Eigen::Index>(fit.k + fit.p);
  Eigen::MatrixXd xz = Eigen::MatrixXd::Zero(q, 3);
  Eigen::Vector3d weighted;
  for (Eigen::Index c = 0; c < 3; ++c) {
    xz(static_cast<Eigen::Index>(js[static_cast<std::size_t>(c)]), c) = 1.0;
    for (std::size_t m = 0; m < fit.p; ++m) xz(static_cast<Eigen::Index>(fit.k + m), c) = z[m];
    const double eta = linear_predictor(fit, z, js[static_cast<std::size_t>(c)]);
    weighted[c] = gradient[static_cast<std::size_t>(c)] * fit.link.inverse_derivative(eta);
  }
  const Eigen::Matrix3d cov = xz.transpose() * fit.vcov * xz;
  return weighted.dot(cov * weighted);
}

/// Wald interval for a conditional survival probability.
inline ConditionalEstimate conditional_survival_ci(const GeeFit& fit, std::span<const double> z,
                                                   const ConditionalIndices& idx, Conditioning c,
                                                   double level = 0.95) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0,1)");
  for (auto j : {idx.both, idx.first_only, idx.second_only})
    if (j >= fit.k) throw ValidationError("time-point index " + std::to_string(j) + " out of range");
  const auto s = conditional_inputs(fit, z, idx);
  ConditionalEstimate out;
  out.estimate = conditional_probability(c, s);
  out.se = std::sqrt(std::max(0.0, delta_method_variance(fit, z, idx, conditional_gradient(c, s))));
  const double q = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
  out.lower = out.estimate - q * out.se;
  out.upper = out.estimate + q * out.se;
  return out;
}

/// Two-sided normal-reference p-value for a Wald statistic.
inline double wald_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace bivarps
