#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/parallel.hpp"

namespace bivarps {

/// Jackknife pseudo-observations of I(T1 > t1, T2 > t2) at k time points.
///
/// values(i, j) = n * full[j] - (n - 1) * loo(i, j), where full[j] is the
/// estimator on the whole sample and loo(i, j) on the sample without record i.
/// Entries are not clamped to [0, 1].
struct PseudoMatrix {
  Eigen::MatrixXd values;
  TimePointGrid grid;
  Estimator estimator = Estimator::Dabrowska;
  std::size_t n = 0;
  Eigen::VectorXd full;
  Eigen::MatrixXd loo;
};

namespace detail {

inline std::string describe(const TimePoint& p) {
  return "(" + format_double(p.t1) + "," + format_double(p.t2) + ")";
}

inline void check_pseudo_input(const BivariateSample& sample) {
  if (sample.size() < 2) throw ValidationError("pseudo-observations need at least 2 records");
}

inline void check_full(const Eigen::VectorXd& full, const TimePointGrid& grid, Estimator est) {
  for (Eigen::Index j = 0; j < full.size(); ++j)
    if (!is_available(full[j]))
      throw NumericalError("estimator " + to_string(est) + " undefined at time point " + std::to_string(j) +
                           " " + describe(grid[static_cast<std::size_t>(j)]) + " for the full sample");
}

inline void check_loo(double v, std::size_t i, std::size_t j, const TimePointGrid& grid, Estimator est) {
  if (!is_available(v))
    throw NumericalError("estimator " + to_string(est) + " undefined without record " + std::to_string(i + 1) +
                         " at time point " + std::to_string(j) + " " + describe(grid[j]));
}

inline PseudoMatrix assemble(Eigen::VectorXd full, Eigen::MatrixXd loo, const TimePointGrid& grid,
                             Estimator est) {
  const auto n = loo.rows();
  PseudoMatrix pm;
  pm.values = (static_cast<double>(n) * full.transpose()).replicate(n, 1) - static_cast<double>(n - 1) * loo;
  pm.grid = grid;
  pm.estimator = est;
  pm.n = static_cast<std::size_t>(n);
  pm.full = std::move(full);
  pm.loo = std::move(loo);
  return pm;
}

}  // namespace detail

/// Pseudo-observations with shared preprocessing: the sample is sorted onto
/// its atom grids once and each leave-one-out estimate only evaluates the
/// part of the grid below the largest requested point. Leave-one-out fits
/// run on up to `workers` threads (0 = hardware concurrency).
inline PseudoMatrix pseudo_observations(const BivariateSample& sample, const TimePointGrid& grid,
                                        Estimator est, std::size_t workers = 1) {
  detail::check_pseudo_input(sample);
  const detail::PreparedSample ps(sample);
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto k = static_cast<Eigen::Index>(grid.size());

  const auto full_vals = detail::evaluate_points(ps, est, grid.points());
  Eigen::VectorXd full = Eigen::Map<const Eigen::VectorXd>(full_vals.data(), k);
  detail::check_full(full, grid, est);

  Eigen::MatrixXd loo(n, k);
  parallel_for(sample.size(), workers, [&](std::size_t i) {
    const auto v = detail::evaluate_points(ps, est, grid.points(), i);
    for (std::size_t j = 0; j < v.size(); ++j) {
      detail::check_loo(v[j], i, j, grid, est);
      loo(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  });
  return detail::assemble(std::move(full), std::move(loo), grid, est);
}

/// Literal jackknife: build the full surface of every leave-one-out subsample
/// from scratch and read it at the grid points. Quadratic in memory per fit;
/// meant as the reference for pseudo_observations.
inline PseudoMatrix pseudo_observations_naive(const BivariateSample& sample, const TimePointGrid& grid,
                                              Estimator est) {
  detail::check_pseudo_input(sample);
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto k = static_cast<Eigen::Index>(grid.size());
  const auto surface = estimate_surface(sample, est);
  Eigen::VectorXd full(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& p = grid[static_cast<std::size_t>(j)];
    full[j] = surface.at(p.t1, p.t2);
  }
  detail::check_full(full, grid, est);

  Eigen::MatrixXd loo(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto sub = estimate_surface(sample.without(static_cast<std::size_t>(i)), est);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& p = grid[static_cast<std::size_t>(j)];
      loo(i, j) = sub.at(p.t1, p.t2);
      detail::check_loo(loo(i, j), static_cast<std::size_t>(i), static_cast<std::size_t>(j), grid, est);
    }
  }
  return detail::assemble(std::move(full), std::move(loo), grid, est);
}

enum class RestrictedMean { Min, Max };

/// Pseudo-observations of min(T1,T2,tau) or min(max(T1,T2),tau).
inline Eigen::VectorXd pseudo_restricted_mean(const BivariateSample& sample, double tau, RestrictedMean kind,
                                              Estimator est, std::size_t workers = 1) {
  detail::check_pseudo_input(sample);
  const auto functional = [&](const SurvivalSurface& s) {
    return kind == RestrictedMean::Min ? restricted_mean_min(s, tau) : restricted_mean_max(s, tau);
  };
  const double full = functional(estimate_surface(sample, est));
  const auto n = sample.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  parallel_for(n, workers, [&](std::size_t i) {
    const double loo = functional(estimate_surface(sample.without(i), est));
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(n) * full - static_cast<double>(n - 1) * loo;
  });
  return out;
}

}  // namespace bivarps
