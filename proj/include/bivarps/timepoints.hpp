#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"

namespace bivarps {

struct SelectionConfig {
  std::size_t k = 5;
  int lower_percentile = 20;  // starting rung of the 20/25/30 ladder
  double upper_percentile = 90.0;
  double cdf_floor = 0.1;

  void validate() const {
    if (k < 1) throw ValidationError("k must be at least 1");
    if (lower_percentile != 20 && lower_percentile != 25 && lower_percentile != 30)
      throw ValidationError("lower percentile must be 20, 25 or 30");
    if (!(upper_percentile > lower_percentile && upper_percentile < 100.0))
      throw ValidationError("upper percentile must lie between the lower percentile and 100");
    if (!(cdf_floor >= 0.0 && cdf_floor <= 1.0)) throw ValidationError("cdf floor must lie in [0,1]");
  }
};

/// Smallest observation x with empirical marginal CDF(x) >= p/100.
inline double empirical_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p * static_cast<double>(values.size()) / 100.0 - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size())));
  return values[idx - 1];
}

struct EquidistantSelection {
  TimePointGrid grid;
  int lower_percentile = 20;
  double lower_cdf = 0.0;  // F(t1^low, t2^low) at the chosen rung
  TimePoint lower;
  TimePoint upper;
};

/// Percentile-anchored equidistant grid with the full selection trace.
inline EquidistantSelection select_equidistant_detailed(const BivariateSample& sample, const SelectionConfig& cfg) {
  cfg.validate();
  if (sample.size() < 10) throw ValidationError("time-point selection needs at least 10 records");
  std::vector<double> y1, y2;
  for (const auto& r : sample.records()) {
    y1.push_back(r.y1);
    y2.push_back(r.y2);
  }

  EquidistantSelection out;
  bool found = false;
  for (int p : std::array{20, 25, 30}) {
    if (p < cfg.lower_percentile) continue;
    out.lower = {empirical_percentile(y1, p), empirical_percentile(y2, p)};
    out.lower_cdf = empirical_bivariate_cdf(sample, out.lower.t1, out.lower.t2);
    out.lower_percentile = p;
    if (out.lower_cdf >= cfg.cdf_floor) {
      found = true;
      break;
    }
  }
  if (!found)
    throw NumericalError("empirical CDF at the 30th percentiles is " + detail::format_double(out.lower_cdf) +
                         ", below the floor " + detail::format_double(cfg.cdf_floor));

  out.upper = {empirical_percentile(y1, cfg.upper_percentile), empirical_percentile(y2, cfg.upper_percentile)};
  std::vector<TimePoint> pts(cfg.k);
  for (std::size_t j = 0; j < cfg.k; ++j) {
    if (j + 1 == cfg.k && cfg.k > 1) {
      pts[j] = out.upper;
      continue;
    }
    const double f = cfg.k == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(cfg.k - 1);
    pts[j] = {out.lower.t1 + f * (out.upper.t1 - out.lower.t1), out.lower.t2 + f * (out.upper.t2 - out.lower.t2)};
  }
  out.grid = TimePointGrid(std::move(pts));
  return out;
}

inline TimePointGrid select_equidistant(const BivariateSample& sample, const SelectionConfig& cfg) {
  return select_equidistant_detailed(sample, cfg).grid;
}

struct GridPointCheck {
  TimePoint point;
  double cdf = 0.0;
  bool low = false;
  bool high = false;
};

/// Empirical CDF at each point, flagged when outside [band_low, band_high].
inline std::vector<GridPointCheck> validate_fixed_grid(const BivariateSample& sample, const TimePointGrid& grid,
                                                       double band_low = 0.10, double band_high = 0.90) {
  std::vector<GridPointCheck> out;
  for (const auto& p : grid) {
    GridPointCheck c;
    c.point = p;
    c.cdf = empirical_bivariate_cdf(sample, p.t1, p.t2);
    c.low = c.cdf < band_low;
    c.high = c.cdf > band_high;
    out.push_back(c);
  }
  return out;
}

}  // namespace bivarps
