#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/univariate.hpp"

namespace bivarps {

enum class Estimator { LinYing, LinYingBivariate, Dabrowska };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::LinYing: return "ly";
    case Estimator::LinYingBivariate: return "ly2";
    case Estimator::Dabrowska: return "dab";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "ly") return Estimator::LinYing;
  if (s == "ly2") return Estimator::LinYingBivariate;
  if (s == "dab") return Estimator::Dabrowska;
  throw ValidationError("unknown estimator '" + std::string(s) + "' (expected ly, ly2 or dab)");
}

/// Marker stored where an estimator is undefined (zero censoring survival).
inline constexpr double kNotAvailable = std::numeric_limits<double>::quiet_NaN();

inline bool is_available(double v) noexcept { return !std::isnan(v); }

/// Step-surface estimate of S(t1,t2) on grid1 x grid2.
///
/// Both grids start at 0 and then list the distinct observed times of their
/// coordinate. A query returns the value at the largest grid point that is
/// componentwise <= (t1,t2); beyond the last atom the surface is flat.
/// Lin-Ying values are stored unclamped and may exceed 1.
class SurvivalSurface {
 public:
  SurvivalSurface(std::vector<double> grid1, std::vector<double> grid2, Eigen::MatrixXd values,
                  Estimator tag)
      : grid1_(std::move(grid1)), grid2_(std::move(grid2)), values_(std::move(values)), tag_(tag) {
    if (grid1_.empty() || grid2_.empty() || grid1_.front() != 0.0 || grid2_.front() != 0.0)
      throw ValidationError("surface grids must start at 0");
    if (values_.rows() != static_cast<Eigen::Index>(grid1_.size()) ||
        values_.cols() != static_cast<Eigen::Index>(grid2_.size()))
      throw ValidationError("surface values do not match grid sizes");
  }

  [[nodiscard]] double at(double t1, double t2) const { return values_(index1(t1), index2(t2)); }
  [[nodiscard]] bool available(double t1, double t2) const { return is_available(at(t1, t2)); }

  [[nodiscard]] Eigen::Index index1(double t) const { return locate(grid1_, t); }
  [[nodiscard]] Eigen::Index index2(double t) const { return locate(grid2_, t); }

  [[nodiscard]] const std::vector<double>& grid1() const noexcept { return grid1_; }
  [[nodiscard]] const std::vector<double>& grid2() const noexcept { return grid2_; }
  [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }
  [[nodiscard]] Estimator estimator() const noexcept { return tag_; }

 private:
  static Eigen::Index locate(const std::vector<double>& grid, double t) {
    if (!(t >= 0.0)) throw ValidationError("surface queried at negative time " + std::to_string(t));
    return static_cast<Eigen::Index>(std::upper_bound(grid.begin(), grid.end(), t) - grid.begin()) - 1;
  }

  std::vector<double> grid1_;
  std::vector<double> grid2_;
  Eigen::MatrixXd values_;
  Estimator tag_;
};

/// Cell increments of the bivariate cumulative hazard vector on the atom grid.
///
/// At cell (u,v), with R = #{Y1 >= u, Y2 >= v}:
///   lambda11 = #{Y1 = u, Y2 = v, both events} / R
///   lambda10 = #{Y1 = u, event 1, Y2 >= v} / R
///   lambda01 = #{Y1 >= u, Y2 = v, event 2} / R
/// and all three are 0 where R = 0.
struct HazardVector {
  std::vector<double> grid1;
  std::vector<double> grid2;
  Eigen::MatrixXd lambda11;
  Eigen::MatrixXd lambda10;
  Eigen::MatrixXd lambda01;
  Eigen::MatrixXd risk;

  [[nodiscard]] Eigen::Index row(double t) const {
    return static_cast<Eigen::Index>(std::lower_bound(grid1.begin(), grid1.end(), t) - grid1.begin());
  }
  [[nodiscard]] Eigen::Index col(double t) const {
    return static_cast<Eigen::Index>(std::lower_bound(grid2.begin(), grid2.end(), t) - grid2.begin());
  }
};

namespace detail {

inline std::vector<double> atom_grid(const BivariateSample& s, bool first) {
  std::vector<double> g{0.0};
  g.reserve(s.size() + 1);
  for (const auto& r : s.records()) g.push_back(first ? r.y1 : r.y2);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline std::size_t grid_index(const std::vector<double>& grid, double t) {
  return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
}

/// Largest grid index with grid[idx] <= t.
inline std::size_t floor_index(const std::vector<double>& grid, double t) {
  return static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), t) - grid.begin()) - 1;
}

/// Univariate atom table supporting Kaplan-Meier evaluation with one record
/// removed. The multiplication order matches kaplan_meier() on the reduced
/// data, so results agree bitwise with a full recomputation.
class AtomTable {
 public:
  AtomTable() = default;
  AtomTable(std::span<const double> times, std::span<const int> events) : event_(events.begin(), events.end()) {
    times_.assign(times.begin(), times.end());
    std::sort(times_.begin(), times_.end());
    times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
    d_.assign(times_.size(), 0);
    r_.assign(times_.size(), 0);
    index_.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      index_[i] = grid_index(times_, times[i]);
      d_[index_[i]] += events[i] != 0;
      ++r_[index_[i]];
    }
    for (std::size_t a = times_.size(); a-- > 1;) r_[a - 1] += r_[a];
  }

  /// Full-sample product-limit curve.
  [[nodiscard]] StepFunction curve() const {
    std::vector<double> jt, vals;
    double s = 1.0;
    for (std::size_t a = 0; a < times_.size(); ++a) {
      if (d_[a] == 0) continue;
      s *= 1.0 - static_cast<double>(d_[a]) / static_cast<double>(r_[a]);
      jt.push_back(times_[a]);
      vals.push_back(s);
    }
    return StepFunction(std::move(jt), std::move(vals), 1.0);
  }

  /// Product-limit survival at t, ignoring record `exclude` when set.
  [[nodiscard]] double survival(double t, std::optional<std::size_t> exclude = std::nullopt) const {
    double s = 1.0;
    for (std::size_t a = 0; a < times_.size() && times_[a] <= t; ++a) {
      std::size_t d = d_[a], r = r_[a];
      if (exclude) {
        const std::size_t ai = index_[*exclude];
        if (a <= ai) --r;
        if (a == ai && event_[*exclude] != 0) --d;
      }
      if (d == 0) continue;
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(r);
    }
    return s;
  }

 private:
  std::vector<double> times_;
  std::vector<std::size_t> d_;
  std::vector<std::size_t> r_;
  std::vector<std::size_t> index_;
  std::vector<int> event_;
};

/// A sample pre-sorted onto its atom grids, shared by every leave-one-out
/// evaluation so that only the per-record bookkeeping changes.
struct PreparedSample {
  std::vector<double> grid1, grid2;
  std::vector<std::size_t> row, col;
  std::vector<int> d1, d2;
  std::vector<double> y1, y2;
  AtomTable censor_max;  // (max(Y1,Y2), 1 - d1*d2)
  AtomTable censor1;     // (Y1, 1 - d1)
  AtomTable censor2;     // (Y2, 1 - d2)

  explicit PreparedSample(const BivariateSample& s)
      : grid1(atom_grid(s, true)), grid2(atom_grid(s, false)) {
    const std::size_t n = s.size();
    row.resize(n);
    col.resize(n);
    d1.resize(n);
    d2.resize(n);
    y1.resize(n);
    y2.resize(n);
    std::vector<double> cstar(n);
    std::vector<int> cev(n), c1(n), c2(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = s[i];
      y1[i] = r.y1;
      y2[i] = r.y2;
      d1[i] = r.delta1;
      d2[i] = r.delta2;
      row[i] = grid_index(grid1, r.y1);
      col[i] = grid_index(grid2, r.y2);
      cstar[i] = std::max(r.y1, r.y2);
      cev[i] = 1 - r.delta1 * r.delta2;
      c1[i] = 1 - r.delta1;
      c2[i] = 1 - r.delta2;
    }
    censor_max = AtomTable(cstar, cev);
    censor1 = AtomTable(y1, c1);
    censor2 = AtomTable(y2, c2);
  }

  [[nodiscard]] std::size_t size() const noexcept { return row.size(); }
};

/// Row-by-row sweep of the Dabrowska product over rows 0..max_row and
/// columns 0..max_col, with record `exclude` removed. Calls
/// `visit(u, span_of_S(u, 0..max_col))` after each row. Memory is
/// O(columns), so large samples never materialize the full grid.
///
/// Cell factor 1 + L with
///   L = (R d11 - d10 d01) / ((R - d10)(R - d01)),
/// the discrete cross-ratio increment built from the hazard increments of
/// HazardVector; cells with R = 0 or a vanishing denominator contribute 1.
template <class Visitor>
void dabrowska_sweep(const PreparedSample& ps, std::size_t max_row, std::size_t max_col,
                     std::optional<std::size_t> exclude, Visitor&& visit) {
  const std::size_t n = ps.size();
  const std::size_t width = max_col + 2;  // last slot collects columns beyond max_col
  const auto clamp_col = [&](std::size_t c) { return std::min(c, max_col + 1); };

  std::vector<std::vector<std::size_t>> by_row(max_row + 1);
  std::vector<double> active(width, 0.0), active_ev2(width, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (exclude && *exclude == i) continue;
    const std::size_t c = clamp_col(ps.col[i]);
    active[c] += 1.0;
    if (ps.d2[i]) active_ev2[c] += 1.0;
    if (ps.row[i] <= max_row) by_row[ps.row[i]].push_back(i);
  }

  // Column margin: Kaplan-Meier of (Y2, d2) on the grid.
  std::vector<double> km2(max_col + 1);
  {
    double at_risk = 0.0;
    for (double a : active) at_risk += a;
    double s = 1.0;
    for (std::size_t v = 0; v <= max_col; ++v) {
      if (active_ev2[v] > 0.0) s *= 1.0 - active_ev2[v] / at_risk;
      km2[v] = s;
      at_risk -= active[v];
    }
  }

  std::vector<double> prod(max_col + 1, 1.0), out(max_col + 1);
  std::vector<double> risk(width), ev1_row(width), d11_row(width);
  double km1 = 1.0;
  for (std::size_t u = 0; u <= max_row; ++u) {
    std::fill(ev1_row.begin(), ev1_row.end(), 0.0);
    std::fill(d11_row.begin(), d11_row.end(), 0.0);
    double row_events = 0.0;
    for (auto i : by_row[u]) {
      const std::size_t c = clamp_col(ps.col[i]);
      if (ps.d1[i]) {
        ev1_row[c] += 1.0;
        row_events += 1.0;
        if (ps.d2[i]) d11_row[c] += 1.0;
      }
    }
    // suffix sums give R(u, v) and d10(u, v)
    double r_acc = active[width - 1], e_acc = ev1_row[width - 1];
    for (std::size_t v = max_col + 1; v-- > 0;) {
      r_acc += active[v];
      e_acc += ev1_row[v];
      risk[v] = r_acc;
      ev1_row[v] = e_acc;
    }
    const double total = risk[0];
    if (row_events > 0.0) km1 *= 1.0 - row_events / total;

    double q = 1.0;
    for (std::size_t v = 0; v <= max_col; ++v) {
      const double r = risk[v], d10 = ev1_row[v], d01 = active_ev2[v], d11 = d11_row[v];
      if (r > 0.0 && (d11 > 0.0 || (d10 > 0.0 && d01 > 0.0))) {
        const double den = (r - d10) * (r - d01);
        if (den != 0.0) q *= 1.0 + (r * d11 - d10 * d01) / den;
      }
      prod[v] *= q;
      out[v] = km1 * km2[v] * prod[v];
    }
    visit(u, std::span<const double>(out));

    for (auto i : by_row[u]) {
      const std::size_t c = clamp_col(ps.col[i]);
      active[c] -= 1.0;
      if (ps.d2[i]) active_ev2[c] -= 1.0;
    }
  }
}

/// Lin-Ying type estimate at (t1,t2) with record `exclude` removed.
inline double lin_ying_at(const PreparedSample& ps, bool bivariate_censoring, double t1, double t2,
                          std::optional<std::size_t> exclude) {
  std::size_t count = 0, n = ps.size();
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps.y1[i] > t1 && ps.y2[i] > t2 && !(exclude && *exclude == i)) ++count;
  if (exclude) --n;
  const double g = bivariate_censoring
                       ? ps.censor1.survival(t1, exclude) * ps.censor2.survival(t2, exclude)
                       : ps.censor_max.survival(std::max(t1, t2), exclude);
  if (g == 0.0) return kNotAvailable;
  return (static_cast<double>(count) / static_cast<double>(n)) / g;
}

/// Estimator evaluated at each point, computing only the part of the grid
/// the points need.
inline std::vector<double> evaluate_points(const PreparedSample& ps, Estimator est,
                                           std::span<const TimePoint> points,
                                           std::optional<std::size_t> exclude = std::nullopt) {
  std::vector<double> out(points.size());
  if (est != Estimator::Dabrowska) {
    for (std::size_t j = 0; j < points.size(); ++j)
      out[j] = lin_ying_at(ps, est == Estimator::LinYingBivariate, points[j].t1, points[j].t2, exclude);
    return out;
  }
  std::vector<std::size_t> rows(points.size()), cols(points.size());
  std::size_t max_row = 0, max_col = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    rows[j] = floor_index(ps.grid1, points[j].t1);
    cols[j] = floor_index(ps.grid2, points[j].t2);
    max_row = std::max(max_row, rows[j]);
    max_col = std::max(max_col, cols[j]);
  }
  dabrowska_sweep(ps, max_row, max_col, exclude, [&](std::size_t u, std::span<const double> s) {
    for (std::size_t j = 0; j < points.size(); ++j)
      if (rows[j] == u) out[j] = s[cols[j]];
  });
  return out;
}

inline void check_times(double t1, double t2) {
  if (!(t1 >= 0.0) || !(t2 >= 0.0)) throw ValidationError("time points must be nonnegative");
}

}  // namespace detail

/// Lin-Ying estimator for one censoring variable acting on both times:
/// S(t1,t2) = P(Y1 > t1, Y2 > t2) / G(max(t1,t2)), with G the Kaplan-Meier
/// estimate of (max(Y1,Y2), 1 - d1*d2). Undefined cells hold kNotAvailable.
///
/// G(max(t1,t2)) can jump at a time observed in the other coordinate, so both
/// grids hold the observed times of both coordinates; the step surface then
/// reproduces the formula at every query point.
inline SurvivalSurface lin_ying(const BivariateSample& sample) {
  detail::PreparedSample ps(sample);
  std::vector<double> grid = ps.grid1;
  grid.insert(grid.end(), ps.grid2.begin(), ps.grid2.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto a = static_cast<Eigen::Index>(grid.size());

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(a + 1, a + 1);
  for (std::size_t i = 0; i < ps.size(); ++i)
    counts(static_cast<Eigen::Index>(detail::grid_index(grid, ps.y1[i])),
           static_cast<Eigen::Index>(detail::grid_index(grid, ps.y2[i]))) += 1.0;
  // tail(u, v) = #{Y1 > grid[u], Y2 > grid[v]}
  Eigen::MatrixXd tail = Eigen::MatrixXd::Zero(a + 1, a + 1);
  for (Eigen::Index u = a; u-- > 0;)
    for (Eigen::Index v = a; v-- > 0;)
      tail(u, v) = counts(u + 1, v + 1) + tail(u + 1, v) + tail(u, v + 1) - tail(u + 1, v + 1);

  const StepFunction censor = ps.censor_max.curve();
  std::vector<double> g(grid.size());
  for (std::size_t u = 0; u < grid.size(); ++u) g[u] = censor(grid[u]);
  const double n = static_cast<double>(ps.size());
  Eigen::MatrixXd values(a, a);
  for (Eigen::Index u = 0; u < a; ++u)
    for (Eigen::Index v = 0; v < a; ++v) {
      const double gm = g[static_cast<std::size_t>(std::max(u, v))];
      values(u, v) = gm == 0.0 ? kNotAvailable : (tail(u, v) / n) / gm;
    }
  return SurvivalSurface(grid, grid, std::move(values), Estimator::LinYing);
}

/// Lin-Ying estimator adapted to independent censoring of each coordinate:
/// the denominator becomes G1(t1) G2(t2).
inline SurvivalSurface lin_ying_bivariate(const BivariateSample& sample) {
  detail::PreparedSample ps(sample);
  const auto a = ps.grid1.size(), b = ps.grid2.size();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a + 1),
                                                 static_cast<Eigen::Index>(b + 1));
  for (std::size_t i = 0; i < ps.size(); ++i)
    counts(static_cast<Eigen::Index>(ps.row[i]), static_cast<Eigen::Index>(ps.col[i])) += 1.0;
  Eigen::MatrixXd tail = Eigen::MatrixXd::Zero(counts.rows(), counts.cols());
  for (Eigen::Index u = static_cast<Eigen::Index>(a); u-- > 0;)
    for (Eigen::Index v = static_cast<Eigen::Index>(b); v-- > 0;)
      tail(u, v) = counts(u + 1, v + 1) + tail(u + 1, v) + tail(u, v + 1) - tail(u + 1, v + 1);

  const StepFunction c1 = ps.censor1.curve(), c2 = ps.censor2.curve();
  std::vector<double> g1(a), g2(b);
  for (std::size_t u = 0; u < a; ++u) g1[u] = c1(ps.grid1[u]);
  for (std::size_t v = 0; v < b; ++v) g2[v] = c2(ps.grid2[v]);

  const double n = static_cast<double>(ps.size());
  Eigen::MatrixXd values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  for (std::size_t u = 0; u < a; ++u)
    for (std::size_t v = 0; v < b; ++v) {
      const double g = g1[u] * g2[v];
      const auto iu = static_cast<Eigen::Index>(u), iv = static_cast<Eigen::Index>(v);
      values(iu, iv) = g == 0.0 ? kNotAvailable : (tail(iu, iv) / n) / g;
    }
  return SurvivalSurface(std::move(ps.grid1), std::move(ps.grid2), std::move(values),
                         Estimator::LinYingBivariate);
}

/// Double- and single-failure hazard increments with their risk sets.
inline HazardVector dabrowska_hazards(const BivariateSample& sample) {
  detail::PreparedSample ps(sample);
  const auto a = static_cast<Eigen::Index>(ps.grid1.size());
  const auto b = static_cast<Eigen::Index>(ps.grid2.size());
  Eigen::MatrixXd at(a + 1, b + 1), e1(a + 1, b + 1), e2(a + 1, b + 1), e11(a, b);
  at.setZero();
  e1.setZero();
  e2.setZero();
  e11.setZero();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto u = static_cast<Eigen::Index>(ps.row[i]), v = static_cast<Eigen::Index>(ps.col[i]);
    at(u, v) += 1.0;
    if (ps.d1[i]) e1(u, v) += 1.0;
    if (ps.d2[i]) e2(u, v) += 1.0;
    if (ps.d1[i] && ps.d2[i]) e11(u, v) += 1.0;
  }
  // R(u,v) = #{row >= u, col >= v}; d10 = row u, col >= v; d01 = row >= u, col v
  Eigen::MatrixXd risk = Eigen::MatrixXd::Zero(a + 1, b + 1);
  Eigen::MatrixXd d10 = Eigen::MatrixXd::Zero(a + 1, b + 1);
  Eigen::MatrixXd d01 = Eigen::MatrixXd::Zero(a + 1, b + 1);
  for (Eigen::Index u = a; u-- > 0;)
    for (Eigen::Index v = b; v-- > 0;) {
      risk(u, v) = at(u, v) + risk(u + 1, v) + risk(u, v + 1) - risk(u + 1, v + 1);
      d10(u, v) = e1(u, v) + d10(u, v + 1);
      d01(u, v) = e2(u, v) + d01(u + 1, v);
    }

  HazardVector h{ps.grid1, ps.grid2, Eigen::MatrixXd::Zero(a, b), Eigen::MatrixXd::Zero(a, b),
                 Eigen::MatrixXd::Zero(a, b), risk.topLeftCorner(a, b)};
  for (Eigen::Index u = 0; u < a; ++u)
    for (Eigen::Index v = 0; v < b; ++v) {
      const double r = risk(u, v);
      if (r <= 0.0) continue;
      h.lambda11(u, v) = e11(u, v) / r;
      h.lambda10(u, v) = d10(u, v) / r;
      h.lambda01(u, v) = d01(u, v) / r;
    }
  return h;
}

/// Dabrowska product-integral estimator:
/// S(t1,t2) = KM1(t1) KM2(t2) prod_{u<=t1, v<=t2} (1 + L(du,dv)).
inline SurvivalSurface dabrowska(const BivariateSample& sample) {
  detail::PreparedSample ps(sample);
  const auto a = ps.grid1.size(), b = ps.grid2.size();
  Eigen::MatrixXd values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  detail::dabrowska_sweep(ps, a - 1, b - 1, std::nullopt, [&](std::size_t u, std::span<const double> s) {
    for (std::size_t v = 0; v < b; ++v) values(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = s[v];
  });
  return SurvivalSurface(std::move(ps.grid1), std::move(ps.grid2), std::move(values), Estimator::Dabrowska);
}

inline SurvivalSurface estimate_surface(const BivariateSample& sample, Estimator est) {
  switch (est) {
    case Estimator::LinYing: return lin_ying(sample);
    case Estimator::LinYingBivariate: return lin_ying_bivariate(sample);
    case Estimator::Dabrowska: return dabrowska(sample);
  }
  throw ValidationError("unknown estimator");
}

/// Estimator evaluated at a handful of points without building the whole surface.
inline std::vector<double> estimate_at(const BivariateSample& sample, Estimator est,
                                       std::span<const TimePoint> points) {
  for (const auto& p : points) detail::check_times(p.t1, p.t2);
  detail::PreparedSample ps(sample);
  return detail::evaluate_points(ps, est, points);
}

namespace detail {

template <class Integrand>
double integrate_diagonal(const SurvivalSurface& surface, double tau, Integrand&& f) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive and finite");
  std::vector<double> breaks;
  for (double t : surface.grid1()) if (t < tau) breaks.push_back(t);
  for (double t : surface.grid2()) if (t < tau) breaks.push_back(t);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double t = breaks[k];
    const double next = k + 1 < breaks.size() ? breaks[k + 1] : tau;
    const double value = f(t);
    if (!is_available(value))
      throw NumericalError("surface not available at diagonal point t=" + format_double(t));
    total += value * (next - t);
  }
  return total;
}

}  // namespace detail

/// Restricted mean of min(T1, T2, tau): integral of S(t,t) over [0, tau].
inline double restricted_mean_min(const SurvivalSurface& surface, double tau) {
  return detail::integrate_diagonal(surface, tau, [&](double t) { return surface.at(t, t); });
}

/// Restricted mean of min(max(T1, T2), tau): integral of S(t,0) + S(0,t) - S(t,t).
inline double restricted_mean_max(const SurvivalSurface& surface, double tau) {
  return detail::integrate_diagonal(surface, tau, [&](double t) {
    return surface.at(t, 0.0) + surface.at(0.0, t) - surface.at(t, t);
  });
}

}  // namespace bivarps
