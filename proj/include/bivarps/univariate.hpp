#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bivarps/error.hpp"

namespace bivarps {

/// Right-continuous step function on [0, inf).
///
/// Takes `initial_value` on [0, jump_times[0]) and `values[i]` on
/// [jump_times[i], jump_times[i+1]); flat after the last jump.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> jump_times, std::vector<double> values, double initial_value)
      : jumps_(std::move(jump_times)), values_(std::move(values)), initial_(initial_value) {
    if (jumps_.size() != values_.size()) throw ValidationError("step function: size mismatch");
    for (std::size_t i = 1; i < jumps_.size(); ++i)
      if (!(jumps_[i - 1] < jumps_[i])) throw ValidationError("step function: jumps must increase");
  }

  [[nodiscard]] double operator()(double t) const {
    if (t < 0.0) throw ValidationError("step function queried at negative time " + std::to_string(t));
    const auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t);
    return it == jumps_.begin() ? initial_ : values_[static_cast<std::size_t>(it - jumps_.begin()) - 1];
  }

  [[nodiscard]] const std::vector<double>& jump_times() const noexcept { return jumps_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] double initial_value() const noexcept { return initial_; }

 private:
  std::vector<double> jumps_;
  std::vector<double> values_;
  double initial_ = 1.0;
};

namespace detail {

/// Distinct observed times with event and removal counts, ascending.
struct Atom {
  double time;
  std::size_t events;
  std::size_t at_risk;  // #{T >= time}
};

inline std::vector<Atom> atoms(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw ValidationError("empty input");
  if (times.size() != events.size()) throw ValidationError("times and events differ in length");
  for (double t : times)
    if (!(t >= 0.0)) throw ValidationError("times must be nonnegative");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  std::vector<Atom> out;
  std::size_t remaining = times.size();
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    std::size_t d = 0, removed = 0;
    for (; k < order.size() && times[order[k]] == t; ++k, ++removed) d += events[order[k]] != 0;
    out.push_back({t, d, remaining});
    remaining -= removed;
  }
  return out;
}

}  // namespace detail

/// Product-limit estimate S(t) = prod_{s <= t} (1 - d_s / r_s).
///
/// Ties at one time form a single atom; everyone observed at s is in the risk
/// set at s, so events precede censorings. Flat after the last atom.
inline StepFunction kaplan_meier(std::span<const double> times, std::span<const int> events) {
  std::vector<double> jt, vals;
  double s = 1.0;
  for (const auto& a : detail::atoms(times, events)) {
    if (a.events == 0) continue;
    s *= 1.0 - static_cast<double>(a.events) / static_cast<double>(a.at_risk);
    jt.push_back(a.time);
    vals.push_back(s);
  }
  return StepFunction(std::move(jt), std::move(vals), 1.0);
}

/// Cumulative hazard Lambda(t) = sum_{s <= t} d_s / r_s.
inline StepFunction nelson_aalen(std::span<const double> times, std::span<const int> events) {
  std::vector<double> jt, vals;
  double h = 0.0;
  for (const auto& a : detail::atoms(times, events)) {
    if (a.events == 0) continue;
    h += static_cast<double>(a.events) / static_cast<double>(a.at_risk);
    jt.push_back(a.time);
    vals.push_back(h);
  }
  return StepFunction(std::move(jt), std::move(vals), 0.0);
}

}  // namespace bivarps
