#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bivarps/error.hpp"

namespace bivarps {

/// One subject: two possibly censored times, their event flags, and covariates.
struct BivariateRecord {
  double y1 = 0.0;
  int delta1 = 0;
  double y2 = 0.0;
  int delta2 = 0;
  std::vector<double> z;
};

/// Validated, immutable collection of bivariate records.
///
/// Every record has nonnegative finite times, flags in {0,1}, and a covariate
/// vector of the same length as `covariate_names`. Leave-one-out consumers
/// additionally require at least two records and check that themselves.
class BivariateSample {
 public:
  BivariateSample() = default;

  explicit BivariateSample(std::vector<BivariateRecord> records,
                           std::vector<std::string> covariate_names = {})
      : records_(std::move(records)), names_(std::move(covariate_names)) {
    if (records_.empty()) throw ValidationError("sample must contain at least one record");
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      const auto where = [i] { return "record " + std::to_string(i + 1) + ": "; };
      if (!std::isfinite(r.y1) || !std::isfinite(r.y2))
        throw ValidationError(where() + "times must be finite");
      if (r.y1 < 0.0 || r.y2 < 0.0) throw ValidationError(where() + "negative time");
      if ((r.delta1 != 0 && r.delta1 != 1) || (r.delta2 != 0 && r.delta2 != 1))
        throw ValidationError(where() + "event flag must be 0 or 1");
      if (r.z.size() != names_.size())
        throw ValidationError(where() + "expected " + std::to_string(names_.size()) +
                              " covariates, got " + std::to_string(r.z.size()));
    }
  }

  /// Convenience for covariate-free samples given as parallel columns.
  static BivariateSample from_columns(std::span<const double> y1, std::span<const int> d1,
                                      std::span<const double> y2, std::span<const int> d2) {
    if (y1.size() != d1.size() || y1.size() != y2.size() || y1.size() != d2.size())
      throw ValidationError("column lengths differ");
    std::vector<BivariateRecord> recs(y1.size());
    for (std::size_t i = 0; i < y1.size(); ++i) recs[i] = {y1[i], d1[i], y2[i], d2[i], {}};
    return BivariateSample(std::move(recs));
  }

  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] std::size_t num_covariates() const noexcept { return names_.size(); }
  [[nodiscard]] const std::vector<BivariateRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const BivariateRecord& operator[](std::size_t i) const { return records_[i]; }
  [[nodiscard]] const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  /// Copy of the sample without record `i`.
  [[nodiscard]] BivariateSample without(std::size_t i) const {
    std::vector<BivariateRecord> rest;
    rest.reserve(records_.size() - 1);
    for (std::size_t j = 0; j < records_.size(); ++j)
      if (j != i) rest.push_back(records_[j]);
    return BivariateSample(std::move(rest), names_);
  }

 private:
  std::vector<BivariateRecord> records_;
  std::vector<std::string> names_;
};

/// A bivariate time point (t1, t2).
struct TimePoint {
  double t1 = 0.0;
  double t2 = 0.0;
  friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

/// Ordered, nonempty list of distinct bivariate time points.
class TimePointGrid {
 public:
  TimePointGrid() = default;
  explicit TimePointGrid(std::vector<TimePoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw ValidationError("time-point grid must contain at least one point");
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const auto& p = points_[j];
      if (!std::isfinite(p.t1) || !std::isfinite(p.t2) || p.t1 < 0.0 || p.t2 < 0.0)
        throw ValidationError("time point " + std::to_string(j) + " must be finite and >= 0");
      for (std::size_t l = 0; l < j; ++l)
        if (points_[l] == p)
          throw ValidationError("time point " + std::to_string(j) + " duplicates point " +
                                std::to_string(l));
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] const TimePoint& operator[](std::size_t j) const { return points_[j]; }
  [[nodiscard]] const std::vector<TimePoint>& points() const noexcept { return points_; }
  [[nodiscard]] auto begin() const noexcept { return points_.begin(); }
  [[nodiscard]] auto end() const noexcept { return points_.end(); }

 private:
  std::vector<TimePoint> points_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

/// Shortest decimal representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parse a comma-separated CSV stream with a header row.
///
/// Required columns are `y1,d1,y2,d2`. When `covariate_columns` is empty every
/// other column becomes a covariate in file order; otherwise exactly the named
/// columns are taken, in the order given. Errors name the 1-based data row.
inline BivariateSample read_csv(std::istream& in, const std::vector<std::string>& covariate_columns = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV: header row required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = detail::split(line, ',');
  const auto find_col = [&](std::string_view name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };

  const std::ptrdiff_t c_y1 = find_col("y1"), c_d1 = find_col("d1"), c_y2 = find_col("y2"),
                       c_d2 = find_col("d2");
  for (auto [name, col] : {std::pair{"y1", c_y1}, {"d1", c_d1}, {"y2", c_y2}, {"d2", c_d2}})
    if (col < 0) throw ValidationError(std::string("missing column '") + name + "'");

  std::vector<std::string> names;
  std::vector<std::ptrdiff_t> cov_cols;
  if (covariate_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto h = header[c];
      if (h == "y1" || h == "d1" || h == "y2" || h == "d2") continue;
      names.emplace_back(h);
      cov_cols.push_back(static_cast<std::ptrdiff_t>(c));
    }
  } else {
    for (const auto& name : covariate_columns) {
      const auto col = find_col(name);
      if (col < 0) throw ValidationError("missing column '" + name + "'");
      names.push_back(name);
      cov_cols.push_back(col);
    }
  }

  std::vector<BivariateRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split(line, ',');
    const auto fail = [&](const std::string& what) {
      throw ValidationError("row " + std::to_string(row) + ": " + what);
    };
    if (cells.size() != header.size())
      fail("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    const auto number = [&](std::ptrdiff_t col) {
      double v = 0.0;
      if (cells[col].empty() || cells[col] == "NA")
        fail("missing value in column '" + std::string(header[col]) + "'");
      if (!detail::parse_double(cells[col], v))
        fail("non-numeric value '" + std::string(cells[col]) + "' in column '" +
             std::string(header[col]) + "'");
      return v;
    };
    const auto flag = [&](std::ptrdiff_t col) {
      const double v = number(col);
      if (v != 0.0 && v != 1.0)
        fail("column '" + std::string(header[col]) + "' must be 0 or 1, got " + std::string(cells[col]));
      return static_cast<int>(v);
    };
    BivariateRecord r;
    r.y1 = number(c_y1);
    r.delta1 = flag(c_d1);
    r.y2 = number(c_y2);
    r.delta2 = flag(c_d2);
    if (r.y1 < 0.0) fail("negative time in column 'y1'");
    if (r.y2 < 0.0) fail("negative time in column 'y2'");
    r.z.reserve(cov_cols.size());
    for (auto col : cov_cols) r.z.push_back(number(col));
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ValidationError("CSV contains a header but no data rows");
  return BivariateSample(std::move(records), std::move(names));
}

inline BivariateSample load_csv(const std::string& path,
                                const std::vector<std::string>& covariate_columns = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_csv(in, covariate_columns);
}

/// Inverse of read_csv: `y1,d1,y2,d2,<covariates>` at full precision.
inline void write_csv(std::ostream& out, const BivariateSample& sample) {
  out << "y1,d1,y2,d2";
  for (const auto& name : sample.covariate_names()) out << ',' << name;
  out << '\n';
  for (const auto& r : sample.records()) {
    out << detail::format_double(r.y1) << ',' << r.delta1 << ',' << detail::format_double(r.y2) << ','
        << r.delta2;
    for (double z : r.z) out << ',' << detail::format_double(z);
    out << '\n';
  }
}

/// Parse "t1:t2,t1:t2,..." into a grid.
inline TimePointGrid parse_points(std::string_view text) {
  std::vector<TimePoint> pts;
  for (auto item : detail::split(text, ',')) {
    const auto parts = detail::split(item, ':');
    TimePoint p;
    if (parts.size() != 2 || !detail::parse_double(parts[0], p.t1) || !detail::parse_double(parts[1], p.t2))
      throw ValidationError("bad time point '" + std::string(item) + "', expected t1:t2");
    pts.push_back(p);
  }
  return TimePointGrid(std::move(pts));
}

/// F(t1,t2) = n^-1 #{Y1 <= t1, Y2 <= t2} over the observed times.
inline double empirical_bivariate_cdf(const BivariateSample& sample, double t1, double t2) {
  std::size_t count = 0;
  for (const auto& r : sample.records())
    if (r.y1 <= t1 && r.y2 <= t2) ++count;
  return static_cast<double>(count) / static_cast<double>(sample.size());
}

}  // namespace bivarps
