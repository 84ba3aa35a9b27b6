#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/data_model.hpp"
#include "bivarps/error.hpp"
#include "bivarps/gee.hpp"
#include "bivarps/io.hpp"
#include "bivarps/pseudo.hpp"
#include "bivarps/simulate.hpp"
#include "bivarps/timepoints.hpp"

#ifndef BIVARPS_VERSION
#define BIVARPS_VERSION "0.0.0"
#endif
#ifndef BIVARPS_GIT_HASH
#define BIVARPS_GIT_HASH "unknown"
#endif

namespace bivarps::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

inline std::string version_string() { return std::string("bivarps ") + BIVARPS_VERSION + " (" + BIVARPS_GIT_HASH + ")"; }

namespace detail {

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

inline void report_error(std::ostream& err, const char* kind, const std::string& what) {
  err << "error: " << kind << ": " << one_line(what) << '\n';
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto part : bivarps::detail::split(s, ',')) out.emplace_back(part);
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    double v = 0.0;
    if (!bivarps::detail::parse_double(item, v))
      throw ValidationError(std::string("bad value '") + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

/// Destination stream for --out: the file when given, otherwise `fallback`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ValidationError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bivariate pseudo-observations: joint survival estimation, pseudo-values and GEE regression",
               "bivarps"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool quiet = false;
  std::string out_path;
  app.add_option("--seed", seed, "Master random seed")->capture_default_str();
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--quiet", quiet, "Suppress progress messages");
  app.add_option("--out", out_path, "Output file (default: standard output)");

  std::string input, estimator = "dab", points, covariates, link = "logit";

  auto* surface = app.add_subcommand("surface", "Estimate the joint survival surface as long-format CSV");
  surface->add_option("--input", input, "CSV with y1,d1,y2,d2 columns")->required();
  surface->add_option("--estimator", estimator, "ly, ly2 or dab")->capture_default_str();

  auto* pseudo = app.add_subcommand("pseudo", "Pseudo-observations at bivariate time points");
  pseudo->add_option("--input", input, "CSV with y1,d1,y2,d2 columns")->required();
  pseudo->add_option("--estimator", estimator, "ly, ly2 or dab")->capture_default_str();
  pseudo->add_option("--points", points, "Time points as t1:t2,t1:t2,...")->required();

  SelectionConfig sel;
  std::string check_points;
  auto* pts = app.add_subcommand("points", "Percentile-anchored equidistant time points");
  pts->add_option("--input", input, "CSV with y1,d1,y2,d2 columns")->required();
  pts->add_option("--k", sel.k, "Number of points")->capture_default_str();
  pts->add_option("--lower", sel.lower_percentile, "Starting lower percentile (20, 25 or 30)")->capture_default_str();
  pts->add_option("--upper", sel.upper_percentile, "Upper percentile")->capture_default_str();
  pts->add_option("--cdf-floor", sel.cdf_floor, "Minimum empirical CDF at the lower point")->capture_default_str();
  pts->add_option("--check", check_points, "Report the empirical CDF of these points instead");

  auto* fit = app.add_subcommand("fit", "Fit the stacked GEE model to pseudo-observations");
  fit->add_option("--input", input, "CSV with y1,d1,y2,d2 and covariate columns")->required();
  fit->add_option("--covariates", covariates, "Covariate columns (default: all other columns)");
  fit->add_option("--estimator", estimator, "ly, ly2 or dab")->capture_default_str();
  fit->add_option("--points", points, "Time points as t1:t2,t1:t2,...")->required();
  fit->add_option("--link", link, "logit, cloglog, identity or log")->capture_default_str();

  std::string fit_path, z_text, conditional, indices;
  std::size_t point_index = 0;
  double level = 0.95;
  auto* predict = app.add_subcommand("predict", "Predicted survival from a fit file");
  predict->add_option("--fit", fit_path, "fit.json written by 'fit'")->required();
  predict->add_option("--z", z_text, "Covariate values, comma separated");
  predict->add_option("--point", point_index, "Time-point index")->capture_default_str();
  predict->add_option("--conditional", conditional, "given_failed or given_survived");
  predict->add_option("--indices", indices, "Point indices of (t1,t2),(t1,0),(0,t2)");
  predict->add_option("--level", level, "Confidence level")->capture_default_str();

  std::string preset_name = "table1a", mae_csv;
  std::size_t n = 200, m = 200;
  auto* replicate = app.add_subcommand("replicate", "Monte Carlo study from a named preset");
  replicate->add_option("--preset", preset_name, "table1a, table1b, webtable1 or lognormal")->capture_default_str();
  replicate->add_option("--n", n, "Sample size")->capture_default_str();
  replicate->add_option("--m", m, "Replications")->capture_default_str();
  replicate->add_option("--mae-csv", mae_csv, "Long-format MAE table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    detail::report_error(err, "usage", e.what());
    return kValidation;
  }

  try {
    if (*surface) {
      const auto s = estimate_surface(load_csv(input), parse_estimator(estimator));
      detail::Sink sink(out_path, out);
      write_surface_csv(*sink, s);
    } else if (*pseudo) {
      const auto pm = pseudo_observations(load_csv(input), parse_points(points), parse_estimator(estimator), workers);
      detail::Sink sink(out_path, out);
      write_pseudo_csv(*sink, pm);
    } else if (*pts) {
      const auto sample = load_csv(input);
      detail::Sink sink(out_path, out);
      if (!check_points.empty()) {
        *sink << "t1,t2,cdf,flag\n";
        for (const auto& c : validate_fixed_grid(sample, parse_points(check_points)))
          *sink << bivarps::detail::format_double(c.point.t1) << ',' << bivarps::detail::format_double(c.point.t2)
                << ',' << bivarps::detail::format_double(c.cdf) << ',' << (c.low ? "low" : c.high ? "high" : "ok")
                << '\n';
      } else {
        const auto selected = select_equidistant_detailed(sample, sel);
        if (!quiet)
          err << "lower percentile " << selected.lower_percentile << ", empirical CDF "
              << bivarps::detail::format_double(selected.lower_cdf) << '\n';
        write_points_csv(*sink, selected.grid);
      }
    } else if (*fit) {
      const auto sample = load_csv(input, detail::split_list(covariates));
      const auto grid = parse_points(points);
      const auto est = parse_estimator(estimator);
      const auto pm = pseudo_observations(sample, grid, est, workers);
      auto result = fit_gee(pm, covariate_matrix(sample), LinkFunction::parse(link));
      for (std::size_t j = 0; j < grid.size(); ++j) result.names[j] = "beta0" + bivarps::detail::describe(grid[j]);
      for (std::size_t c = 0; c < result.p; ++c) result.names[grid.size() + c] = sample.covariate_names()[c];
      detail::Sink sink(out_path, out);
      *sink << fit_to_json(result, grid, est, sample.covariate_names(), sample.size()).dump(2) << '\n';
    } else if (*predict) {
      std::ifstream in(fit_path);
      if (!in) throw ValidationError("cannot open '" + fit_path + "'");
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed fit file: ") + e.what());
      }
      const auto model = fit_from_json(j);
      const auto z = detail::parse_numbers(z_text, "--z");
      detail::Sink sink(out_path, out);
      if (conditional.empty()) {
        *sink << bivarps::detail::format_double(predict_survival(model, z, point_index)) << '\n';
      } else {
        Conditioning c;
        if (conditional == "given_failed") c = Conditioning::GivenFailed;
        else if (conditional == "given_survived") c = Conditioning::GivenSurvived;
        else throw ValidationError("--conditional must be given_failed or given_survived");
        const auto idx = detail::parse_numbers(indices, "--indices");
        if (idx.size() != 3) throw ValidationError("--indices needs three time-point indices");
        for (double v : idx)
          if (v < 0.0 || v != std::floor(v)) throw ValidationError("--indices must be nonnegative integers");
        const ConditionalIndices ci{static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]),
                                    static_cast<std::size_t>(idx[2])};
        const auto r = conditional_survival_ci(model, z, ci, c, level);
        *sink << "estimate,lower,upper,se\n"
              << bivarps::detail::format_double(r.estimate) << ',' << bivarps::detail::format_double(r.lower) << ','
              << bivarps::detail::format_double(r.upper) << ',' << bivarps::detail::format_double(r.se) << '\n';
      }
    } else if (*replicate) {
      auto cfg = preset(preset_name);
      cfg.n = n;
      cfg.m = m;
      cfg.seed = seed;
      cfg.workers = workers;
      const auto rep = run_replication(cfg);
      if (!mae_csv.empty()) {
        detail::Sink mae_sink(mae_csv, out);
        write_mae_csv(*mae_sink, rep);
      }
      detail::Sink sink(out_path, out);
      *sink << report_to_json(rep).dump(2) << '\n';
      if (!quiet) err << "completed " << m << " replications in " << rep.seconds << " s\n";
    }
  } catch (const ValidationError& e) {
    detail::report_error(err, "validation", e.what());
    return kValidation;
  } catch (const NumericalError& e) {
    detail::report_error(err, "numerical", e.what());
    return kNumerical;
  }
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"bivarps"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace bivarps::cli
