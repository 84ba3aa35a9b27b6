#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "bivarps/cli.hpp"
#include "bivarps/io.hpp"
#include "bivarps/simulate.hpp"

using namespace bivarps;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scratch directory with a simulated data file carrying three covariates.
struct Workspace {
  fs::path dir;
  fs::path data;
  BivariateSample sample{std::vector<BivariateRecord>{{1, 1, 1, 1, {}}}};

  Workspace() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("bivarps_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
    const auto pairs = sample_logistic(LogisticModelParams{}, 120, 17);
    const auto base = apply_censoring(pairs, CensoringSpec{}, 18);
    std::mt19937_64 rng(19);
    std::normal_distribution<double> normal(7, 1);
    std::vector<BivariateRecord> recs;
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto r = base[i];
      r.z = {r.z[0], normal(rng), static_cast<double>(i % 2)};
      recs.push_back(r);
    }
    sample = BivariateSample(std::move(recs), {"z", "score", "flag"});
    data = dir / "data.csv";
    std::ofstream f(data);
    write_csv(f, sample);
  }
  ~Workspace() { fs::remove_all(dir); }
};

const std::string kPoints = "0.5:0.7,1:0.7,0.5:1.2,1:1.2,0.5:1.5,1:1.5";

}  // namespace

TEST_CASE("replicate smoke run writes a report") {
  Workspace ws;
  const auto report = ws.dir / "report.json";
  const auto r = run({"--seed", "1", "--quiet", "--out", report.string(), "replicate", "--preset", "table1a", "--n",
                      "50", "--m", "5"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto j = json::parse(slurp(report));
  CHECK(j["preset"] == "table1a");
  CHECK(j["m"] == 5);
  CHECK(j["estimators"].size() == 2);

  // identical to the library run with the same configuration
  auto cfg = preset("table1a");
  cfg.n = 50;
  cfg.m = 5;
  cfg.seed = 1;
  auto lib = report_to_json(run_replication(cfg), false);
  auto cli_report = j;
  cli_report.erase("seconds");
  CHECK(cli_report.dump() == lib.dump());
}

TEST_CASE("usage errors exit with 1") {
  const auto missing = run({"fit"});
  CHECK(missing.code == 1);
  CHECK_THAT(missing.err, Catch::Matchers::ContainsSubstring("--input"));
  CHECK_THAT(missing.err, Catch::Matchers::ContainsSubstring("Usage"));

  const auto unknown = run({"surface", "--input", "x.csv", "--bogus"});
  CHECK(unknown.code == 1);
  CHECK_THAT(unknown.err, Catch::Matchers::ContainsSubstring("Usage"));

  CHECK(run({}).code == 1);
  CHECK(run({"--workers", "0", "surface", "--input", "x.csv"}).code == 1);
  CHECK(run({"surface", "--input", "/nonexistent/file.csv"}).code == 1);
}

TEST_CASE("errors are one machine-readable line") {
  Workspace ws;
  const auto bad = run({"surface", "--input", ws.data.string(), "--estimator", "km"});
  CHECK(bad.code == 1);
  CHECK_THAT(bad.err, Catch::Matchers::StartsWith("error: validation: "));
  CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);

  // the censoring curve reaches 0 before (2,2), so the Lin-Ying estimate is undefined
  const auto dead = ws.dir / "dead.csv";
  std::ofstream(dead) << "y1,d1,y2,d2\n1,1,1,1\n2,0,2,0\n3,1,3,1\n";
  const auto num = run({"pseudo", "--input", dead.string(), "--estimator", "ly", "--points", "2.5:2.5"});
  CHECK(num.code == 2);
  CHECK_THAT(num.err, Catch::Matchers::StartsWith("error: numerical: "));
  CHECK(std::count(num.err.begin(), num.err.end(), '\n') == 1);
}

TEST_CASE("version") {
  const auto r = run({"--version"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, Catch::Matchers::StartsWith("bivarps " BIVARPS_VERSION " ("));
}

TEST_CASE("surface, pseudo and points match the library") {
  Workspace ws;
  for (const std::string est : {"ly", "ly2", "dab"}) {
    const auto r = run({"surface", "--input", ws.data.string(), "--estimator", est});
    REQUIRE(r.code == 0);
    std::ostringstream want;
    write_surface_csv(want, estimate_surface(ws.sample, parse_estimator(est)));
    CHECK(r.out == want.str());

    const auto p = run({"--workers", "2", "pseudo", "--input", ws.data.string(), "--estimator", est, "--points", kPoints});
    REQUIRE(p.code == 0);
    std::ostringstream pw;
    write_pseudo_csv(pw, pseudo_observations(ws.sample, parse_points(kPoints), parse_estimator(est)));
    CHECK(p.out == pw.str());
  }

  const auto pts = run({"--quiet", "points", "--input", ws.data.string(), "--k", "4"});
  REQUIRE(pts.code == 0);
  SelectionConfig cfg;
  cfg.k = 4;
  std::ostringstream pw;
  write_points_csv(pw, select_equidistant(ws.sample, cfg));
  CHECK(pts.out == pw.str());
  CHECK(pts.err.empty());

  const auto check = run({"points", "--input", ws.data.string(), "--check", "0.001:0.001,1:1"});
  REQUIRE(check.code == 0);
  CHECK_THAT(check.out, Catch::Matchers::StartsWith("t1,t2,cdf,flag\n"));
  CHECK_THAT(check.out, Catch::Matchers::ContainsSubstring(",low\n"));
}

TEST_CASE("fit and predict round trip") {
  Workspace ws;
  const auto fit_path = ws.dir / "fit.json";
  const auto r = run({"--out", fit_path.string(), "fit", "--input", ws.data.string(), "--covariates", "z,score,flag",
                      "--estimator", "dab", "--points", kPoints});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto j = json::parse(slurp(fit_path));
  CHECK(j["link"] == "logit");
  CHECK(j["coefficients"].size() == 9);
  CHECK(j["coefficients"][0]["name"] == "beta0(0.5,0.7)");
  CHECK(j["coefficients"][7]["name"] == "score");
  CHECK(j["convergence"]["converged"] == true);

  const auto grid = parse_points(kPoints);
  const auto lib = fit_gee(pseudo_observations(ws.sample, grid, Estimator::Dabrowska), covariate_matrix(ws.sample),
                           LinkKind::Logit);
  for (Eigen::Index q = 0; q < lib.beta.size(); ++q) CHECK(j["beta"][q].get<double>() == lib.beta[q]);

  const std::vector<double> z{0.58, 7.5, 1};
  const auto pred = run({"predict", "--fit", fit_path.string(), "--z", "0.58,7.5,1", "--point", "0"});
  REQUIRE(pred.code == 0);
  CHECK(pred.out == bivarps::detail::format_double(predict_survival(lib, z, 0)) + "\n");

  const auto cond = run({"predict", "--fit", fit_path.string(), "--z", "0.58,7.5,1", "--conditional", "given_survived",
                         "--indices", "3,1,2"});
  REQUIRE(cond.code == 0);
  const auto ci = conditional_survival_ci(lib, z, {3, 1, 2}, Conditioning::GivenSurvived);
  CHECK(cond.out == "estimate,lower,upper,se\n" + bivarps::detail::format_double(ci.estimate) + "," +
                        bivarps::detail::format_double(ci.lower) + "," + bivarps::detail::format_double(ci.upper) +
                        "," + bivarps::detail::format_double(ci.se) + "\n");

  CHECK(run({"predict", "--fit", fit_path.string(), "--z", "0.58,7.5", "--point", "0"}).code == 1);
  CHECK(run({"predict", "--fit", fit_path.string(), "--z", "0.58,7.5,1", "--point", "6"}).code == 1);
  CHECK(run({"predict", "--fit", fit_path.string(), "--z", "0.58,7.5,1", "--conditional", "sideways", "--indices",
             "3,1,2"})
            .code == 1);
  CHECK(run({"predict", "--fit", (ws.dir / "missing.json").string(), "--z", "1"}).code == 1);
}

TEST_CASE("the installed executable behaves like the library entry point") {
  // ctest runs this suite from the build tree, next to the executable
  if (!fs::exists("bivarps")) SKIP("bivarps executable not found in the working directory");
  std::FILE* pipe = ::popen("./bivarps --version 2>&1", "r");
  REQUIRE(pipe != nullptr);
  char buf[256] = {};
  const std::string line = std::fgets(buf, sizeof buf, pipe) ? buf : "";
  const int status = ::pclose(pipe);
  CHECK(status == 0);
  CHECK(line == cli::version_string() + "\n");
  CHECK(std::system("./bivarps fit > /dev/null 2>&1") != 0);
}
