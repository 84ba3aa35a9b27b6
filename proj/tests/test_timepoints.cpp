#include <catch_amalgamated.hpp>

#include <random>

#include "bivarps/simulate.hpp"
#include "bivarps/timepoints.hpp"

using namespace bivarps;

namespace {

BivariateSample from_pairs(const std::vector<std::pair<double, double>>& xy) {
  std::vector<BivariateRecord> recs;
  for (auto [a, b] : xy) recs.push_back({a, 1, b, 1, {}});
  return BivariateSample(std::move(recs));
}

// Records 1..15 sit high on the second axis and 16..25 count down just above
// the 20th percentile, so F at the paired 20th percentiles is 0 and at the
// 25th exactly 0.1.
BivariateSample adversarial() {
  std::vector<std::pair<double, double>> xy;
  std::vector<int> rest;
  for (int r = 1; r <= 15; ++r) rest.push_back(r);
  for (int r = 26; r <= 85; ++r) rest.push_back(r);
  for (int i = 1; i <= 100; ++i) {
    int rank;
    if (i <= 15) rank = 85 + i;
    else if (i <= 25) rank = 41 - i;
    else rank = rest[static_cast<std::size_t>(i - 26)];
    xy.emplace_back(i, rank);
  }
  return from_pairs(xy);
}

BivariateSample logistic_sample(std::uint64_t seed, std::size_t n = 200) {
  return apply_censoring(sample_logistic(LogisticModelParams{}, n, seed), CensoringSpec{}, seed ^ 0x55);
}

}  // namespace

TEST_CASE("empirical percentiles") {
  std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(empirical_percentile(v, 20) == 1);
  CHECK(empirical_percentile(v, 21) == 2);
  CHECK(empirical_percentile(v, 100) == 5);
  CHECK(empirical_percentile(v, 0) == 1);
  CHECK_THROWS_AS(empirical_percentile({}, 50), ValidationError);
}

TEST_CASE("two points are the paired limits") {
  const auto s = logistic_sample(3);
  SelectionConfig cfg;
  cfg.k = 2;
  const auto sel = select_equidistant_detailed(s, cfg);
  REQUIRE(sel.grid.size() == 2);
  CHECK(sel.grid[0] == sel.lower);
  CHECK(sel.grid[1] == sel.upper);
  std::vector<double> y1;
  for (const auto& r : s.records()) y1.push_back(r.y1);
  CHECK(sel.upper.t1 == empirical_percentile(y1, 90));
}

TEST_CASE("uniform sample gives evenly spaced points between the 20th and 90th percentiles") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(0, 1);
  std::vector<std::pair<double, double>> xy(1000);
  for (auto& p : xy) p = {unif(rng), unif(rng)};
  const auto s = from_pairs(xy);
  SelectionConfig cfg;
  // independent uniforms put only about 4% of the mass below the 20th percentiles
  cfg.cdf_floor = 0.01;
  const auto sel = select_equidistant_detailed(s, cfg);
  CHECK(sel.lower_percentile == 20);
  const double want[] = {0.2, 0.375, 0.55, 0.725, 0.9};
  REQUIRE(sel.grid.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(sel.grid[j].t1 == Catch::Approx(want[j]).margin(0.04));
    CHECK(sel.grid[j].t2 == Catch::Approx(want[j]).margin(0.04));
  }
  // equal spacing is exact relative to the empirical limits
  const double step = (sel.upper.t1 - sel.lower.t1) / 4;
  for (std::size_t j = 1; j < 5; ++j) CHECK(sel.grid[j].t1 - sel.grid[j - 1].t1 == Catch::Approx(step).epsilon(1e-12));
}

TEST_CASE("negative dependence escalates the lower percentile") {
  const auto s = adversarial();
  CHECK(empirical_bivariate_cdf(s, 20, 20) == 0.0);
  CHECK(empirical_bivariate_cdf(s, 25, 25) == Catch::Approx(0.1).margin(1e-15));
  const auto sel = select_equidistant_detailed(s, SelectionConfig{});
  CHECK(sel.lower_percentile == 25);
  CHECK(sel.lower == TimePoint{25, 25});
  CHECK(sel.grid[0] == TimePoint{25, 25});
  CHECK(sel.grid.size() == 5);

  SelectionConfig start25;
  start25.lower_percentile = 25;
  CHECK(select_equidistant(s, start25).size() == 5);
}

TEST_CASE("exhausted escalation reports the achieved CDF") {
  std::vector<std::pair<double, double>> xy;
  for (int i = 1; i <= 100; ++i) xy.emplace_back(i, 101 - i);
  try {
    (void)select_equidistant(from_pairs(xy), SelectionConfig{});
    FAIL("expected escalation to fail");
  } catch (const NumericalError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("is 0,"));
  }
}

TEST_CASE("selection properties") {
  for (std::uint64_t seed = 10; seed < 40; ++seed) {
    const auto s = logistic_sample(seed);
    for (std::size_t k : {1u, 3u, 6u, 10u}) {
      SelectionConfig cfg;
      cfg.k = k;
      const auto a = select_equidistant(s, cfg);
      const auto b = select_equidistant(s, cfg);
      REQUIRE(a.size() == k);
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(a[j] == b[j]);
        if (j) {
          CHECK(a[j].t1 > a[j - 1].t1);
          CHECK(a[j].t2 > a[j - 1].t2);
        }
      }
    }
    // the first point clears the floor, and raising the floor never moves it down
    const auto base = select_equidistant_detailed(s, SelectionConfig{});
    CHECK(base.lower_cdf >= 0.1);
    SelectionConfig higher;
    higher.cdf_floor = 0.12;
    try {
      const auto raised = select_equidistant_detailed(s, higher);
      CHECK(raised.lower_percentile >= base.lower_percentile);
      CHECK(raised.lower_cdf >= 0.12);
    } catch (const NumericalError&) {
    }
  }
}

TEST_CASE("configuration errors") {
  const auto s = logistic_sample(1);
  SelectionConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(select_equidistant(s, cfg), ValidationError);
  cfg = {};
  cfg.lower_percentile = 22;
  CHECK_THROWS_AS(select_equidistant(s, cfg), ValidationError);
  cfg = {};
  cfg.upper_percentile = 100;
  CHECK_THROWS_AS(select_equidistant(s, cfg), ValidationError);
  cfg = {};
  cfg.upper_percentile = 15;
  CHECK_THROWS_AS(select_equidistant(s, cfg), ValidationError);
  std::vector<std::pair<double, double>> few(9, {1.0, 1.0});
  CHECK_THROWS_AS(select_equidistant(from_pairs(few), SelectionConfig{}), ValidationError);
}

TEST_CASE("fixed grids are checked against the empirical CDF") {
  const auto s = from_pairs({{1, 1}, {2, 3}, {3, 2}, {4, 4}});
  const auto out = validate_fixed_grid(s, TimePointGrid({{0.5, 0.5}, {2, 2}, {4, 4}}));
  REQUIRE(out.size() == 3);
  CHECK(out[0].cdf == 0.0);
  CHECK(out[0].low);
  CHECK(out[1].cdf == 0.25);
  CHECK_FALSE(out[1].low);
  CHECK_FALSE(out[1].high);
  CHECK(out[2].cdf == 1.0);
  CHECK(out[2].high);
  CHECK(validate_fixed_grid(s, TimePointGrid({{2, 2}}), 0.3, 0.9)[0].low);
}

TEST_CASE("the simulation design points sit low in the observed distribution") {
  const TimePointGrid grid(logistic_design_points());
  const auto pairs = sample_logistic(LogisticModelParams{}, 200, 2024);
  for (auto spec : {CensoringSpec{}, CensoringSpec{CensoringMode::BivariateIndependent, 0.3, 0.2}})
    for (const auto& c : validate_fixed_grid(apply_censoring(pairs, spec, 9), grid)) {
      CHECK(c.cdf > 0.03);
      CHECK(c.cdf < 0.45);
      CHECK_FALSE(c.high);
    }
  // in the population four (shared censoring) or five (separate censoring) of
  // the six points fall strictly between 0.10 and 0.30
  const auto big = sample_logistic(LogisticModelParams{}, 100000, 4);
  int shared = 0, separate = 0;
  for (const auto& c : validate_fixed_grid(apply_censoring(big, CensoringSpec{}, 5), grid))
    shared += c.cdf > 0.10 && c.cdf < 0.30;
  for (const auto& c : validate_fixed_grid(apply_censoring(big, {CensoringMode::BivariateIndependent, 0.3, 0.2}, 5), grid))
    separate += c.cdf > 0.10 && c.cdf < 0.30;
  CHECK(shared == 4);
  CHECK(separate == 5);
}

TEST_CASE("observed-time CDF at the design points matches numerical integration") {
  // 1 - S1 G - S2 G + S12 G(max), averaged over Z ~ U(0.5, 1.5) by adaptive quadrature
  const double shared[] = {0.170, 0.250, 0.182, 0.320, 0.186, 0.329};
  const double separate[] = {0.080, 0.139, 0.110, 0.192, 0.123, 0.215};
  const TimePointGrid grid(logistic_design_points());
  const auto pairs = sample_logistic(LogisticModelParams{}, 100000, 99);
  const auto a = validate_fixed_grid(apply_censoring(pairs, CensoringSpec{}, 7), grid);
  const auto b = validate_fixed_grid(apply_censoring(pairs, {CensoringMode::BivariateIndependent, 0.3, 0.2}, 7), grid);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(a[j].cdf == Catch::Approx(shared[j]).margin(0.006));
    CHECK(b[j].cdf == Catch::Approx(separate[j]).margin(0.006));
  }
}
