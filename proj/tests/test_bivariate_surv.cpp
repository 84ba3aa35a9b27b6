#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bivarps/bivariate_surv.hpp"
#include "bivarps/simulate.hpp"
#include "bivarps/univariate.hpp"
#include "oracles.hpp"

using namespace bivarps;
using Catch::Approx;

namespace {

const Estimator kAll[] = {Estimator::LinYing, Estimator::LinYingBivariate, Estimator::Dabrowska};

double naive(Estimator e, const BivariateSample& s, double t1, double t2) {
  switch (e) {
    case Estimator::LinYing: return oracle::lin_ying(s, t1, t2);
    case Estimator::LinYingBivariate: return oracle::lin_ying_bivariate(s, t1, t2);
    case Estimator::Dabrowska: return oracle::dabrowska(s, t1, t2);
  }
  return 0;
}

void marginals(const BivariateSample& s, std::vector<double>& y1, std::vector<int>& d1, std::vector<double>& y2,
               std::vector<int>& d2) {
  for (const auto& r : s.records()) {
    y1.push_back(r.y1);
    d1.push_back(r.delta1);
    y2.push_back(r.y2);
    d2.push_back(r.delta2);
  }
}

}  // namespace

TEST_CASE("lin-ying three-record hand case") {
  const BivariateSample s({{2, 1, 3, 1, {}}, {1, 0, 1, 0, {}}, {4, 1, 2, 1, {}}});
  const auto surf = lin_ying(s);
  // censoring KM of max(Y1,Y2) drops to 2/3 at time 1
  CHECK(surf.at(0, 0) == 1.0);
  CHECK(surf.at(3, 1.5) == Approx(0.5).margin(1e-15));
  CHECK(surf.at(1.5, 1.5) == Approx(1.0).margin(1e-15));
  // nobody has both times above 2
  CHECK(surf.at(2, 2) == 0.0);
}

TEST_CASE("lin-ying variants differ when the two censoring curves do not multiply out") {
  const BivariateSample s({{1, 0, 2, 1, {}}, {2, 1, 1, 0, {}}, {3, 1, 3, 1, {}}, {4, 1, 4, 1, {}}});
  // G(2.5) = 1/2 while G1(2.5) G2(2.5) = 9/16; numerator 1/2
  CHECK(lin_ying(s).at(2.5, 2.5) == Approx(1.0).margin(1e-15));
  CHECK(lin_ying_bivariate(s).at(2.5, 2.5) == Approx(0.5 / 0.5625).margin(1e-15));
}

TEST_CASE("lin-ying reports not-available where the censoring curve vanishes") {
  const BivariateSample s({{1, 1, 1, 1, {}}, {2, 0, 2, 0, {}}});
  const auto surf = lin_ying(s);
  CHECK(is_available(surf.at(1.5, 1.5)));
  CHECK_FALSE(surf.available(2, 2));
  CHECK_FALSE(surf.available(5, 0.5));
  CHECK_THROWS_AS(restricted_mean_min(surf, 3.0), NumericalError);
  CHECK(restricted_mean_min(surf, 1.5) == Approx(1.25).margin(1e-15));
}

TEST_CASE("dabrowska hazard increments") {
  const auto one = dabrowska_hazards(BivariateSample({{1, 1, 2, 1, {}}}));
  CHECK(one.lambda11(one.row(1), one.col(2)) == 1.0);
  CHECK(one.lambda11.sum() == 1.0);

  const auto two = dabrowska_hazards(BivariateSample({{1, 1, 1, 1, {}}, {2, 1, 2, 1, {}}}));
  CHECK(two.lambda11(two.row(1), two.col(1)) == 0.5);
  CHECK(two.lambda11(two.row(2), two.col(2)) == 1.0);
  CHECK(two.risk(two.row(1), two.col(1)) == 2.0);

  std::mt19937_64 rng(2);
  auto s = oracle::random_sample(rng, {.n = 25, .time_levels = 6});
  std::vector<BivariateRecord> recs = s.records();
  for (auto& r : recs) r.delta1 = 0;
  const auto h = dabrowska_hazards(BivariateSample(recs));
  CHECK(h.lambda10.cwiseAbs().maxCoeff() == 0.0);
  CHECK(h.lambda11.cwiseAbs().maxCoeff() == 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    const auto r = oracle::random_sample(rng, {.n = 30, .time_levels = 5});
    const auto hv = dabrowska_hazards(r);
    for (Eigen::Index u = 0; u < hv.risk.rows(); ++u)
      for (Eigen::Index v = 0; v < hv.risk.cols(); ++v) {
        for (double x : {hv.lambda11(u, v), hv.lambda10(u, v), hv.lambda01(u, v)}) {
          CHECK(x >= 0.0);
          CHECK(x <= 1.0);
          if (hv.risk(u, v) == 0) CHECK(x == 0.0);
        }
      }
  }
}

TEST_CASE("dabrowska two-record hand case") {
  // KM1(1) = KM2(1) = 1/2; cell (1,1): R=2, d11=0, d10=d01=1 gives factor 1 + (0-1)/(1*1) = 0
  const BivariateSample s({{1, 1, 2, 1, {}}, {2, 1, 1, 1, {}}});
  const auto surf = dabrowska(s);
  CHECK(surf.at(1, 1) == Approx(0.0).margin(1e-12));
  CHECK(surf.at(0, 0) == 1.0);
  CHECK(surf.at(1, 0) == 0.5);
  CHECK(surf.at(0.5, 1.5) == 0.5);
}

TEST_CASE("uncensored data reproduce the empirical joint survival") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 40; ++rep) {
    const auto s = oracle::random_sample(
        rng, {.n = static_cast<std::size_t>(2 + rep), .time_levels = rep % 2 ? 7 : 0, .uncensored = true});
    for (auto est : kAll) {
      const auto surf = estimate_surface(s, est);
      for (double t1 : surf.grid1())
        for (double t2 : surf.grid2()) {
          const double emp = oracle::joint_tail(s, t1, t2);
          if (est == Estimator::Dabrowska) CHECK(surf.at(t1, t2) == Approx(emp).margin(1e-10));
          else CHECK(surf.at(t1, t2) == emp);
        }
    }
  }
}

TEST_CASE("dabrowska margins equal the kaplan-meier curves") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(2, 50);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = oracle::random_sample(rng, {.n = size(rng), .censor_prob = 0.4, .time_levels = rep % 3 ? 0 : 8});
    std::vector<double> y1, y2;
    std::vector<int> d1, d2;
    marginals(s, y1, d1, y2, d2);
    const auto km1 = kaplan_meier(y1, d1), km2 = kaplan_meier(y2, d2);
    const auto surf = dabrowska(s);
    for (double t : surf.grid1()) CHECK(std::abs(surf.at(t, 0) - km1(t)) <= 1e-12);
    for (double t : surf.grid2()) CHECK(std::abs(surf.at(0, t) - km2(t)) <= 1e-12);
  }
}

TEST_CASE("optimized surfaces agree with brute-force oracles") {
  std::mt19937_64 rng(1234);
  for (int rep = 0; rep < 60; ++rep) {
    const auto s = oracle::random_sample(
        rng, {.n = static_cast<std::size_t>(3 + rep % 28), .censor_prob = 0.35, .time_levels = rep % 2 ? 6 : 0});
    for (auto est : kAll) {
      const auto surf = estimate_surface(s, est);
      for (double t1 : surf.grid1())
        for (double t2 : surf.grid2()) {
          const double want = naive(est, s, t1, t2);
          const double got = surf.at(t1, t2);
          if (std::isnan(want)) {
            CHECK_FALSE(is_available(got));
          } else {
            CHECK(std::abs(got - want) <= 1e-10);
          }
        }
      // point evaluation shares the surface's conventions, including between atoms
      std::vector<TimePoint> probes{{0.3, 0.9}, {1.7, 0.2}, {2.5, 2.5}, {0, 1.1}};
      const auto at = estimate_at(s, est, probes);
      for (std::size_t j = 0; j < probes.size(); ++j) {
        const double expect = surf.at(probes[j].t1, probes[j].t2);
        if (std::isnan(expect)) CHECK(std::isnan(at[j]));
        else CHECK(std::abs(at[j] - expect) <= 1e-12);
      }
    }
  }
}

TEST_CASE("surface queries") {
  const BivariateSample s({{1, 1, 2, 1, {}}, {3, 1, 1, 0, {}}});
  for (auto est : kAll) {
    const auto surf = estimate_surface(s, est);
    CHECK(surf.at(0, 0) == 1.0);
    const auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    CHECK(same(surf.at(100, 100), surf.at(3, 2)));
    CHECK(same(surf.at(1.5, 0.5), surf.at(1, 0)));
    CHECK_THROWS_AS(surf.at(-0.1, 1), ValidationError);
    CHECK(surf.estimator() == est);
  }
}

TEST_CASE("restricted means") {
  const BivariateSample late({{5, 1, 5, 1, {}}});
  CHECK(restricted_mean_min(dabrowska(late), 3) == Approx(3).margin(1e-15));
  CHECK(restricted_mean_max(dabrowska(late), 3) == Approx(3).margin(1e-15));

  const BivariateSample two({{2, 1, 2, 1, {}}});
  CHECK(restricted_mean_min(lin_ying(two), 3) == Approx(2).margin(1e-15));
  const BivariateSample one_three({{1, 1, 3, 1, {}}});
  CHECK(restricted_mean_max(lin_ying(one_three), 4) == Approx(3).margin(1e-15));
  CHECK(restricted_mean_min(lin_ying(one_three), 4) == Approx(1).margin(1e-15));

  CHECK_THROWS_AS(restricted_mean_min(lin_ying(two), 0), ValidationError);
  CHECK_THROWS_AS(restricted_mean_max(lin_ying(two), -1), ValidationError);

  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    const auto s = oracle::random_sample(rng, {.n = 15, .uncensored = true});
    const auto surf = dabrowska(s);
    CHECK(restricted_mean_max(surf, 2.0) >= restricted_mean_min(surf, 2.0) - 1e-12);
    // with no censoring both reduce to sample means of the truncated min / max
    double mn = 0, mx = 0;
    for (const auto& r : s.records()) {
      mn += std::min({r.y1, r.y2, 2.0}) / 15.0;
      mx += std::min(std::max(r.y1, r.y2), 2.0) / 15.0;
    }
    CHECK(restricted_mean_min(surf, 2.0) == Approx(mn).margin(1e-10));
    CHECK(restricted_mean_max(surf, 2.0) == Approx(mx).margin(1e-10));
  }
}

TEST_CASE("dabrowska is consistent on a large simulated sample") {
  LogisticModelParams p;
  p.beta1 = 0.0;
  const auto pairs = sample_logistic(p, 20000, 2024);
  const auto s = apply_censoring(pairs, CensoringSpec{}, 77);
  std::vector<TimePoint> probes;
  for (double a : {0.2, 0.4, 0.6, 0.8, 1.0})
    for (double b : {0.1, 0.2, 0.3, 0.4, 0.5}) probes.push_back({a, b});
  const auto est = estimate_at(s, Estimator::Dabrowska, probes);
  double sup = 0;
  for (std::size_t j = 0; j < probes.size(); ++j)
    sup = std::max(sup, std::abs(est[j] - true_logistic_survival(p, probes[j].t1, probes[j].t2, 0.0)));
  INFO("sup error " << sup);
  CHECK(sup < 0.02);
}
