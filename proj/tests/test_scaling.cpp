#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmar/longmem.hpp"
#include "mmar/rng.hpp"
#include "mmar/scaling.hpp"
#include "mmar/series.hpp"
#include "mmar/stats.hpp"

using namespace mmar;

namespace {

bool has_warning(const std::vector<std::string>& warnings, const char* needle) {
  return std::any_of(warnings.begin(), warnings.end(), [&](const std::string& w) {
    return w.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("partition sums match hand-computed block tables") {
  // Linear log price: every n-block increment equals n.
  std::vector<double> lin(13);
  for (int t = 0; t <= 12; ++t) lin[t] = t;
  CHECK(partition_function(lin, 3, 2.0) == doctest::Approx(36.0).epsilon(1e-14));

  // Quadratic log price over 10 increments; n = 3 leaves an offset block
  // partition one step in, so both partitions contribute.
  std::vector<double> quad(11);
  for (int t = 0; t <= 10; ++t) quad[t] = static_cast<double>(t) * t;
  CHECK(partition_function(quad, 3, 1.0) == doctest::Approx(90.0).epsilon(1e-14));
  CHECK(partition_function(quad, 3, 2.0) == doctest::Approx(3375.0).epsilon(1e-14));

  const std::vector<double> qs{1.0, 2.0};
  const std::vector<int> ns{1, 3};
  const auto table = build_partition_table(quad, qs, ns);
  REQUIRE(table.qs == qs);
  REQUIRE(table.ns == ns);
  CHECK(table.T == 10);
  CHECK(table.zero_floor_count == 0);
  CHECK(table.at(0, 1) == doctest::Approx(90.0).epsilon(1e-14));
  CHECK(table.at(1, 1) == doctest::Approx(3375.0).epsilon(1e-14));
  // n = 1 blocks are the one-step moves 1, 3, 5, ..., 19 in both partitions.
  CHECK(table.at(0, 0) == doctest::Approx(100.0).epsilon(1e-14));
}

TEST_CASE("exact zero increments are floored and counted") {
  // Log price stalls every other step: moves alternate 0.01 and 0.
  std::vector<double> logp(11, 0.0);
  for (int t = 1; t <= 10; ++t)
    logp[t] = logp[t - 1] + ((t % 2 == 1) ? 0.01 : 0.0);
  const std::vector<double> qs{1.0};
  const std::vector<int> ns{1, 2};
  const auto table = build_partition_table(logp, qs, ns);
  // Floor = 1e-3 * smallest nonzero move; five zeros in each of the two
  // (identical) one-step partitions.
  CHECK(table.zero_floor_count == 10);
  CHECK(table.at(0, 0) == doctest::Approx(0.05005).epsilon(1e-12));
  // Two-step blocks all move by 0.01: no flooring at n = 2.
  CHECK(table.at(0, 1) == doctest::Approx(0.05).epsilon(1e-12));

  const std::vector<double> flat(50, 3.25);
  CHECK_THROWS_AS(build_partition_table(flat, qs, ns), EstimationError);
}

TEST_CASE("grid order and duplicates do not change the table") {
  std::vector<double> logp(201);
  RandomStream s{SeedSpec{7, 7}};
  for (std::size_t t = 1; t < logp.size(); ++t)
    logp[t] = logp[t - 1] + 0.01 * s.next_normal();
  const std::vector<double> q_sorted{0.5, 1.0, 2.0, 3.0};
  const std::vector<int> n_sorted{2, 5, 9, 17};
  const std::vector<double> q_shuffled{3.0, 0.5, 2.0, 1.0, 2.0};
  const std::vector<int> n_shuffled{17, 2, 9, 5, 5};
  const auto a = build_partition_table(logp, q_sorted, n_sorted);
  const auto b = build_partition_table(logp, q_shuffled, n_shuffled);
  REQUIRE(a.qs == b.qs);
  REQUIRE(a.ns == b.ns);
  REQUIRE(a.s == b.s);  // bitwise
  const auto fa = scaling_regression(a);
  const auto fb = scaling_regression(b);
  CHECK(fa.tau1 == fb.tau1);
  CHECK(fa.tau2 == fb.tau2);
  CHECK(fa.rss == fb.rss);
}

TEST_CASE("partition table rejects bad grids") {
  std::vector<double> logp(41);
  for (int t = 0; t <= 40; ++t) logp[t] = 0.1 * t * ((t % 3) + 1);
  const std::vector<double> qs{1.0, 2.0};
  const std::vector<int> ns{2, 4};
  const std::vector<double> bad_q{0.0, 1.0};
  CHECK_THROWS_AS(build_partition_table(logp, bad_q, ns), std::invalid_argument);
  const std::vector<int> big_n{2, 21};  // > T/2
  CHECK_THROWS_AS(build_partition_table(logp, qs, big_n), std::invalid_argument);
  const std::vector<int> zero_n{0, 4};
  CHECK_THROWS_AS(build_partition_table(logp, qs, zero_n), std::invalid_argument);
  const std::vector<double> short_path{0.0, 1.0};
  CHECK_THROWS_AS(build_partition_table(short_path, qs, ns),
                  std::invalid_argument);
}

TEST_CASE("regression recovers exponents from an exact scaling table") {
  const double tau1 = 0.56, tau2 = -0.03;
  PartitionTable table;
  table.qs = {0.5, 1.0, 1.5, 2.0, 3.0, 5.0};
  table.ns = {2, 4, 8, 16, 32, 64};
  table.T = 4096;
  for (std::size_t qi = 0; qi < table.qs.size(); ++qi) {
    const double q = table.qs[qi];
    const double a_q = 0.3 + 0.2 * q;  // arbitrary per-moment intercepts
    for (int n : table.ns) {
      const double tau = tau1 * q + tau2 * q * q - 1.0;
      table.s.push_back(std::exp(a_q + tau * std::log(n)));
    }
  }
  const auto fit = scaling_regression(table);
  CHECK(fit.tau1 == doctest::Approx(tau1).epsilon(1e-12));
  CHECK(fit.tau2 == doctest::Approx(tau2).epsilon(1e-12));
  CHECK(fit.rss < 1e-20);
  REQUIRE(fit.intercepts.size() == table.qs.size());
  for (const auto& [q, a] : fit.intercepts)
    CHECK(a == doctest::Approx(0.3 + 0.2 * q).epsilon(1e-10));

  PartitionTable thin = table;
  thin.ns = {2, 4};
  thin.s.clear();
  for (std::size_t qi = 0; qi < thin.qs.size(); ++qi)
    for (std::size_t ni = 0; ni < 2; ++ni)
      thin.s.push_back(table.at(qi, ni));
  CHECK_THROWS_AS(scaling_regression(thin), std::invalid_argument);
}

TEST_CASE("spectrum inversion reproduces the reference fit") {
  const auto s = spectrum_from_tau(0.56, -0.03);
  CHECK(s.H == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.lambda == doctest::Approx(1.12).epsilon(1e-12));
  CHECK(s.alpha0 == doctest::Approx(0.56).epsilon(1e-12));
  CHECK(s.alpha1 == doctest::Approx(0.44).epsilon(1e-12));
  CHECK(s.q_star == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.alpha_min == doctest::Approx(0.21358983848622459).epsilon(1e-14));
  CHECK(s.alpha_max == doctest::Approx(0.90641016151377551).epsilon(1e-14));
}

TEST_CASE("a vanishing quadratic term is handled without cancellation") {
  const auto a = spectrum_from_tau(0.5, 0.0);
  CHECK(a.H == 0.5);  // exact: disc = tau1^2
  CHECK(a.lambda == 1.0);
  CHECK(a.alpha_min == 0.5);
  CHECK(a.alpha_max == 0.5);
  const auto b = spectrum_from_tau(0.62, 0.0);
  CHECK(b.H == doctest::Approx(0.62).epsilon(1e-15));
  CHECK(b.lambda == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("inversion is consistent for estimates below unit intermittency") {
  // tau2 > 0 corresponds to a fitted lambda < 1; the inversion must still
  // satisfy tau1 = lambda H and tau2 = -(lambda - 1) H^2.
  const auto s = spectrum_from_tau(0.54, 0.01);
  CHECK(s.H == doctest::Approx(0.55792360097775939).epsilon(1e-14));
  CHECK(s.lambda == doctest::Approx(0.9678744527990063).epsilon(1e-14));
  CHECK(s.lambda * s.H == doctest::Approx(0.54).epsilon(1e-14));
  CHECK(-(s.lambda - 1.0) * s.H * s.H == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.alpha_min == s.alpha_max);  // no real spectrum width
}

TEST_CASE("round trip through the scaling exponents is exact to float noise") {
  RandomStream pick{SeedSpec{31337, 0}};
  for (int i = 0; i < 200; ++i) {
    const double H = 0.1 + 0.8 * pick.next_unit();
    const double lambda = 1.001 + 0.899 * pick.next_unit();
    const double tau1 = lambda * H;
    const double tau2 = -(lambda - 1.0) * H * H;
    const auto s = spectrum_from_tau(tau1, tau2);
    REQUIRE(std::fabs(s.H - H) < 1e-12);
    REQUIRE(std::fabs(s.lambda - lambda) < 1e-12);
    REQUIRE(s.alpha0 == tau1);
    REQUIRE(std::fabs(s.q_star - 1.0 / H) < 1e-10);
  }
}

TEST_CASE("inadmissible exponent pairs are estimation errors") {
  CHECK_THROWS_AS(spectrum_from_tau(0.0, -0.01), EstimationError);
  CHECK_THROWS_AS(spectrum_from_tau(-0.5, -0.01), EstimationError);
  CHECK_THROWS_AS(spectrum_from_tau(0.2, -0.2), EstimationError);
}

TEST_CASE("spectrum curve is the Legendre parabola over its support") {
  ScalingFit fit;
  fit.tau1 = 0.56;
  fit.tau2 = -0.03;
  const std::vector<double> alphas{0.44, 0.56};
  const auto pts = spectrum_curve(fit, alphas);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].second == doctest::Approx(0.88).epsilon(1e-12));
  CHECK(pts[1].second == doctest::Approx(1.0).epsilon(1e-12));

  const auto curve = spectrum_curve(fit);
  REQUIRE(curve.size() == 201);
  CHECK(curve.front().first == doctest::Approx(0.21358983848622459).epsilon(1e-12));
  CHECK(curve.back().first == doctest::Approx(0.90641016151377551).epsilon(1e-12));
  CHECK(curve.front().second == doctest::Approx(0.0).epsilon(1e-9));
  const auto peak = std::max_element(
      curve.begin(), curve.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  CHECK(peak->second == doctest::Approx(1.0).epsilon(1e-3));

  ScalingFit flat;
  flat.tau1 = 0.5;
  flat.tau2 = 0.0;
  const auto point = spectrum_curve(flat);
  REQUIRE(point.size() == 1);
  CHECK(point[0].first == 0.5);
  CHECK(point[0].second == 1.0);
}

TEST_CASE("default grids are the documented sequences") {
  const auto qs = default_moment_grid();
  REQUIRE(qs.size() == 10);
  for (int k = 1; k <= 10; ++k) CHECK(qs[k - 1] == 0.5 * k);

  CHECK(default_scale_grid(5000) ==
        std::vector<int>{2, 3, 4, 6, 8, 11, 16, 22, 32, 45, 63, 89, 125, 177, 250});
  CHECK(default_scale_grid(2500) ==
        std::vector<int>{2, 3, 4, 5, 7, 9, 12, 16, 21, 29, 38, 52, 69, 93, 125});
  CHECK(default_scale_grid(512) ==
        std::vector<int>{2, 3, 4, 5, 6, 7, 9, 10, 12, 15, 18, 21, 26});
  CHECK(default_scale_grid(100) == std::vector<int>{2, 3, 4, 5});
  CHECK(default_scale_grid(8) == std::vector<int>{2, 3, 4});
}

TEST_CASE("estimate flags degenerate and suspicious inputs") {
  LogReturnSeries ones;
  ones.values.assign(512, 1.0);
  const std::vector<int> ns{2, 4, 8, 16, 32};
  const std::vector<double> qs{1.0, 2.0, 3.0};
  const auto res = estimate(ones, qs, ns);
  CHECK(res.fit.tau1 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(res.fit.tau2 == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(has_warning(res.warnings, "deterministic"));

  LogReturnSeries zeros;
  zeros.values.assign(512, 0.0);
  CHECK_THROWS_AS(estimate(zeros, qs, ns), EstimationError);

  LogReturnSeries stall;
  stall.values.resize(600);
  for (std::size_t t = 0; t < stall.values.size(); ++t)
    stall.values[t] = (t % 4 == 0) ? 0.01 : 0.0;
  const auto stalled = estimate(stall);
  CHECK(stalled.zero_floor_count > 0);
  CHECK(has_warning(stalled.warnings, "floored"));

  const auto sim = simulate_mmar({0.5, 1.0, 300}, SeedSpec{5, 5});
  CHECK(has_warning(estimate(sim).warnings, "noisy"));
}

TEST_CASE("estimates on simulated white noise center on one half") {
  const int seeds = 30;
  double h = 0.0, t2 = 0.0;
  for (int s = 1; s <= seeds; ++s) {
    const auto sim = simulate_mmar({0.5, 1.0, 2000}, SeedSpec{8800, static_cast<std::uint64_t>(s)});
    const auto res = estimate(sim);
    h += res.spectrum.H / seeds;
    t2 += res.fit.tau2 / seeds;
  }
  CHECK(h == doctest::Approx(0.5).epsilon(0.06));
  CHECK(std::fabs(t2) < 0.02);
}
