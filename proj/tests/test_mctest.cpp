#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmar/mctest.hpp"
#include "mmar/rng.hpp"
#include "mmar/stats.hpp"

using namespace mmar;

namespace {

// Synthetic cloud with independent Gaussian coordinates; no estimation, so
// geometry properties can be checked against closed forms.
EstimateCloud gaussian_cloud(std::size_t n, double mu_h, double sd_h,
                             double mu_l, double sd_l, SeedSpec seed) {
  EstimateCloud cloud;
  cloud.T = 1000;
  cloud.requested_reps = static_cast<int>(n);
  RandomStream s{seed};
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    cloud.points.push_back({mu_h + sd_h * s.next_normal(),
                            mu_l + sd_l * s.next_normal()});
  return cloud;
}

bool points_equal(const EstimateCloud& a, const EstimateCloud& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i)
    if (a.points[i].H != b.points[i].H ||
        a.points[i].lambda != b.points[i].lambda)
      return false;
  return true;
}

}  // namespace

TEST_CASE("clouds replay identically for any thread count") {
  const auto one = build_cloud_niid(500, 120, 42, {}, {}, 1);
  const auto four = build_cloud_niid(500, 120, 42, {}, {}, 4);
  const auto again = build_cloud_niid(500, 120, 42, {}, {}, 4);
  REQUIRE(one.points.size() == 120);
  CHECK(points_equal(one, four));
  CHECK(points_equal(one, again));
  CHECK(one.excluded == 0);
  const auto other = build_cloud_niid(500, 120, 43, {}, {}, 1);
  CHECK(!points_equal(one, other));
  // Small clouds warn about noisy critical values.
  REQUIRE(!one.warnings.empty());
  CHECK(one.warnings.front().find("noisy") != std::string::npos);
  // Metadata records the request and the canonical grids.
  CHECK(one.T == 500);
  CHECK(one.requested_reps == 120);
  CHECK(one.master_seed == 42);
  CHECK(one.q_grid == default_moment_grid());
  CHECK(one.n_grid == default_scale_grid(500));
}

TEST_CASE("an autoregressive null with no coefficients is the white-noise null") {
  const auto niid = build_cloud_niid(400, 110, 7);
  const auto ar0 = build_cloud_ar({}, 400, 110, 7);
  CHECK(points_equal(niid, ar0));
}

TEST_CASE("autoregressive clouds differ and enforce stationarity") {
  const std::vector<std::pair<int, double>> coeffs{{1, 0.5}, {2, 0.3}};
  const auto ar = build_cloud_ar(coeffs, 400, 110, 7);
  const auto niid = build_cloud_niid(400, 110, 7);
  CHECK(!points_equal(ar, niid));
  CHECK(ar.ar_coefficients == coeffs);
  CHECK(ar.null_model == NullModel::kAr);

  const std::vector<std::pair<int, double>> unit_root{{1, 1.01}};
  CHECK_THROWS_AS(build_cloud_ar(unit_root, 400, 110, 7), std::invalid_argument);
  const std::vector<std::pair<int, double>> dup{{1, 0.2}, {1, 0.1}};
  CHECK_THROWS_AS(build_cloud_ar(dup, 400, 110, 7), std::invalid_argument);
  const std::vector<std::pair<int, double>> bad_lag{{0, 0.2}};
  CHECK_THROWS_AS(build_cloud_ar(bad_lag, 400, 110, 7), std::invalid_argument);
  CHECK_THROWS_AS(build_cloud_niid(400, 99, 7), std::invalid_argument);
}

TEST_CASE("null clouds center near the white-noise truth") {
  const auto cloud = build_cloud_niid(600, 200, 11);
  double mh = 0.0, ml = 0.0;
  for (const auto& pt : cloud.points) {
    mh += pt.H / cloud.points.size();
    ml += pt.lambda / cloud.points.size();
  }
  CHECK(mh == doctest::Approx(0.5).epsilon(0.08));
  CHECK(ml > 0.9);
  CHECK(ml < 1.35);
}

TEST_CASE("marginal p-values follow the exceedance conventions") {
  EstimateCloud cloud;
  cloud.points = {{0.40, 1.0}, {0.45, 1.1}, {0.50, 1.2}, {0.55, 1.4}, {0.60, 1.5}};
  CHECK(pvalue_H(cloud, 0.58) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(pvalue_H(cloud, 0.42) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(pvalue_H(cloud, 0.70) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pvalue_lambda(cloud, 1.3) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(pvalue_lambda(cloud, 2.0) == 0.0);
  CHECK(pvalue_lambda(cloud, 0.5) == 1.0);

  EstimateCloud even;
  even.points = {{0.40, 1.0}, {0.45, 1.0}, {0.55, 1.0}, {0.60, 1.0}};
  CHECK(pvalue_H(even, 0.50) == 1.0);  // perfectly central estimate

  EstimateCloud empty;
  CHECK_THROWS_AS(pvalue_H(empty, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(pvalue_lambda(empty, 1.0), std::invalid_argument);
}

TEST_CASE("geometry reproduces hand-computed Mahalanobis distances") {
  const auto cloud = gaussian_cloud(800, 0.5, 0.1, 1.1, 0.15, SeedSpec{21, 1});
  const CloudGeometry geom{cloud};
  // Sample moments computed independently.
  const double n = 800.0;
  double mh = 0.0, ml = 0.0;
  for (const auto& pt : cloud.points) {
    mh += pt.H / n;
    ml += pt.lambda / n;
  }
  double vll = 0.0, vlh = 0.0, vhh = 0.0;
  for (const auto& pt : cloud.points) {
    vll += (pt.lambda - ml) * (pt.lambda - ml) / (n - 1);
    vlh += (pt.lambda - ml) * (pt.H - mh) / (n - 1);
    vhh += (pt.H - mh) * (pt.H - mh) / (n - 1);
  }
  const double det = vll * vhh - vlh * vlh;
  for (const auto probe : {CloudPoint{0.62, 1.3}, CloudPoint{0.5, 1.0},
                           CloudPoint{0.31, 0.8}}) {
    const double dl = probe.lambda - ml, dh = probe.H - mh;
    const double want =
        (dl * (vhh * dl - vlh * dh) + dh * (vll * dh - vlh * dl)) / det;
    CHECK(geom.mahalanobis2(probe.lambda, probe.H) ==
          doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("ellipse levels cover the promised share of the cloud") {
  const auto cloud = gaussian_cloud(5000, 0.5, 0.1, 1.1, 0.15, SeedSpec{22, 1});
  const CloudGeometry geom{cloud};
  for (double p : {0.05, 0.25, 0.5}) {
    const double radius2 = geom.level(p);
    int inside = 0;
    for (const auto& pt : cloud.points)
      if (geom.mahalanobis2(pt.lambda, pt.H) <= radius2) ++inside;
    // Ceil-convention empirical quantile: exact coverage counts.
    CHECK(inside == static_cast<int>(std::ceil((1.0 - p) * 5000)));
  }
  CHECK_THROWS_AS(geom.level(0.0), std::invalid_argument);
  CHECK_THROWS_AS(geom.level(1.0), std::invalid_argument);
}

TEST_CASE("independent coordinates give an axis-aligned conic") {
  const auto cloud = gaussian_cloud(5000, 0.5, 0.1, 1.1, 0.15, SeedSpec{23, 5});
  const auto e = fit_ellipse(cloud, 0.05);
  CHECK(e.g1 == 1.0);  // normalization
  CHECK(e.p == 0.05);
  // Variance ratio fixes g2; no correlation kills the cross term.
  CHECK(e.g2 == doctest::Approx(0.15 * 0.15 / (0.1 * 0.1)).epsilon(0.15));
  CHECK(std::fabs(e.g3) < 0.2);
}

TEST_CASE("region decisions coincide with the Mahalanobis rule everywhere") {
  const auto cloud = gaussian_cloud(1200, 0.5, 0.08, 1.08, 0.12, SeedSpec{24, 2});
  const CloudGeometry geom{cloud};
  RandomStream probe{SeedSpec{24, 3}};
  for (int i = 0; i < 1000; ++i) {
    const double l = 1.08 + 0.6 * (probe.next_unit() - 0.5);
    const double h = 0.5 + 0.5 * (probe.next_unit() - 0.5);
    for (double p : {0.5, 0.2, 0.05, 0.01}) {
      const bool direct = geom.mahalanobis2(l, h) > geom.level(p);
      const bool region = region_rejects(geom.ellipse(p), l, h);
      REQUIRE(direct == region);
    }
  }
}

TEST_CASE("ellipse boundary satisfies the conic and fills its bounding box") {
  const auto cloud = gaussian_cloud(2000, 0.48, 0.09, 1.15, 0.2, SeedSpec{25, 1});
  const auto e = fit_ellipse(cloud, 0.1);
  const auto ext = ellipse_extremes(e);
  CHECK(ext.lambda_min < ext.lambda_max);
  CHECK(ext.h_min < ext.h_max);
  const auto boundary = ellipse_boundary(e, 512);
  REQUIRE(boundary.size() == 512);
  double max_l = -1e9, min_l = 1e9, max_h = -1e9, min_h = 1e9;
  for (const auto& [l, h] : boundary) {
    const double lhs =
        e.g1 * l * l + e.g2 * h * h + e.g3 * l * h + e.g4 * l + e.g5 * h;
    CHECK(lhs == doctest::Approx(e.g0).epsilon(1e-9));
    max_l = std::max(max_l, l);
    min_l = std::min(min_l, l);
    max_h = std::max(max_h, h);
    min_h = std::min(min_h, h);
  }
  const double tol_l = 1e-3 * (ext.lambda_max - ext.lambda_min);
  const double tol_h = 1e-3 * (ext.h_max - ext.h_min);
  CHECK(max_l <= ext.lambda_max + 1e-12);
  CHECK(min_l >= ext.lambda_min - 1e-12);
  CHECK(max_l > ext.lambda_max - tol_l);
  CHECK(min_l < ext.lambda_min + tol_l);
  CHECK(max_h > ext.h_max - tol_h);
  CHECK(min_h < ext.h_min + tol_h);

  ConicEllipse hyperbola;
  hyperbola.g1 = 1.0;
  hyperbola.g2 = -1.0;
  hyperbola.g0 = 1.0;
  CHECK_THROWS_AS(ellipse_extremes(hyperbola), std::invalid_argument);
  CHECK_THROWS_AS(ellipse_boundary(hyperbola), std::invalid_argument);
}

TEST_CASE("joint p-value sweeps the level grid consistently") {
  const auto cloud = gaussian_cloud(3000, 0.5, 0.1, 1.1, 0.15, SeedSpec{26, 1});
  const CloudGeometry geom{cloud};
  CHECK(geom.joint_pvalue(0.5, 1.1) == doctest::Approx(0.999).epsilon(1e-12));
  CHECK(geom.joint_pvalue(5.0, 9.0) == 0.0);
  // Monotone along a ray out of the center.
  double last = 1.0;
  for (double step = 0.0; step <= 1.0; step += 0.05) {
    const double jp = geom.joint_pvalue(0.5 + step, 1.1 + step);
    CHECK(jp <= last + 1e-15);
    last = jp;
  }
  // Grid-level agreement with the region decision.
  RandomStream probe{SeedSpec{26, 2}};
  for (int i = 0; i < 300; ++i) {
    const double l = 1.1 + 0.8 * (probe.next_unit() - 0.5);
    const double h = 0.5 + 0.6 * (probe.next_unit() - 0.5);
    const double jp = geom.joint_pvalue(h, l);
    for (double p : {0.999, 0.5, 0.05, 0.001}) {
      const bool rejected = region_rejects(geom.ellipse(p), l, h);
      REQUIRE(rejected == (jp < p));
    }
  }
  CHECK(joint_test(cloud, 0.5, 1.1) == geom.joint_pvalue(0.5, 1.1));
}

TEST_CASE("geometry construction rejects degenerate clouds") {
  EstimateCloud tiny = gaussian_cloud(99, 0.5, 0.1, 1.1, 0.1, SeedSpec{27, 1});
  CHECK_THROWS_AS(CloudGeometry{tiny}, std::invalid_argument);
  CHECK_THROWS_AS(fit_ellipse(tiny, 0.05), std::invalid_argument);

  EstimateCloud flat;
  flat.points.assign(200, CloudPoint{0.5, 1.1});
  CHECK_THROWS_AS(CloudGeometry{flat}, std::invalid_argument);

  const auto ok = gaussian_cloud(200, 0.5, 0.1, 1.1, 0.1, SeedSpec{27, 2});
  CHECK_THROWS_AS(fit_ellipse(ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_ellipse(ok, 1.0), std::invalid_argument);
}

TEST_CASE("the combined report wires the three tests together") {
  const auto cloud = gaussian_cloud(1000, 0.5, 0.1, 1.1, 0.15, SeedSpec{28, 1});
  const auto report = run_tests(cloud, 0.72, 1.45);
  CHECK(report.H_hat == 0.72);
  CHECK(report.lambda_hat == 1.45);
  CHECK(report.p_H == pvalue_H(cloud, 0.72));
  CHECK(report.p_lambda == pvalue_lambda(cloud, 1.45));
  CHECK(report.p_joint == joint_test(cloud, 0.72, 1.45));
  for (std::size_t k = 0; k < report.levels.size(); ++k) {
    CHECK(report.reject_H[k] == (report.p_H < report.levels[k]));
    CHECK(report.reject_lambda[k] == (report.p_lambda < report.levels[k]));
    CHECK(report.reject_joint[k] == (report.p_joint < report.levels[k]));
  }
}

TEST_CASE("size and power cells estimate rejection rates") {
  const auto cloud = build_cloud_niid(400, 150, 31);
  const std::vector<double> levels{0.10, 0.05};
  const auto null_cell =
      size_power_cell({0.5, 1.0, 400}, cloud, 100, 77, levels);
  REQUIRE(null_cell.levels == levels);
  CHECK(null_cell.outer_reps == 100);
  CHECK(null_cell.excluded == 0);
  // Null rates sit near their nominal levels (small-sample slack).
  CHECK(null_cell.reject_rate_H[0] < 0.30);
  CHECK(null_cell.reject_rate_lambda[1] < 0.20);
  CHECK(null_cell.reject_rate_joint[1] < 0.25);

  const auto power_cell =
      size_power_cell({0.5, 1.3, 400}, cloud, 100, 78, levels);
  CHECK(power_cell.reject_rate_lambda[1] >
        null_cell.reject_rate_lambda[1] + 0.3);

  const auto replay = size_power_cell({0.5, 1.0, 400}, cloud, 100, 77, levels);
  CHECK(replay.reject_rate_H == null_cell.reject_rate_H);
  CHECK(replay.reject_rate_lambda == null_cell.reject_rate_lambda);
  CHECK(replay.reject_rate_joint == null_cell.reject_rate_joint);

  CHECK_THROWS_AS(size_power_cell({0.5, 1.0, 500}, cloud, 50, 1, levels),
                  std::invalid_argument);  // cloud built at a different T
  const std::vector<double> bad{1.5};
  CHECK_THROWS_AS(size_power_cell({0.5, 1.0, 400}, cloud, 50, 1, bad),
                  std::invalid_argument);
}

TEST_CASE("kurtosis bounds grow with intermittency and flag excess") {
  const auto base = kurtosis_check(3.0, 1.0, 2000, 200, 5);
  CHECK(base.observed == 3.0);
  CHECK(base.lambda == 1.0);
  CHECK(base.T == 2000);
  CHECK(base.reps == 200);
  CHECK(base.bound95 > 3.0);
  CHECK(base.bound95 < 3.6);
  CHECK(base.within);

  const auto excess = kurtosis_check(6.38, 1.0, 2000, 200, 5);
  CHECK(excess.bound95 == base.bound95);
  CHECK(!excess.within);

  const auto fat = kurtosis_check(3.0, 1.2, 2000, 200, 5);
  CHECK(fat.bound95 > base.bound95 + 0.5);

  CHECK_THROWS_AS(kurtosis_check(3.0, 0.9, 2000, 200, 5), std::invalid_argument);
  CHECK_THROWS_AS(kurtosis_check(3.0, 1.0, 5, 200, 5), std::invalid_argument);
  CHECK_THROWS_AS(kurtosis_check(3.0, 1.0, 2000, 50, 5), std::invalid_argument);
}
