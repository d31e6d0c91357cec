#pragma once
// Monte Carlo inference.  Clouds of (H, lambda) estimates simulated under a
// null model supply empirical critical values; observed estimates are
// located within the cloud via marginal p-values and a joint confidence
// ellipse whose coverage is swept over a fine grid of levels.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmar/longmem.hpp"
#include "mmar/scaling.hpp"
#include "mmar/series.hpp"

namespace mmar {

struct CloudPoint {
  double H = 0.0;
  double lambda = 0.0;
};

enum class NullModel { kNiid, kAr };

struct EstimateCloud {
  NullModel null_model = NullModel::kNiid;
  // (lag, coefficient) pairs for the AR null; empty for NIID.
  std::vector<std::pair<int, double>> ar_coefficients;
  std::size_t T = 0;
  int requested_reps = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> q_grid;
  std::vector<int> n_grid;
  // One estimate per successful replication, in replication order.
  std::vector<CloudPoint> points;
  int excluded = 0;
  std::vector<std::string> warnings;
};

// Replication r (1-based) always simulates from stream (master_seed, r),
// so clouds are reproducible for any thread count.  Replications whose
// estimation degenerates are dropped; more than 1% exclusions is an error.
// Empty grids select the estimator defaults for this T.
EstimateCloud build_cloud_niid(std::size_t T, int reps,
                               std::uint64_t master_seed,
                               std::span<const double> qs = {},
                               std::span<const int> ns = {}, int threads = 0);

// Same, simulating a stationary AR null (coefficients as (lag, value)
// pairs) driven by unit normal innovations, 500 warm-up steps.  With no
// coefficients this is exactly the NIID cloud, bit for bit.
EstimateCloud build_cloud_ar(std::span<const std::pair<int, double>> coeffs,
                             std::size_t T, int reps, std::uint64_t master_seed,
                             std::span<const double> qs = {},
                             std::span<const int> ns = {}, int threads = 0);

// Two-sided Monte Carlo p-value for H: with pi = share of cloud H above
// H_hat, returns 2 min(pi, 1 - pi).
double pvalue_H(const EstimateCloud& cloud, double H_hat);
// One-sided p-value for lambda: share of cloud lambda above lambda_hat
// (small values mean lambda_hat sits in the right tail and reject).
double pvalue_lambda(const EstimateCloud& cloud, double lambda_hat);

// Confidence ellipse as a conic in (lambda, H), normalized so g1 = 1:
// boundary g1 l^2 + g2 H^2 + g3 l H + g4 l + g5 H = g0, interior strictly
// below.  Axes follow the cloud covariance; the squared radius is the
// empirical (1-p)-quantile of the cloud's squared Mahalanobis distances.
struct ConicEllipse {
  double g1 = 1.0, g2 = 0.0, g3 = 0.0, g4 = 0.0, g5 = 0.0, g0 = 0.0;
  double p = 0.0;  // significance level this ellipse was built for
};

struct EllipseExtremes {
  double h_min = 0.0, h_max = 0.0;
  double lambda_min = 0.0, lambda_max = 0.0;
};

// Needs >= 100 cloud points and p in (0, 1).
ConicEllipse fit_ellipse(const EstimateCloud& cloud, double p);
// Bounding box of the ellipse: roots of the tangency discriminants.
EllipseExtremes ellipse_extremes(const ConicEllipse& e);
// True when (lambda_hat, H_hat) lies strictly outside the ellipse,
// evaluated by the region tests (box exclusion, then the vertical slice
// between the H roots at lambda_hat).
bool region_rejects(const ConicEllipse& e, double lambda_hat, double H_hat);
// Boundary polyline for plotting, (lambda, H) pairs.
std::vector<std::pair<double, double>> ellipse_boundary(const ConicEllipse& e,
                                                        int points = 256);

// Precomputed cloud statistics: build once, query many times.  All query
// results are identical to the fit_ellipse / region_rejects path.
class CloudGeometry {
 public:
  explicit CloudGeometry(const EstimateCloud& cloud);

  double mahalanobis2(double lambda, double H) const;
  // Squared ellipse radius at significance p: empirical (1-p)-quantile of
  // the cloud's squared Mahalanobis distances.
  double level(double p) const;
  ConicEllipse ellipse(double p) const;
  // Sweeps p = 0.999, 0.998, ..., 0.001 and returns the largest p whose
  // ellipse contains the point; 0.0 when even the 0.001 ellipse excludes
  // it (rejection at every level on the grid).
  double joint_pvalue(double H_hat, double lambda_hat) const;

 private:
  double mu_l_ = 0.0, mu_h_ = 0.0;
  double inv_ll_ = 0.0, inv_lh_ = 0.0, inv_hh_ = 0.0;
  std::vector<double> sorted_d2_;
};

// Convenience wrapper: builds the geometry and sweeps the level grid.
double joint_test(const EstimateCloud& cloud, double H_hat, double lambda_hat);

struct TestReport {
  double H_hat = 0.0;
  double lambda_hat = 0.0;
  double p_H = 1.0;
  double p_lambda = 1.0;
  double p_joint = 1.0;
  std::array<double, 3> levels{{0.10, 0.05, 0.01}};
  std::array<bool, 3> reject_H{};
  std::array<bool, 3> reject_lambda{};
  std::array<bool, 3> reject_joint{};
};

// All three tests against one cloud; rejection at level a means p < a.
TestReport run_tests(const EstimateCloud& cloud, double H_hat,
                     double lambda_hat);

struct SizePowerCell {
  MmarParams params;
  std::vector<double> levels;
  std::vector<double> reject_rate_H;
  std::vector<double> reject_rate_lambda;
  std::vector<double> reject_rate_joint;
  int outer_reps = 0;
  int excluded = 0;
};

// Rejection rates of the three tests against `cloud` when the data are
// simulated from `params` (outer replication r uses stream (sim_seed, r)).
// The estimator runs on the cloud's own grids.
SizePowerCell size_power_cell(const MmarParams& params,
                              const EstimateCloud& cloud, int outer_reps,
                              std::uint64_t sim_seed,
                              std::span<const double> levels, int threads = 0);

struct KurtosisCheck {
  double observed = 0.0;
  double bound95 = 0.0;   // 95th percentile of simulated sample kurtosis
  bool within = false;    // observed <= bound95
  double lambda = 1.0;
  std::size_t T = 0;
  int reps = 0;
};

// Simulates compound Gaussian returns (variance = cascade increments at the
// given lambda, length exactly T) and checks whether the observed sample
// kurtosis is within the simulated 95th percentile.
KurtosisCheck kurtosis_check(double observed_kurtosis, double lambda,
                             std::size_t T, int reps,
                             std::uint64_t master_seed, int threads = 0);

}  // namespace mmar
