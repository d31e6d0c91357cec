#include "mmar/mctest.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mmar/cascade.hpp"
#include "mmar/parallel.hpp"
#include "mmar/rng.hpp"
#include "mmar/stats.hpp"

namespace mmar {
namespace {

void check_ar_coefficients(std::span<const std::pair<int, double>> coeffs) {
  if (coeffs.empty()) return;
  int kmax = 0;
  std::vector<int> seen;
  for (const auto& [lag, value] : coeffs) {
    if (lag < 1)
      throw std::invalid_argument("AR lag must be >= 1, got " +
                                  std::to_string(lag));
    if (!std::isfinite(value))
      throw std::invalid_argument("AR coefficient at lag " +
                                  std::to_string(lag) + " is not finite");
    if (std::find(seen.begin(), seen.end(), lag) != seen.end())
      throw std::invalid_argument("duplicate AR lag " + std::to_string(lag));
    seen.push_back(lag);
    kmax = std::max(kmax, lag);
  }
  // Stationarity: companion-matrix spectral radius strictly below one.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(kmax, kmax);
  for (const auto& [lag, value] : coeffs) companion(0, lag - 1) = value;
  for (int i = 1; i < kmax; ++i) companion(i, i - 1) = 1.0;
  const auto eigenvalues = companion.eigenvalues();
  double radius = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    radius = std::max(radius, std::abs(eigenvalues(i)));
  if (!(radius < 1.0))
    throw std::invalid_argument("AR null model is not stationary: companion "
                                "spectral radius = " +
                                std::to_string(radius));
}

// Null-model return series: unit normal innovations, optionally passed
// through the AR recursion with 500 warm-up steps.  No coefficients means
// the innovations are returned as-is (identical draws either way).
LogReturnSeries simulate_null(std::span<const std::pair<int, double>> coeffs,
                              std::size_t T, SeedSpec seed) {
  RandomStream innov = RandomStream{seed}.child({stream_tag::kInnovations});
  LogReturnSeries out;
  out.origin = SeriesOrigin::kSimulated;
  if (coeffs.empty()) {
    out.values.resize(T);
    for (double& v : out.values) v = innov.next_normal();
    return out;
  }
  constexpr std::size_t kBurn = 500;
  const std::size_t total = T + kBurn;
  std::vector<double> x(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    double v = innov.next_normal();
    for (const auto& [lag, coef] : coeffs) {
      const std::size_t k = static_cast<std::size_t>(lag);
      if (t >= k) v += coef * x[t - k];
    }
    x[t] = v;
  }
  out.values.assign(x.begin() + kBurn, x.end());
  return out;
}

std::vector<double> canonical_grid(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> canonical_grid(std::span<const int> xs) {
  std::vector<int> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EstimateCloud build_cloud(NullModel model,
                          std::span<const std::pair<int, double>> coeffs,
                          std::size_t T, int reps, std::uint64_t master_seed,
                          std::span<const double> qs, std::span<const int> ns,
                          int threads) {
  if (reps < 100)
    throw std::invalid_argument("cloud needs >= 100 replications, got " +
                                std::to_string(reps));
  if (T < 2)
    throw std::invalid_argument("cloud sample length must be >= 2, got " +
                                std::to_string(T));
  check_ar_coefficients(coeffs);

  EstimateCloud cloud;
  cloud.null_model = model;
  cloud.ar_coefficients.assign(coeffs.begin(), coeffs.end());
  std::sort(cloud.ar_coefficients.begin(), cloud.ar_coefficients.end());
  cloud.T = T;
  cloud.requested_reps = reps;
  cloud.master_seed = master_seed;
  cloud.q_grid = qs.empty() ? default_moment_grid() : canonical_grid(qs);
  cloud.n_grid = ns.empty() ? default_scale_grid(T) : canonical_grid(ns);
  if (reps < 1000)
    cloud.warnings.push_back("cloud has only " + std::to_string(reps) +
                             " replications; critical values will be noisy");

  std::vector<CloudPoint> slots(static_cast<std::size_t>(reps));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  parallel_for(
      static_cast<std::size_t>(reps),
      [&](std::size_t i) {
        const SeedSpec spec{master_seed, static_cast<std::uint64_t>(i) + 1};
        const auto series = simulate_null(cloud.ar_coefficients, T, spec);
        try {
          const auto est = estimate(series, cloud.q_grid, cloud.n_grid);
          slots[i] = {est.spectrum.H, est.spectrum.lambda};
          ok[i] = 1;
        } catch (const EstimationError&) {
          // degenerate replication; dropped below
        }
      },
      threads);

  cloud.points.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (ok[i]) cloud.points.push_back(slots[i]);
  cloud.excluded = reps - static_cast<int>(cloud.points.size());
  if (cloud.excluded * 100 > reps)
    throw std::runtime_error(std::to_string(cloud.excluded) + " of " +
                             std::to_string(reps) +
                             " cloud replications failed estimation (> 1%)");
  if (cloud.excluded > 0)
    cloud.warnings.push_back(std::to_string(cloud.excluded) +
                             " replications excluded from the cloud");
  return cloud;
}

}  // namespace

EstimateCloud build_cloud_niid(std::size_t T, int reps,
                               std::uint64_t master_seed,
                               std::span<const double> qs,
                               std::span<const int> ns, int threads) {
  return build_cloud(NullModel::kNiid, {}, T, reps, master_seed, qs, ns,
                     threads);
}

EstimateCloud build_cloud_ar(std::span<const std::pair<int, double>> coeffs,
                             std::size_t T, int reps,
                             std::uint64_t master_seed,
                             std::span<const double> qs,
                             std::span<const int> ns, int threads) {
  return build_cloud(NullModel::kAr, coeffs, T, reps, master_seed, qs, ns,
                     threads);
}

double pvalue_H(const EstimateCloud& cloud, double H_hat) {
  if (cloud.points.empty()) throw std::invalid_argument("empty cloud");
  std::size_t above = 0;
  for (const auto& pt : cloud.points)
    if (pt.H > H_hat) ++above;
  const double pi = static_cast<double>(above) / cloud.points.size();
  return 2.0 * std::min(pi, 1.0 - pi);
}

double pvalue_lambda(const EstimateCloud& cloud, double lambda_hat) {
  if (cloud.points.empty()) throw std::invalid_argument("empty cloud");
  std::size_t above = 0;
  for (const auto& pt : cloud.points)
    if (pt.lambda > lambda_hat) ++above;
  return static_cast<double>(above) / cloud.points.size();
}

CloudGeometry::CloudGeometry(const EstimateCloud& cloud) {
  const auto& pts = cloud.points;
  if (pts.size() < 100)
    throw std::invalid_argument("ellipse geometry needs >= 100 cloud points, got " +
                                std::to_string(pts.size()));
  const double n = static_cast<double>(pts.size());
  long double sl = 0.0L, sh = 0.0L;
  for (const auto& pt : pts) {
    sl += pt.lambda;
    sh += pt.H;
  }
  mu_l_ = static_cast<double>(sl / n);
  mu_h_ = static_cast<double>(sh / n);
  long double c_ll = 0.0L, c_lh = 0.0L, c_hh = 0.0L;
  for (const auto& pt : pts) {
    const double dl = pt.lambda - mu_l_;
    const double dh = pt.H - mu_h_;
    c_ll += dl * dl;
    c_lh += dl * dh;
    c_hh += dh * dh;
  }
  const double v_ll = static_cast<double>(c_ll / (n - 1.0));
  const double v_lh = static_cast<double>(c_lh / (n - 1.0));
  const double v_hh = static_cast<double>(c_hh / (n - 1.0));
  const double det = v_ll * v_hh - v_lh * v_lh;
  if (!(det > 0.0) || !std::isfinite(det))
    throw std::invalid_argument("cloud covariance is singular; cannot form an ellipse");
  inv_ll_ = v_hh / det;
  inv_lh_ = -v_lh / det;
  inv_hh_ = v_ll / det;
  sorted_d2_.reserve(pts.size());
  for (const auto& pt : pts) sorted_d2_.push_back(mahalanobis2(pt.lambda, pt.H));
  std::sort(sorted_d2_.begin(), sorted_d2_.end());
}

double CloudGeometry::mahalanobis2(double lambda, double H) const {
  const double dl = lambda - mu_l_;
  const double dh = H - mu_h_;
  return inv_ll_ * dl * dl + 2.0 * inv_lh_ * dl * dh + inv_hh_ * dh * dh;
}

double CloudGeometry::level(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("ellipse level must lie in (0,1), got " +
                                std::to_string(p));
  return sorted_quantile(sorted_d2_, 1.0 - p);
}

ConicEllipse CloudGeometry::ellipse(double p) const {
  const double c = level(p);
  const double a = inv_ll_, b = inv_lh_, d = inv_hh_;
  ConicEllipse e;
  e.p = p;
  e.g1 = a;
  e.g2 = d;
  e.g3 = 2.0 * b;
  e.g4 = -2.0 * a * mu_l_ - 2.0 * b * mu_h_;
  e.g5 = -2.0 * b * mu_l_ - 2.0 * d * mu_h_;
  e.g0 = c - (a * mu_l_ * mu_l_ + 2.0 * b * mu_l_ * mu_h_ + d * mu_h_ * mu_h_);
  e.g2 /= e.g1;
  e.g3 /= e.g1;
  e.g4 /= e.g1;
  e.g5 /= e.g1;
  e.g0 /= e.g1;
  e.g1 = 1.0;
  return e;
}

double CloudGeometry::joint_pvalue(double H_hat, double lambda_hat) const {
  for (int j = 1; j <= 999; ++j) {
    const double p = (1000 - j) / 1000.0;
    if (!region_rejects(ellipse(p), lambda_hat, H_hat)) return p;
  }
  return 0.0;
}

ConicEllipse fit_ellipse(const EstimateCloud& cloud, double p) {
  return CloudGeometry{cloud}.ellipse(p);
}

EllipseExtremes ellipse_extremes(const ConicEllipse& e) {
  const double A = e.g3 * e.g3 - 4.0 * e.g1 * e.g2;
  if (!(A < 0.0))
    throw std::invalid_argument("conic is not an ellipse (g3^2 - 4 g1 g2 >= 0)");
  EllipseExtremes ex;
  {  // tangency in H: horizontal lines meet the ellipse iff between roots
    const double B = 2.0 * e.g3 * e.g4 - 4.0 * e.g1 * e.g5;
    const double C = e.g4 * e.g4 + 4.0 * e.g1 * e.g0;
    const double s = std::sqrt(std::max(B * B - 4.0 * A * C, 0.0));
    const double r1 = (-B - s) / (2.0 * A);
    const double r2 = (-B + s) / (2.0 * A);
    ex.h_min = std::min(r1, r2);
    ex.h_max = std::max(r1, r2);
  }
  {  // tangency in lambda
    const double B = 2.0 * e.g3 * e.g5 - 4.0 * e.g2 * e.g4;
    const double C = e.g5 * e.g5 + 4.0 * e.g2 * e.g0;
    const double s = std::sqrt(std::max(B * B - 4.0 * A * C, 0.0));
    const double r1 = (-B - s) / (2.0 * A);
    const double r2 = (-B + s) / (2.0 * A);
    ex.lambda_min = std::min(r1, r2);
    ex.lambda_max = std::max(r1, r2);
  }
  return ex;
}

bool region_rejects(const ConicEllipse& e, double lambda_hat, double H_hat) {
  const auto ex = ellipse_extremes(e);
  if (H_hat < ex.h_min || H_hat > ex.h_max) return true;
  if (lambda_hat < ex.lambda_min || lambda_hat > ex.lambda_max) return true;
  // Roots in H of the conic at lambda_hat bracket the acceptance slice.
  const double b = e.g3 * lambda_hat + e.g5;
  const double c0 = e.g1 * lambda_hat * lambda_hat + e.g4 * lambda_hat - e.g0;
  const double disc = b * b - 4.0 * e.g2 * c0;
  if (disc < 0.0) return true;
  const double s = std::sqrt(disc);
  const double f1 = (-b - s) / (2.0 * e.g2);
  const double f2 = (-b + s) / (2.0 * e.g2);
  return H_hat < f1 || H_hat > f2;
}

std::vector<std::pair<double, double>> ellipse_boundary(const ConicEllipse& e,
                                                        int points) {
  if (points < 3) throw std::invalid_argument("boundary needs >= 3 points");
  const double det2 = 4.0 * e.g1 * e.g2 - e.g3 * e.g3;
  if (!(det2 > 0.0))
    throw std::invalid_argument("conic is not an ellipse (g3^2 - 4 g1 g2 >= 0)");
  const double lc = (-2.0 * e.g2 * e.g4 + e.g3 * e.g5) / det2;
  const double hc = (-2.0 * e.g1 * e.g5 + e.g3 * e.g4) / det2;
  const double qc = e.g1 * lc * lc + e.g2 * hc * hc + e.g3 * lc * hc +
                    e.g4 * lc + e.g5 * hc - e.g0;
  const double radius2 = std::max(-qc, 0.0);
  // Principal axes of [[g1, g3/2], [g3/2, g2]].
  const double half_angle = 0.5 * std::atan2(e.g3, e.g1 - e.g2);
  const double ca = std::cos(half_angle), sa = std::sin(half_angle);
  const double e1 = e.g1 * ca * ca + e.g3 * ca * sa + e.g2 * sa * sa;
  const double e2 = e.g1 * sa * sa - e.g3 * ca * sa + e.g2 * ca * ca;
  const double r1 = std::sqrt(radius2 / e1);
  const double r2 = std::sqrt(radius2 / e2);
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double th = 2.0 * std::numbers::pi * i / points;
    const double u = r1 * std::cos(th), v = r2 * std::sin(th);
    out.emplace_back(lc + u * ca - v * sa, hc + u * sa + v * ca);
  }
  return out;
}

double joint_test(const EstimateCloud& cloud, double H_hat, double lambda_hat) {
  return CloudGeometry{cloud}.joint_pvalue(H_hat, lambda_hat);
}

TestReport run_tests(const EstimateCloud& cloud, double H_hat,
                     double lambda_hat) {
  TestReport report;
  report.H_hat = H_hat;
  report.lambda_hat = lambda_hat;
  report.p_H = pvalue_H(cloud, H_hat);
  report.p_lambda = pvalue_lambda(cloud, lambda_hat);
  report.p_joint = CloudGeometry{cloud}.joint_pvalue(H_hat, lambda_hat);
  for (std::size_t i = 0; i < report.levels.size(); ++i) {
    report.reject_H[i] = report.p_H < report.levels[i];
    report.reject_lambda[i] = report.p_lambda < report.levels[i];
    report.reject_joint[i] = report.p_joint < report.levels[i];
  }
  return report;
}

SizePowerCell size_power_cell(const MmarParams& params,
                              const EstimateCloud& cloud, int outer_reps,
                              std::uint64_t sim_seed,
                              std::span<const double> levels, int threads) {
  if (outer_reps < 1)
    throw std::invalid_argument("outer replication count must be >= 1");
  if (cloud.T != params.T)
    throw std::invalid_argument("cloud was built at T = " +
                                std::to_string(cloud.T) +
                                " but the cell simulates T = " +
                                std::to_string(params.T));
  for (double a : levels)
    if (!(a > 0.0 && a < 1.0))
      throw std::invalid_argument("test level must lie in (0,1)");

  const CloudGeometry geometry{cloud};
  std::vector<double> sorted_h, sorted_l;
  sorted_h.reserve(cloud.points.size());
  sorted_l.reserve(cloud.points.size());
  for (const auto& pt : cloud.points) {
    sorted_h.push_back(pt.H);
    sorted_l.push_back(pt.lambda);
  }
  std::sort(sorted_h.begin(), sorted_h.end());
  std::sort(sorted_l.begin(), sorted_l.end());
  const double n_cloud = static_cast<double>(cloud.points.size());

  struct Pvals {
    double h = 0.0, lambda = 0.0, joint = 0.0;
  };
  std::vector<Pvals> pvals(static_cast<std::size_t>(outer_reps));
  std::vector<char> ok(static_cast<std::size_t>(outer_reps), 0);
  parallel_for(
      static_cast<std::size_t>(outer_reps),
      [&](std::size_t i) {
        const SeedSpec spec{sim_seed, static_cast<std::uint64_t>(i) + 1};
        const auto series = simulate_mmar(params, spec);
        try {
          const auto est = estimate(series, cloud.q_grid, cloud.n_grid);
          const double H_hat = est.spectrum.H;
          const double l_hat = est.spectrum.lambda;
          const double above_h = static_cast<double>(
              sorted_h.end() -
              std::upper_bound(sorted_h.begin(), sorted_h.end(), H_hat));
          const double pi_h = above_h / n_cloud;
          pvals[i].h = 2.0 * std::min(pi_h, 1.0 - pi_h);
          pvals[i].lambda = static_cast<double>(
              sorted_l.end() -
              std::upper_bound(sorted_l.begin(), sorted_l.end(), l_hat)) /
              n_cloud;
          pvals[i].joint = geometry.joint_pvalue(H_hat, l_hat);
          ok[i] = 1;
        } catch (const EstimationError&) {
          // excluded replication
        }
      },
      threads);

  SizePowerCell cell;
  cell.params = params;
  cell.levels.assign(levels.begin(), levels.end());
  cell.outer_reps = outer_reps;
  cell.reject_rate_H.assign(levels.size(), 0.0);
  cell.reject_rate_lambda.assign(levels.size(), 0.0);
  cell.reject_rate_joint.assign(levels.size(), 0.0);
  int included = 0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    if (!ok[i]) continue;
    ++included;
    for (std::size_t k = 0; k < cell.levels.size(); ++k) {
      if (pvals[i].h < cell.levels[k]) cell.reject_rate_H[k] += 1.0;
      if (pvals[i].lambda < cell.levels[k]) cell.reject_rate_lambda[k] += 1.0;
      if (pvals[i].joint < cell.levels[k]) cell.reject_rate_joint[k] += 1.0;
    }
  }
  cell.excluded = outer_reps - included;
  if (included == 0)
    throw std::runtime_error("every replication in the size/power cell failed");
  for (std::size_t k = 0; k < cell.levels.size(); ++k) {
    cell.reject_rate_H[k] /= included;
    cell.reject_rate_lambda[k] /= included;
    cell.reject_rate_joint[k] /= included;
  }
  return cell;
}

KurtosisCheck kurtosis_check(double observed_kurtosis, double lambda,
                             std::size_t T, int reps,
                             std::uint64_t master_seed, int threads) {
  if (!(lambda >= 1.0))
    throw std::invalid_argument("kurtosis check needs lambda >= 1, got " +
                                std::to_string(lambda));
  if (T < 10)
    throw std::invalid_argument("kurtosis check needs T >= 10, got " +
                                std::to_string(T));
  if (reps < 100)
    throw std::invalid_argument("kurtosis check needs >= 100 replications");
  std::vector<double> sims(static_cast<std::size_t>(reps));
  parallel_for(
      static_cast<std::size_t>(reps),
      [&](std::size_t i) {
        const SeedSpec spec{master_seed, static_cast<std::uint64_t>(i) + 1};
        const auto theta = build_cascade({lambda, T}, spec);
        RandomStream innov = RandomStream{spec}.child({stream_tag::kInnovations});
        std::vector<double> x(T);
        for (std::size_t t = 0; t < T; ++t)
          x[t] = std::sqrt(theta.values[t]) * innov.next_normal();
        sims[i] = kurtosis(x);
      },
      threads);
  std::sort(sims.begin(), sims.end());
  KurtosisCheck check;
  check.observed = observed_kurtosis;
  check.bound95 = sorted_quantile(sims, 0.95);
  check.within = observed_kurtosis <= check.bound95;
  check.lambda = lambda;
  check.T = T;
  check.reps = reps;
  return check;
}

}  // namespace mmar
