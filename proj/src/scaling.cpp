#include "mmar/scaling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mmar/stats.hpp"

namespace mmar {
namespace {

std::vector<double> sorted_unique(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> sorted_unique(std::span<const int> xs) {
  std::vector<int> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// |logp[first + m*n] - logp[first + (m-1)*n]| for m = 1..M appended to `v`.
void block_increments(std::span<const double> logp, std::size_t first,
                      std::size_t n, std::size_t M, std::vector<double>& v) {
  for (std::size_t m = 1; m <= M; ++m)
    v.push_back(std::fabs(logp[first + m * n] - logp[first + (m - 1) * n]));
}

}  // namespace

PartitionTable build_partition_table(std::span<const double> logp,
                                     std::span<const double> qs,
                                     std::span<const int> ns) {
  if (logp.size() < 3)
    throw std::invalid_argument("partition table needs >= 3 log prices, got " +
                                std::to_string(logp.size()));
  for (double p : logp)
    if (!std::isfinite(p))
      throw std::invalid_argument("log price path contains a non-finite value");
  PartitionTable table;
  table.T = logp.size() - 1;
  table.qs = sorted_unique(qs);
  table.ns = sorted_unique(ns);
  if (table.qs.empty()) throw std::invalid_argument("empty moment grid");
  if (table.ns.empty()) throw std::invalid_argument("empty scale grid");
  for (double q : table.qs)
    if (!(q > 0.0) || !std::isfinite(q))
      throw std::invalid_argument("moments must be positive and finite, got " +
                                  std::to_string(q));
  for (int n : table.ns)
    if (n < 1 || static_cast<std::size_t>(n) > table.T / 2)
      throw std::invalid_argument("scale " + std::to_string(n) +
                                  " outside [1, T/2] for T = " +
                                  std::to_string(table.T));

  // Floor for exact-zero increments: 1e-3 times the smallest nonzero
  // one-step move.
  double min_step = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < logp.size(); ++t) {
    const double r = std::fabs(logp[t + 1] - logp[t]);
    if (r > 0.0) min_step = std::min(min_step, r);
  }
  if (!std::isfinite(min_step))
    throw EstimationError("log price path is constant: every increment is zero");
  const double floor = min_step * 1e-3;

  table.s.assign(table.qs.size() * table.ns.size(), 0.0);
  std::vector<double> v;          // shared across moments for one scale
  std::vector<double> log_v;
  for (std::size_t ni = 0; ni < table.ns.size(); ++ni) {
    const std::size_t n = static_cast<std::size_t>(table.ns[ni]);
    const std::size_t M = table.T / n;
    const std::size_t leftover = table.T - n * M;
    v.clear();
    block_increments(logp, 0, n, M, v);
    block_increments(logp, leftover, n, M, v);
    for (double& x : v) {
      if (x == 0.0) {
        x = floor;
        ++table.zero_floor_count;
      }
    }
    log_v.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) log_v[i] = std::log(v[i]);
    for (std::size_t qi = 0; qi < table.qs.size(); ++qi) {
      const double q = table.qs[qi];
      double acc = 0.0;
      for (double lv : log_v) acc += std::exp(q * lv);
      table.s[qi * table.ns.size() + ni] = 0.5 * acc;
    }
  }
  return table;
}

double partition_function(std::span<const double> logp, int n, double q) {
  const double qs[] = {q};
  const int ns[] = {n};
  return build_partition_table(logp, qs, ns).s[0];
}

ScalingFit scaling_regression(const PartitionTable& table) {
  const std::size_t nq = table.qs.size();
  const std::size_t nn = table.ns.size();
  if (nq < 2)
    throw std::invalid_argument("scaling regression needs >= 2 moments, got " +
                                std::to_string(nq));
  if (nn < 3)
    throw std::invalid_argument("scaling regression needs >= 3 scales, got " +
                                std::to_string(nn));
  for (double s : table.s)
    if (!(s > 0.0) || !std::isfinite(s))
      throw EstimationError("partition table has a non-positive entry");

  const Eigen::Index rows = static_cast<Eigen::Index>(nq * nn);
  const Eigen::Index cols = static_cast<Eigen::Index>(nq) + 2;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd y(rows);
  // Canonical row order (moment-major, scales ascending): the fit cannot
  // depend on the order grids were supplied in.
  Eigen::Index r = 0;
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const double q = table.qs[qi];
    for (std::size_t ni = 0; ni < nn; ++ni, ++r) {
      const double ln_n = std::log(static_cast<double>(table.ns[ni]));
      y(r) = std::log(table.at(qi, ni)) + ln_n;
      X(r, static_cast<Eigen::Index>(qi)) = 1.0;
      X(r, cols - 2) = q * ln_n;
      X(r, cols - 1) = q * q * ln_n;
    }
  }
  const auto qr = X.colPivHouseholderQr();
  if (qr.rank() < cols)
    throw EstimationError("scaling design matrix is rank deficient (" +
                          std::to_string(qr.rank()) + " of " +
                          std::to_string(cols) + ")");
  const Eigen::VectorXd beta = qr.solve(y);
  ScalingFit fit;
  fit.tau1 = beta(cols - 2);
  fit.tau2 = beta(cols - 1);
  fit.intercepts.reserve(nq);
  for (std::size_t qi = 0; qi < nq; ++qi)
    fit.intercepts.emplace_back(table.qs[qi], beta(static_cast<Eigen::Index>(qi)));
  fit.rss = (y - X * beta).squaredNorm();
  return fit;
}

SpectrumSummary spectrum_from_tau(double tau1, double tau2) {
  if (!std::isfinite(tau1) || !std::isfinite(tau2))
    throw EstimationError("scaling coefficients are not finite");
  if (!(tau1 > 0.0))
    throw EstimationError("scaling slope tau1 = " + std::to_string(tau1) +
                          " is not positive; no admissible H");
  const double disc = tau1 * tau1 + 4.0 * tau2;
  if (!(disc > 0.0))
    throw EstimationError("tau1^2 + 4 tau2 = " + std::to_string(disc) +
                          " <= 0; scaling exponent has no positive root");
  SpectrumSummary s;
  s.H = 0.5 * (tau1 + std::sqrt(disc));
  s.lambda = tau1 / s.H;
  s.alpha0 = tau1;
  s.q_star = 1.0 / s.H;
  s.alpha1 = tau1 + 2.0 * tau2 * s.q_star;
  if (tau2 < 0.0) {
    const double half_width = 2.0 * std::sqrt(-tau2);
    s.alpha_min = tau1 - half_width;
    s.alpha_max = tau1 + half_width;
  } else {
    s.alpha_min = s.alpha_max = tau1;
  }
  return s;
}

SpectrumSummary spectrum_from_fit(const ScalingFit& fit) {
  return spectrum_from_tau(fit.tau1, fit.tau2);
}

std::vector<std::pair<double, double>> spectrum_curve(
    const ScalingFit& fit, std::span<const double> alphas) {
  std::vector<std::pair<double, double>> out;
  if (!(fit.tau2 < 0.0)) {
    out.emplace_back(fit.tau1, 1.0);
    return out;
  }
  out.reserve(alphas.size());
  for (double a : alphas) {
    const double da = a - fit.tau1;
    out.emplace_back(a, 1.0 + da * da / (4.0 * fit.tau2));
  }
  return out;
}

std::vector<std::pair<double, double>> spectrum_curve(const ScalingFit& fit) {
  if (!(fit.tau2 < 0.0)) return spectrum_curve(fit, {});
  const double half_width = 2.0 * std::sqrt(-fit.tau2);
  const double lo = fit.tau1 - half_width;
  const double hi = fit.tau1 + half_width;
  constexpr int kPoints = 201;
  std::vector<double> alphas(kPoints);
  for (int i = 0; i < kPoints; ++i)
    alphas[i] = lo + (hi - lo) * i / (kPoints - 1);
  return spectrum_curve(fit, alphas);
}

std::vector<double> default_moment_grid() {
  std::vector<double> qs;
  for (int k = 1; k <= 10; ++k) qs.push_back(0.5 * k);
  return qs;
}

std::vector<int> default_scale_grid(std::size_t T) {
  const double lo = 2.0;
  const double hi = std::max<double>(4.0, static_cast<double>(T) / 20.0);
  constexpr int kTargets = 15;
  std::vector<int> ns;
  for (int i = 0; i < kTargets; ++i) {
    const double x =
        std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (kTargets - 1));
    ns.push_back(static_cast<int>(std::lround(x)));
  }
  auto out = sorted_unique(ns);
  // Stay within the partition-table domain for short inputs.
  std::erase_if(out, [T](int n) {
    return n < 1 || static_cast<std::size_t>(n) > T / 2;
  });
  return out;
}

EstimateResult estimate(const LogReturnSeries& returns,
                        std::span<const double> qs, std::span<const int> ns) {
  const std::size_t T = returns.values.size();
  if (T < 2)
    throw std::invalid_argument("estimation needs >= 2 returns, got " +
                                std::to_string(T));
  EstimateResult result;
  if (T < 500)
    result.warnings.push_back("series has only " + std::to_string(T) +
                              " returns; scaling estimates will be noisy");
  const std::vector<double> q_default = default_moment_grid();
  const std::vector<int> n_default = default_scale_grid(T);
  const auto logp = cumulate(returns, 0.0);
  const auto table = build_partition_table(logp, qs.empty() ? q_default : qs,
                                           ns.empty() ? n_default : ns);
  result.fit = scaling_regression(table);
  result.spectrum = spectrum_from_fit(result.fit);
  result.zero_floor_count = table.zero_floor_count;
  if (table.zero_floor_count > 0)
    result.warnings.push_back(std::to_string(table.zero_floor_count) +
                              " zero increments floored in the partition table");
  if (!(result.spectrum.H > 0.0 && result.spectrum.H < 1.0))
    result.warnings.push_back("estimated H = " + std::to_string(result.spectrum.H) +
                              " lies outside (0, 1); input may be degenerate");
  if (result.fit.rss < 1e-16)
    result.warnings.push_back("scaling fit is exactly deterministic; "
                              "input looks degenerate (e.g. linear log prices)");
  if (result.spectrum.lambda >= 2.0)
    result.warnings.push_back("estimated lambda = " +
                              std::to_string(result.spectrum.lambda) +
                              " is implausibly large");
  return result;
}

}  // namespace mmar
