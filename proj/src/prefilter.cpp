#include "mmar/prefilter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mmar/stats.hpp"

namespace mmar {
namespace {

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double sigma2 = 0.0;
  double df = 0.0;
};

// OLS of the de-meaned series on its own lags (no intercept; the mean has
// already been removed).
OlsResult lag_regression(const std::vector<double>& x,
                         const std::vector<int>& lags) {
  const int kmax = *std::max_element(lags.begin(), lags.end());
  const Eigen::Index rows = static_cast<Eigen::Index>(x.size()) - kmax;
  const Eigen::Index cols = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = static_cast<std::size_t>(r + kmax);
    y(r) = x[t];
    for (Eigen::Index c = 0; c < cols; ++c)
      X(r, c) = x[t - static_cast<std::size_t>(lags[static_cast<std::size_t>(c)])];
  }
  const auto qr = X.colPivHouseholderQr();
  if (qr.rank() < cols)
    throw std::invalid_argument(
        "lag regression design is rank deficient; series is too regular to filter");
  OlsResult res;
  res.beta = qr.solve(y);
  const double rss = (y - X * res.beta).squaredNorm();
  res.df = static_cast<double>(rows - cols);
  if (res.df <= 0)
    throw std::invalid_argument("lag regression has no residual degrees of freedom");
  res.sigma2 = rss / res.df;
  const Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(cols, cols));
  res.se.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    res.se(c) = std::sqrt(res.sigma2 * xtx_inv(c, c));
  return res;
}

}  // namespace

ArFit fit_ar(const LogReturnSeries& returns, int max_lag, double alpha) {
  if (max_lag < 1)
    throw std::invalid_argument("max_lag must be >= 1, got " +
                                std::to_string(max_lag));
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("significance level must lie in (0,1), got " +
                                std::to_string(alpha));
  const std::size_t n = returns.values.size();
  if (n <= static_cast<std::size_t>(10 * max_lag))
    throw std::invalid_argument("series of length " + std::to_string(n) +
                                " is too short for max_lag " +
                                std::to_string(max_lag) +
                                " (need > 10 * max_lag)");

  const double mu = mean(returns.values);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = returns.values[t] - mu;

  std::vector<int> all_lags(static_cast<std::size_t>(max_lag));
  for (int k = 1; k <= max_lag; ++k) all_lags[static_cast<std::size_t>(k - 1)] = k;

  const OlsResult full = lag_regression(x, all_lags);
  const double crit = student_t_two_sided(alpha, full.df);

  ArFit fit;
  fit.tstats.reserve(all_lags.size());
  for (std::size_t i = 0; i < all_lags.size(); ++i) {
    const double t_stat = full.beta(static_cast<Eigen::Index>(i)) /
                          full.se(static_cast<Eigen::Index>(i));
    fit.tstats.emplace_back(all_lags[i], t_stat);
    if (std::fabs(t_stat) > crit) fit.retained_lags.push_back(all_lags[i]);
  }

  if (fit.retained_lags.empty()) {
    fit.residual_variance = variance(x);
  } else {
    const OlsResult refit = lag_regression(x, fit.retained_lags);
    for (std::size_t i = 0; i < fit.retained_lags.size(); ++i)
      fit.coefficients.emplace_back(fit.retained_lags[i],
                                    refit.beta(static_cast<Eigen::Index>(i)));
    fit.residual_variance = refit.sigma2;
  }
  fit.residuals = apply_filter(returns, fit);
  return fit;
}

LogReturnSeries apply_filter(const LogReturnSeries& returns, const ArFit& fit) {
  const std::size_t n = returns.values.size();
  int kmax = 0;
  for (const auto& [lag, coef] : fit.coefficients) kmax = std::max(kmax, lag);
  if (n <= static_cast<std::size_t>(kmax) + 1)
    throw std::invalid_argument("series of length " + std::to_string(n) +
                                " is too short to filter with max lag " +
                                std::to_string(kmax));
  const double mu = mean(returns.values);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = returns.values[t] - mu;

  LogReturnSeries out;
  out.origin = SeriesOrigin::kFiltered;
  out.values.resize(n - static_cast<std::size_t>(kmax));
  for (std::size_t t = static_cast<std::size_t>(kmax); t < n; ++t) {
    double pred = 0.0;
    for (const auto& [lag, coef] : fit.coefficients)
      pred += coef * x[t - static_cast<std::size_t>(lag)];
    out.values[t - static_cast<std::size_t>(kmax)] = x[t] - pred;
  }
  const double resid_mean = mean(out.values);
  for (double& v : out.values) v -= resid_mean;
  return out;
}

}  // namespace mmar
