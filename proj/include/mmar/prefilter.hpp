#pragma once
// Autoregressive pre-filtering.  Short-horizon linear predictability is
// removed before scaling estimation: fit an AR model on lags 1..max_lag,
// keep only lags significant at the given two-sided level, refit on the
// retained set, and hand the residuals to the estimator.

#include <utility>
#include <vector>

#include "mmar/series.hpp"

namespace mmar {

struct ArFit {
  // Retained (lag, coefficient) pairs from the refit, ascending lags.
  std::vector<std::pair<int, double>> coefficients;
  std::vector<int> retained_lags;
  // Full-model t statistics for every candidate lag 1..max_lag.
  std::vector<std::pair<int, double>> tstats;
  double residual_variance = 0.0;
  LogReturnSeries residuals;  // origin kFiltered, re-centered to mean zero
};

// Two-stage fit described above.  Requires length > 10 * max_lag.
ArFit fit_ar(const LogReturnSeries& returns, int max_lag = 12,
             double alpha = 0.05);

// Applies a fitted filter to a series: de-mean, subtract the AR
// prediction from each observation with a full lag window, re-center.
// fit_ar's residuals come from this exact routine, so applying a fit to
// the series it was estimated on reproduces them bit for bit.
LogReturnSeries apply_filter(const LogReturnSeries& returns, const ArFit& fit);

}  // namespace mmar
