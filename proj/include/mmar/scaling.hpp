#pragma once
// Moment-scaling estimation.  Partition functions of absolute log-price
// increments over a grid of scales and moments feed a pooled fixed-effects
// regression whose slope coefficients (tau1 on q ln n, tau2 on q^2 ln n)
// identify the self-affinity exponent H and the intermittency lambda.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmar/series.hpp"

namespace mmar {

// Data-dependent estimation failure (degenerate inputs, no admissible
// scaling solution) as opposed to a broken caller contract.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PartitionTable {
  std::vector<double> qs;  // ascending, distinct, > 0
  std::vector<int> ns;     // ascending, distinct, in [1, T/2]
  std::vector<double> s;   // row-major: s[qi * ns.size() + ni]
  std::size_t T = 0;       // number of increments
  int zero_floor_count = 0;  // zero increments replaced by the floor

  double at(std::size_t qi, std::size_t ni) const {
    return s[qi * ns.size() + ni];
  }
};

// Averaged q-th absolute moment of n-step increments of `logp` over two
// block partitions: one anchored at the start, one at the end (identical
// when n divides T).  Exact zeros among the increments are floored at 1e-3
// times the smallest nonzero one-step move and counted.
PartitionTable build_partition_table(std::span<const double> logp,
                                     std::span<const double> qs,
                                     std::span<const int> ns);

// Single entry of the table above.
double partition_function(std::span<const double> logp, int n, double q);

struct ScalingFit {
  double tau1 = 0.0;  // coefficient on q ln n
  double tau2 = 0.0;  // coefficient on q^2 ln n
  std::vector<std::pair<double, double>> intercepts;  // (q, per-q intercept)
  double rss = 0.0;
};

// Pooled OLS of ln S(q, n) + ln n on per-q intercepts, q ln n and q^2 ln n.
// Needs >= 2 moments and >= 3 scales; rows enter in a fixed canonical
// order so grid permutations cannot change the result.
ScalingFit scaling_regression(const PartitionTable& table);

struct SpectrumSummary {
  double H = 0.0;
  double lambda = 0.0;
  double alpha0 = 0.0;      // spectrum peak location
  double alpha1 = 0.0;      // Legendre slope at the unit-root moment
  double alpha_min = 0.0;   // support of the fitted spectrum
  double alpha_max = 0.0;
  double q_star = 0.0;      // moment where the scaling exponent crosses zero
};

// Recovers (H, lambda) from the quadratic scaling exponent
// tau(q) = -1 + tau1 q + tau2 q^2.  H solves tau(1/H) = 0; written as
// H = (tau1 + sqrt(tau1^2 + 4 tau2)) / 2 it is exact at tau2 = 0 and
// stable for tau2 of either sign.  Throws EstimationError when tau1 <= 0
// or tau1^2 + 4 tau2 <= 0 (no admissible root).
SpectrumSummary spectrum_from_tau(double tau1, double tau2);
SpectrumSummary spectrum_from_fit(const ScalingFit& fit);

// Fitted spectrum f(alpha) = 1 + (alpha - tau1)^2 / (4 tau2) sampled at
// `alphas`; for tau2 >= 0 the parabola degenerates to the point (tau1, 1).
std::vector<std::pair<double, double>> spectrum_curve(
    const ScalingFit& fit, std::span<const double> alphas);
// Default sampling: 201 points across [alpha_min, alpha_max].
std::vector<std::pair<double, double>> spectrum_curve(const ScalingFit& fit);

// Default grids: moments 0.5, 1.0, ..., 5.0; scales log-spaced between 2
// and max(T/20, 4) with 15 targets, rounded and deduplicated.
std::vector<double> default_moment_grid();
std::vector<int> default_scale_grid(std::size_t T);

struct EstimateResult {
  SpectrumSummary spectrum;
  ScalingFit fit;
  int zero_floor_count = 0;
  std::vector<std::string> warnings;
};

// Full estimation pass on a return series: cumulate, tabulate, regress,
// invert.  Empty grids select the defaults.
EstimateResult estimate(const LogReturnSeries& returns,
                        std::span<const double> qs = {},
                        std::span<const int> ns = {});

}  // namespace mmar
