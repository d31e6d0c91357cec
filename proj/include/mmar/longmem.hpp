#pragma once
// Compound process: Gaussian innovations with cascade-deformed variance,
// passed through a truncated fractional-integration moving average so the
// increments of the compounded log price carry long memory with exponent
// H = d + 1/2.

#include <span>
#include <utility>
#include <vector>

#include "mmar/cascade.hpp"
#include "mmar/rng.hpp"
#include "mmar/series.hpp"

namespace mmar {

struct MmarParams {
  double H = 0.5;       // self-affinity exponent, in (0, 1)
  double lambda = 1.0;  // cascade intermittency, >= 1
  std::size_t T = 0;    // output length, >= 2
};

struct MaWeights {
  double d = 0.0;               // fractional differencing order, in (-1/2, 1/2)
  std::vector<double> weights;  // psi_0 = 1, psi_j recursively
};

// Truncation horizon of the moving average (and burn-in length).
inline constexpr int kDefaultTruncation = 1000;

// psi_0 = 1, psi_j = psi_{j-1} (d + j - 1) / j for j = 1..J.
// d = 0 makes every weight beyond psi_0 exactly zero (identity filter).
MaWeights ma_weights(double d, int J);

// Simulated log-return path of length params.T.  Draws T + J innovations
// and a cascade of length T + J from substreams of `seed`, filters, and
// drops the first J outputs so every retained value sees a full window.
// The innovation draws do not depend on H: runs with equal (lambda, T,
// seed) but different H consume identical innovation and cascade draws.
LogReturnSeries simulate_mmar(const MmarParams& params, SeedSpec seed,
                              int truncation = kDefaultTruncation);

// Sample variance of non-overlapping n-period sums for each scale n.
// Returns (n, variance) pairs in the order given.
std::vector<std::pair<int, double>> variance_scaling(
    const LogReturnSeries& returns, std::span<const int> scales);

}  // namespace mmar
