#include "mmar/longmem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mmar/stats.hpp"

namespace mmar {

MaWeights ma_weights(double d, int J) {
  if (!(d > -0.5 && d < 0.5))
    throw std::invalid_argument("fractional order d must lie in (-1/2, 1/2), got " +
                                std::to_string(d));
  if (J < 1)
    throw std::invalid_argument("truncation horizon must be >= 1, got " +
                                std::to_string(J));
  MaWeights w;
  w.d = d;
  w.weights.resize(static_cast<std::size_t>(J) + 1);
  w.weights[0] = 1.0;
  for (int j = 1; j <= J; ++j)
    w.weights[j] = w.weights[j - 1] * (d + j - 1) / j;
  return w;
}

LogReturnSeries simulate_mmar(const MmarParams& params, SeedSpec seed,
                              int truncation) {
  if (!(params.H > 0.0 && params.H < 1.0))
    throw std::invalid_argument("H must lie in (0, 1), got " +
                                std::to_string(params.H));
  if (params.T < 2)
    throw std::invalid_argument("simulation length must be >= 2, got " +
                                std::to_string(params.T));
  const auto ma = ma_weights(params.H - 0.5, truncation);
  // Trailing exact zeros (the d = 0 case) contribute nothing; skip them in
  // the convolution but keep the draw count independent of H.
  std::size_t taps = ma.weights.size();
  while (taps > 1 && ma.weights[taps - 1] == 0.0) --taps;

  const std::size_t total = params.T + static_cast<std::size_t>(truncation);
  const auto theta = build_cascade({params.lambda, total}, seed);
  RandomStream innov = RandomStream{seed}.child({stream_tag::kInnovations});
  std::vector<double> u(total);
  for (std::size_t t = 0; t < total; ++t)
    u[t] = std::sqrt(theta.values[t]) * innov.next_normal();

  LogReturnSeries out;
  out.origin = SeriesOrigin::kSimulated;
  out.values.resize(params.T);
  const std::size_t burn = static_cast<std::size_t>(truncation);
  for (std::size_t t = 0; t < params.T; ++t) {
    const std::size_t g = burn + t;
    double acc = 0.0;
    for (std::size_t j = 0; j < taps; ++j) acc += ma.weights[j] * u[g - j];
    out.values[t] = acc;
  }
  return out;
}

std::vector<std::pair<int, double>> variance_scaling(
    const LogReturnSeries& returns, std::span<const int> scales) {
  const std::size_t T = returns.values.size();
  std::vector<std::pair<int, double>> out;
  out.reserve(scales.size());
  for (int n : scales) {
    if (n < 1)
      throw std::invalid_argument("aggregation scale must be >= 1, got " +
                                  std::to_string(n));
    const std::size_t blocks = T / static_cast<std::size_t>(n);
    if (blocks < 2)
      throw std::invalid_argument("scale " + std::to_string(n) +
                                  " leaves fewer than 2 blocks in a series of length " +
                                  std::to_string(T));
    std::vector<double> sums(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += returns.values[b * n + k];
      sums[b] = s;
    }
    out.emplace_back(n, variance(sums));
  }
  return out;
}

}  // namespace mmar
