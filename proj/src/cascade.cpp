#include "mmar/cascade.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmar {
namespace {

void check_params(const CascadeParams& p) {
  if (!(p.lambda >= 1.0) || !std::isfinite(p.lambda))
    throw std::invalid_argument("cascade lambda must be finite and >= 1, got " +
                                std::to_string(p.lambda));
  if (p.T < 2)
    throw std::invalid_argument("cascade length must be >= 2, got " +
                                std::to_string(p.T));
}

// Product of the multipliers along each leaf's root-to-leaf path for a
// full dyadic cascade with 2^K leaves.
std::vector<double> leaf_products(int K, const MultiplierSource& source) {
  std::vector<double> prod(std::size_t{1} << K, 1.0);
  for (int k = 1; k <= K; ++k) {
    const std::size_t span = prod.size() >> k;
    const std::uint64_t cells = std::uint64_t{1} << k;
    for (std::uint64_t h = 1; h <= cells; ++h) {
      const double m = source(k, h);
      if (!std::isfinite(m) || !(m > 0.0))
        throw std::runtime_error("cascade multiplier at level " +
                                 std::to_string(k) + ", cell " +
                                 std::to_string(h) + " is not positive: " +
                                 std::to_string(m));
      const std::size_t begin = (h - 1) * span;
      for (std::size_t t = begin; t < begin + span; ++t) prod[t] *= m;
    }
  }
  return prod;
}

// Scale window [offset, offset + T) of the leaf products so it sums to T.
DeformationIncrements normalize_window(const std::vector<double>& prod,
                                       std::size_t offset, std::size_t T) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < T; ++i) total += prod[offset + i];
  if (!(total > 0.0L))
    throw std::runtime_error("cascade window has zero total mass");
  const double scale = static_cast<double>(static_cast<long double>(T) / total);
  DeformationIncrements out;
  out.values.resize(T);
  for (std::size_t i = 0; i < T; ++i) out.values[i] = prod[offset + i] * scale;
  return out;
}

int levels_for(std::size_t cells) {
  return std::bit_width(cells) - 1;  // cells is a power of two
}

}  // namespace

double multiplier_sigma(double lambda) {
  if (!(lambda >= 1.0) || !std::isfinite(lambda))
    throw std::invalid_argument("multiplier lambda must be finite and >= 1, got " +
                                std::to_string(lambda));
  return std::sqrt(2.0 * (lambda - 1.0) / std::numbers::ln2);
}

double draw_multiplier(double lambda, RandomStream& stream) {
  const double v = lambda + multiplier_sigma(lambda) * stream.next_normal();
  return std::exp2(-v);
}

MultiplierSource seeded_multiplier_source(double lambda, SeedSpec seed) {
  const RandomStream base{seed};
  return [lambda, base](int level, std::uint64_t cell) {
    RandomStream s = base.child({stream_tag::kCascadeMultiplier,
                                 static_cast<std::uint64_t>(level), cell});
    return draw_multiplier(lambda, s);
  };
}

DeformationIncrements build_cascade_dyadic_from(const CascadeParams& params,
                                                const MultiplierSource& source) {
  check_params(params);
  if (!std::has_single_bit(params.T))
    throw std::invalid_argument("dyadic cascade length must be a power of two, got " +
                                std::to_string(params.T));
  const auto prod = leaf_products(levels_for(params.T), source);
  return normalize_window(prod, 0, params.T);
}

DeformationIncrements build_cascade_dyadic(const CascadeParams& params,
                                           SeedSpec seed) {
  check_params(params);
  if (params.lambda == 1.0) {
    // Every multiplier is exactly 1/2, so the normalized increments are
    // exactly one; skip the draws (they are keyed, so nothing else shifts).
    if (!std::has_single_bit(params.T))
      throw std::invalid_argument("dyadic cascade length must be a power of two, got " +
                                  std::to_string(params.T));
    DeformationIncrements out;
    out.values.assign(params.T, 1.0);
    return out;
  }
  return build_cascade_dyadic_from(params,
                                   seeded_multiplier_source(params.lambda, seed));
}

DeformationIncrements build_cascade_from(const CascadeParams& params,
                                         const MultiplierSource& source,
                                         std::uint64_t offset) {
  check_params(params);
  const std::size_t cells = std::bit_ceil(params.T);
  if (offset + params.T > cells)
    throw std::invalid_argument("cascade window offset " + std::to_string(offset) +
                                " overruns " + std::to_string(cells) + " cells");
  const auto prod = leaf_products(levels_for(cells), source);
  return normalize_window(prod, offset, params.T);
}

DeformationIncrements build_cascade(const CascadeParams& params, SeedSpec seed) {
  check_params(params);
  if (params.lambda == 1.0) {
    DeformationIncrements out;
    out.values.assign(params.T, 1.0);
    return out;
  }
  if (std::has_single_bit(params.T))
    return build_cascade_dyadic(params, seed);
  const std::size_t cells = std::bit_ceil(params.T);
  RandomStream offset_stream =
      RandomStream{seed}.child({stream_tag::kCascadeOffset});
  const std::uint64_t offset = offset_stream.next_below(cells - params.T);
  return build_cascade_from(params, seeded_multiplier_source(params.lambda, seed),
                            offset);
}

}  // namespace mmar
