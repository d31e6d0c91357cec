#pragma once
// Multiplicative lognormal cascade generating the trading-time increments
// that deform clock time.  Mass on a dyadic grid is split recursively by
// random multipliers m = 2^(-V), V ~ Normal(lambda, 2(lambda-1)/ln 2), so
// lambda = 1 collapses to m = 1/2 exactly and the increments are all ones.
// For lengths that are not a power of two, a full dyadic cascade of the
// next size up is built and a uniformly chosen contiguous window of the
// requested length is cut out and renormalized.

#include <cstdint>
#include <functional>

#include "mmar/rng.hpp"
#include "mmar/series.hpp"

namespace mmar {

struct CascadeParams {
  double lambda = 1.0;  // intermittency; >= 1
  std::size_t T = 0;    // number of increments; >= 2
};

struct DeformationIncrements {
  std::vector<double> values;  // positive, sum = T
};

// Standard deviation of V: sqrt(2 (lambda - 1) / ln 2).
double multiplier_sigma(double lambda);

// One multiplier draw; consumes exactly one normal from `stream`.
double draw_multiplier(double lambda, RandomStream& stream);

// Multiplier for the split at depth `level` (1-based), cell `h` in
// {1, ..., 2^level}.  Lets tests replay or stub individual draws.
using MultiplierSource =
    std::function<double(int level, std::uint64_t cell)>;

// The default source: one keyed substream per (level, cell).
MultiplierSource seeded_multiplier_source(double lambda, SeedSpec seed);

// T must be a power of two.
DeformationIncrements build_cascade_dyadic(const CascadeParams& params,
                                           SeedSpec seed);
DeformationIncrements build_cascade_dyadic_from(const CascadeParams& params,
                                                const MultiplierSource& source);

// Any T >= 2; dispatches to the dyadic builder when T is a power of two,
// otherwise windows a cascade of the next power of two.
DeformationIncrements build_cascade(const CascadeParams& params, SeedSpec seed);
// Same, with the window offset supplied by the caller (must satisfy
// offset + T <= 2^ceil(log2 T)).
DeformationIncrements build_cascade_from(const CascadeParams& params,
                                         const MultiplierSource& source,
                                         std::uint64_t offset);

}  // namespace mmar
