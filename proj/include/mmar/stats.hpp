#pragma once
// Small numeric helpers shared across modules.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace mmar {

double mean(std::span<const double> x);
// Sample variance (divisor n-1).
double variance(std::span<const double> x);
// Raw sample kurtosis m4 / m2^2 (around 3 for a normal sample).
double kurtosis(std::span<const double> x);
// Lag-k sample autocorrelation around the sample mean.
double autocorrelation(std::span<const double> x, std::size_t lag);

// Smallest index k (1-based) with k >= u*n, clamped to [1, n]; a small
// tolerance keeps lattice points such as u*n = 5 from rounding up.
std::size_t quantile_index(double u, std::size_t n);
// u-quantile of a sorted ascending sample, by the convention above.
double sorted_quantile(std::span<const double> sorted, double u);

// Inverse standard normal CDF (Acklam's rational approximation,
// |relative error| < 1.2e-9).
double normal_quantile(double p);
// Two-sided critical value for Student's t at significance alpha:
// P(|T| > value) = alpha.  Asymptotic expansion in 1/df, intended for
// df >= 50 where it is accurate to ~1e-6.
double student_t_two_sided(double alpha, double df);

// FNV-1a 64-bit hash, used for cache fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mmar
