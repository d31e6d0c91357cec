#include "mmar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mmar {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  long double acc = 0.0L;
  for (double v : x) acc += v;
  return static_cast<double>(acc / x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance needs >= 2 points");
  const double m = mean(x);
  long double acc = 0.0L;
  for (double v : x) acc += (v - m) * (v - m);
  return static_cast<double>(acc / (x.size() - 1));
}

double kurtosis(std::span<const double> x) {
  if (x.size() < 4) throw std::invalid_argument("kurtosis needs >= 4 points");
  const double m = mean(x);
  long double m2 = 0.0L, m4 = 0.0L;
  for (double v : x) {
    const double d = v - m;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= x.size();
  m4 /= x.size();
  if (m2 == 0.0L) throw std::invalid_argument("kurtosis of constant sample");
  return static_cast<double>(m4 / (m2 * m2));
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
  if (x.size() <= lag + 1)
    throw std::invalid_argument("autocorrelation lag " + std::to_string(lag) +
                                " too large for sample of size " +
                                std::to_string(x.size()));
  const double m = mean(x);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double d = x[t] - m;
    den += d * d;
    if (t + lag < x.size()) num += d * (x[t + lag] - m);
  }
  if (den == 0.0L) throw std::invalid_argument("autocorrelation of constant sample");
  return static_cast<double>(num / den);
}

std::size_t quantile_index(double u, std::size_t n) {
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  const double k = std::ceil(u * static_cast<double>(n) - 1e-7);
  if (k <= 1.0) return 1;
  if (k >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(k);
}

double sorted_quantile(std::span<const double> sorted, double u) {
  return sorted[quantile_index(u, sorted.size()) - 1];
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile needs p in (0,1), got " +
                                std::to_string(p));
  // Acklam's rational approximation in three regions.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double student_t_two_sided(double alpha, double df) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("significance level must lie in (0,1)");
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double z3 = z * z * z, z5 = z3 * z * z, z7 = z5 * z * z;
  // Cornish-Fisher style expansion of the t quantile around the normal one.
  const double g1 = (z3 + z) / 4.0;
  const double g2 = (5.0 * z5 + 16.0 * z3 + 3.0 * z) / 96.0;
  const double g3 = (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / 384.0;
  return z + g1 / df + g2 / (df * df) + g3 / (df * df * df);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mmar
