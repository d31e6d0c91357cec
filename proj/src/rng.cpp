#include "mmar/rng.hpp"

#include <cmath>
#include <numbers>

namespace mmar {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Fold one word into a key.  Sequential absorption keeps (a, b) and (b, a)
// on different keys.
inline std::uint64_t absorb(std::uint64_t key, std::uint64_t word) {
  return mix64((key + kGolden) ^ word);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t key) : key_(key) {
  std::uint64_t s = key;
  for (auto& w : state_) {
    s += kGolden;
    w = mix64(s);
  }
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

RandomStream::RandomStream(SeedSpec spec)
    : RandomStream(absorb(absorb(0, spec.master_seed), spec.stream_index)) {}

RandomStream RandomStream::child(
    std::initializer_list<std::uint64_t> tags) const {
  std::uint64_t k = key_;
  for (std::uint64_t t : tags) k = absorb(k, t);
  return RandomStream(k);
}

std::uint64_t RandomStream::next_u64() {  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RandomStream::next_unit() {
  // 53-bit mantissa, shifted into (0, 1] so log() is always finite.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::next_normal() {
  const double u1 = next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::next_below(std::uint64_t bound) {
  if (bound == ~0ULL) return next_u64();
  // Fixed-point multiply; bias is < (bound+1)/2^64, negligible here.
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(next_u64()) * (bound + 1);
  return static_cast<std::uint64_t>(prod >> 64);
}

}  // namespace mmar
