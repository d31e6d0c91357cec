#pragma once
// Deterministic keyed random streams for Monte Carlo replication.
//
// A stream is identified by (master_seed, stream_index) plus an optional
// chain of tag words.  The same key always yields the same sequence,
// regardless of thread count, draw order elsewhere, or platform.  Derived
// (child) streams depend only on the parent's key and the tags, never on
// how much has already been drawn from the parent, so any draw site can be
// replayed in isolation.

#include <array>
#include <cstdint>
#include <initializer_list>

namespace mmar {

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

class RandomStream {
 public:
  explicit RandomStream(SeedSpec spec);

  // Independent substream keyed by this stream's identity plus `tags`.
  RandomStream child(std::initializer_list<std::uint64_t> tags) const;

  std::uint64_t next_u64();
  double next_unit();    // uniform on (0, 1]
  double next_normal();  // standard normal; consumes exactly two words
  // Uniform integer on {0, 1, ..., bound} (inclusive).
  std::uint64_t next_below(std::uint64_t bound);

 private:
  explicit RandomStream(std::uint64_t key);

  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_;
};

// Purpose tags for derived substreams.  The values are part of the
// reproducibility contract: changing one changes every simulated sequence.
namespace stream_tag {
inline constexpr std::uint64_t kCascadeMultiplier = 0xC1;
inline constexpr std::uint64_t kCascadeOffset = 0xC2;
inline constexpr std::uint64_t kInnovations = 0xC3;
}  // namespace stream_tag

}  // namespace mmar
