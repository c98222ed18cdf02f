#pragma once

#include <cstdint>
#include <initializer_list>

namespace ssx {

// Deterministic, platform-independent random stream (xoshiro256** seeded via
// splitmix64). std::uniform_real_distribution is implementation-defined, so
// uniform doubles are built directly from the top 53 bits.
//
// Child streams are derived by hashing (seed, path...) rather than by
// consuming the parent, so per-sample generation is independent of batch
// scheduling: stream(seed, epoch, sample) is the same no matter how the
// epoch is partitioned.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal (Box-Muller)
  std::uint64_t below(std::uint64_t n);  // [0, n), unbiased

  // Independent child stream; same (parent seed, key) -> same stream.
  Rng split(std::uint64_t key) const;

  static Rng derive(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> path);

 private:
  std::uint64_t state_[4];
  std::uint64_t origin_;
};

}  // namespace ssx
