#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace arcnet {

// Named, independently seeded random stream. All draws are implemented by
// hand on top of the mt19937_64 engine so results do not depend on the
// standard library's distribution internals.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(engine_() % span);
  }

  uint64_t next_raw() { return engine_(); }

  std::string save_state() const;
  void restore_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a, used both for stream derivation and config fingerprints.
uint64_t fnv1a(std::string_view data);

// Derives an independent stream from a root seed and a stream name.
RngStream derive_stream(uint64_t root_seed, std::string_view name);

// Derived seed value (for seeding torch or nested derivations).
uint64_t derive_seed(uint64_t root_seed, std::string_view name);

}  // namespace arcnet
