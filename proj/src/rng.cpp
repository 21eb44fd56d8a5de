#include "arcnet/rng.hpp"

#include <sstream>

namespace arcnet {

std::string RngStream::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::restore_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
}

uint64_t fnv1a(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {
// splitmix64 finalizer; decorrelates nearby seeds.
uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

uint64_t derive_seed(uint64_t root_seed, std::string_view name) {
  return mix(mix(root_seed) ^ fnv1a(name));
}

RngStream derive_stream(uint64_t root_seed, std::string_view name) {
  return RngStream(derive_seed(root_seed, name));
}

}  // namespace arcnet
