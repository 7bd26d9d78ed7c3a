#include "aigt/rng.hpp"

#include <bit>
#include <sstream>

#include "aigt/error.hpp"

namespace aigt {

uint64_t Rng::uniform_index(uint64_t n) {
  if (n <= 1) return 0;
  const int shift = std::countl_zero(n - 1);
  for (;;) {
    const uint64_t candidate = engine_() >> shift;
    if (candidate < n) return candidate;
  }
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  std::mt19937_64 engine;
  in >> engine;
  if (in.fail()) throw Error(ErrorKind::kCorrupt, "invalid generator state", "rng_state");
  engine_ = engine;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base_seed, uint64_t num_topics) {
  return mix64(base_seed ^ mix64(num_topics));
}

}  // namespace aigt
