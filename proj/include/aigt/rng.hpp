#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace aigt {

// Portable seeded generator for the sampler. The engine is std::mt19937_64,
// whose output sequence is fixed by the C++ standard; the distributions below
// are implemented here (the standard library's are not portable), so a seed
// reproduces the same draws on every conforming platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1, by rejection on the top bits.
  uint64_t uniform_index(uint64_t n);

  // Textual engine state (the standard operator<< format).
  std::string state() const;
  void set_state(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
uint64_t mix64(uint64_t x);

// Seed for the model with `num_topics` topics in a grid run from `base_seed`:
// mix64(base_seed ^ mix64(num_topics)).
uint64_t derive_seed(uint64_t base_seed, uint64_t num_topics);

}  // namespace aigt
