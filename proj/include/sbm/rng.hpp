#pragma once

#include <cstdint>
#include <random>

namespace sbm {

// Deterministic random stream shared by event selection and modifiers.
// Draws are derived from raw mt19937_64 output rather than std
// distributions so a given seed replays the same sequence everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 significant bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n); n must be positive and small enough that the
  // 53-bit mantissa keeps every bucket reachable (true for any sane model).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sbm
