#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace tailscore {

/// xoshiro256** engine whose state is derived from a key tuple, so every
/// (master seed, cell, replicate, ...) coordinate owns an independent stream.
/// Usable with any <random> distribution.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// Child stream keyed on this stream's key plus `index`. Does not advance this stream.
  Stream substream(std::uint64_t index) const;

 private:
  std::array<std::uint64_t, 4> s_{};
  std::array<std::uint64_t, 4> key_{};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace tailscore
