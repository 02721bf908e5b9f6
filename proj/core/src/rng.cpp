#include "tailscore/rng.hpp"

namespace tailscore {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return mix64(state);
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c)
    : key_{seed, a, b, c} {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t k : key_) h = mix64(h ^ mix64(k + 0x9e3779b97f4a7c15ULL));
  std::uint64_t state = h;
  for (auto& word : s_) word = splitmix_next(state);
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

Stream::result_type Stream::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Stream::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() { return normal_(*this); }

Stream Stream::substream(std::uint64_t index) const {
  return Stream(mix64(key_[0] ^ 0xa0761d6478bd642fULL), mix64(key_[1] + index),
                mix64(key_[2] ^ index), key_[3] + 1);
}

}  // namespace tailscore
