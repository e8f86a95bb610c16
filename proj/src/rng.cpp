// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0

#include "dpsharp/rng.hpp"

#include <cmath>

namespace dpsharp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kKeyBump0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kKeyBump1 = 0xBB67AE85u;  // sqrt(3) - 1

inline std::array<std::uint32_t, 4> philox_round(
    const std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
          static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
          static_cast<std::uint32_t>(p0)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    counter = philox_round(counter, key);
    key[0] += kKeyBump0;
    key[1] += kKeyBump1;
  }
  return counter;
}

RngStream::RngStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t step)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      // purpose in the top 4 bits, high step bits below; steps < 2^60.
      purpose_word_((static_cast<std::uint32_t>(purpose) << 28) |
                    (static_cast<std::uint32_t>(step >> 32) & 0x0FFFFFFFu)),
      step_word_(static_cast<std::uint32_t>(step)) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
      step_word_, purpose_word_};
  block_ = philox4x32(counter, key_);
  block_pos_ = 0;
  ++index_;
}

std::uint32_t RngStream::next_u32() {
  if (block_pos_ == 4) refill();
  return block_[block_pos_++];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // Box-Muller; 1-u maps [0,1) draws onto (0,1] so the log is finite.
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_gaussian_ = r * std::sin(theta);
  has_cached_gaussian_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  // Rejection sampling over the largest multiple of n below 2^64.
  const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
  std::uint64_t x = next_u64();
  while (x < rem) x = next_u64();
  return x % n;
}

}  // namespace dpsharp
