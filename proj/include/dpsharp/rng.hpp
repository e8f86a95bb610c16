// Copyright 2026 the dpsharp authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Reproducibility rests on a normative keying
// scheme: every stream is identified by (seed, purpose, step). Purposes
// partition the randomness so that, e.g., toggling an analysis pass can never
// shift the noise a training step sees, and two optimizers compared "under
// identical noise" consume the same realizations by construction.

#pragma once

#include <array>
#include <cstdint>

namespace dpsharp {

enum class StreamPurpose : std::uint32_t {
  kInit = 0,      // weight init, dataset synthesis, splits
  kSample = 1,    // minibatch sampling
  kNoise = 2,     // privacy noise
  kAnalysis = 3,  // power-iteration starts, surface directions
};

// Philox4x32-10 block function: 4x32-bit counter, 2x32-bit key, 10 rounds.
// Stateless; a "stream" is just a counter schedule over this function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// A deterministic stream of draws for one (seed, purpose, step) identity.
// The seed occupies the Philox key; purpose and step occupy the high counter
// words; the draw index occupies the low counter words, so streams with
// distinct identities can never collide and each stream has 2^64 draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t step);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_unit();

  // Standard normal via Box-Muller (second value cached).
  double next_gaussian();

  // Uniform integer in [0, n), n >= 1, by rejection (exactly uniform).
  std::uint64_t next_below(std::uint64_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t purpose_word_;
  std::uint32_t step_word_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;  // empty
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace dpsharp
