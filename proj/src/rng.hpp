// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace mgmc {

/// Counter-based PRNG (Philox 4x32-10).
///
/// A (seed, stream) pair selects an independent substream; every draw is a
/// pure function of (seed, stream, counter), so parallel Monte Carlo trials
/// replay bit-identically regardless of worker scheduling.
class Philox {
 public:
  Philox() = default;
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53-bit resolution.
  double next_double();

  /// Standard normal via Box-Muller (pairs cached).
  double next_gaussian();

  /// Circularly-symmetric complex normal, E|z|^2 = 1.
  std::complex<double> next_cnormal();

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::uint64_t stream_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  double gauss_spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mgmc
