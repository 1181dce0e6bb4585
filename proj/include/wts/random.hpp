// SPDX-License-Identifier: Apache-2.0
#pragma once

// All randomness in the library is drawn from a 64-bit Mersenne Twister
// (std::mt19937_64, whose output stream is fixed by the C++ standard).
// Uniform doubles take the top 53 bits of one draw, so uniform streams are
// reproducible across standard libraries; Gaussian and Gamma draws go
// through libstdc++/libc++ distributions and are only reproducible within
// one implementation.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "wts/error.hpp"

namespace wts {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Beta(alpha, beta) via the ratio of two Gamma variates. Resamples the
/// (measure-zero, but floating-point reachable) endpoints so the result is
/// strictly inside (0, 1).
inline double sample_beta(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("sample_beta: alpha and beta must be positive");
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    const double v = x / (x + y);
    if (v > 0.0 && v < 1.0) return v;
  }
}

/// Fisher-Yates shuffle driven by uniform_index, so permutations are the
/// same on every standard library.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace wts
