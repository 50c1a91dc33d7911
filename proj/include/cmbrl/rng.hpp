// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace cmbrl {

/// Deterministic pseudo-random stream used everywhere in the project.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation defined, so every
/// derived quantity is computed here with a documented recipe:
///
///   uniform()   one engine draw x, returns (x >> 11) * 2^-53, in [0, 1)
///   below(n)    rejection sampling on raw draws: reject x >= 2^64 - (2^64 % n),
///               return x % n; one draw unless rejected
///   normal()    Box-Muller on two uniform() draws (u1, u2),
///               sqrt(-2 ln(1 - u1)) * cos(2 pi u2); no cached second value
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::size_t below(std::size_t n);

  double normal();

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// `count` distinct indices from [0, n), every subset equally likely
/// (Floyd's algorithm, one below() call per index). Requires count <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng);

/// Uniform random permutation of [0, n) (Fisher-Yates, n - 1 below() calls).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

/// SplitMix64 finalizer; maps (base, stream) to a well-mixed child seed so
/// that independent components can be seeded from one experiment seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace cmbrl
