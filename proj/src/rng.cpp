// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "cmbrl/errors.hpp"

namespace cmbrl {

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ContractViolation("Rng::below: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  // 2^64 mod n; draws in the final partial block are rejected
  const std::uint64_t rem = (max % bound + 1) % bound;
  std::uint64_t x = engine_();
  while (rem != 0 && x > max - rem) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) throw ContractViolation("cannot draw more distinct indices than exist");
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> taken;
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = rng.below(j + 1);
    const std::size_t pick = taken.count(t) ? j : t;
    taken.insert(pick);
    out.push_back(pick);
  }
  return out;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cmbrl
