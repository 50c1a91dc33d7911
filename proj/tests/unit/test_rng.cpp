// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cmbrl/errors.hpp"
#include "cmbrl/rng.hpp"
#include "doctest.h"

using namespace cmbrl;

TEST_CASE("uniform matches an independent MT19937-64 with 53-bit mantissa conversion") {
  // first five outputs of mt19937_64(42) >> 11 scaled by 2^-53, computed in Python
  Rng rng(42);
  const double expected[] = {0.755155532954539, 0.6390313938546974, 0.7521452007480266, 0.13627268363243705,
                             0.9032689664283783};
  for (double e : expected) CHECK(rng.uniform() == e);
}

TEST_CASE("raw draw for seed 42") {
  Rng rng(42);
  CHECK(rng.next_u64() == 13930160852258120406ULL);
}

TEST_CASE("below stays in range and is roughly uniform") {
  Rng rng(3);
  std::map<std::size_t, int> counts;
  for (int i = 0; i < 60000; ++i) {
    const auto v = rng.below(6);
    REQUIRE(v < 6);
    ++counts[v];
  }
  for (const auto& [v, c] : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS_AS(rng.below(0), ContractViolation);
}

TEST_CASE("normal has unit moments") {
  Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement gives distinct indices with uniform marginals") {
  Rng rng(5);
  std::vector<int> hits(10, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto idx = sample_without_replacement(10, 3, rng);
    REQUIRE(idx.size() == 3);
    REQUIRE(std::set<std::size_t>(idx.begin(), idx.end()).size() == 3);
    for (auto i : idx) ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h - 6000) < 300);
  CHECK(sample_without_replacement(4, 4, rng).size() == 4);
  CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), ContractViolation);
}

TEST_CASE("permutation is a permutation") {
  Rng rng(9);
  auto p = permutation(50, rng);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
}

TEST_CASE("derived seeds separate streams and are reproducible") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 20; ++base) {
    for (std::uint64_t s = 0; s < 20; ++s) seen.insert(derive_seed(base, s));
  }
  CHECK(seen.size() == 400);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
