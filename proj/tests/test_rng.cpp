// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sinn/rng.hpp"

using sinn::Rng;

TEST_CASE("Rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff_seed = false;
  for (int i = 0; i < 256; ++i) {
    const double x = a.uniform();
    if (x != b.uniform()) all_equal = false;
    if (x != c.uniform()) any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("uniform stays in [0, 1)") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("uniform_pm respects the bound") {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform_pm(0.25);
    REQUIRE(std::abs(x) <= 0.25);
  }
}

TEST_CASE("gaussian has roughly standard moments") {
  Rng rng(3);
  const int n = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    REQUIRE(std::isfinite(x));
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("below produces values under the bound") {
  Rng rng(4);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto x = rng.below(7);
    REQUIRE(x < 7);
    ++counts[static_cast<int>(x)];
  }
  // Each bucket should be populated; this is a sanity check, not a
  // statistical test.
  for (int c : counts) CHECK(c > 500);
}

TEST_CASE("permutation is a permutation") {
  Rng rng(5);
  for (int n : {1, 2, 3, 17, 100}) {
    std::vector<int> p = rng.permutation(n);
    REQUIRE(static_cast<int>(p.size()) == n);
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(n);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
  }
  // Determinism: the same seed yields the same shuffle.
  CHECK(Rng(6).permutation(10) == Rng(6).permutation(10));
  // And a 100-element shuffle is essentially never the identity.
  std::vector<int> iota(100);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(Rng(6).permutation(100) != iota);
}
