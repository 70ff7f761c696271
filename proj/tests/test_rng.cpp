#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <thread>

#include "modewise/parallel.hpp"
#include "modewise/rng.hpp"

using namespace modewise;

TEST(Rng, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(42, 1), derive_seed(42, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m) {
    for (std::uint64_t s = 0; s < 20; ++s) seen.insert(derive_seed(m, s));
  }
  EXPECT_EQ(seen.size(), 400u);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, UniformStaysInRangeWithSaneMean) {
  Rng rng(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 0.05 * n / 7.0);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Parallel, ResultsIndependentOfJobs) {
  auto fn = [](std::size_t i) { return static_cast<int>(i * i); };
  const auto one = parallel_map<int>(100, 1, fn);
  const auto four = parallel_map<int>(100, 4, fn);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one[9], 81);
}

TEST(Parallel, RethrowsTaskErrors) {
  auto fn = [](std::size_t i) -> int {
    if (i == 5) throw std::runtime_error("boom");
    return 0;
  };
  EXPECT_THROW(parallel_map<int>(10, 3, fn), std::runtime_error);
  EXPECT_THROW(parallel_map<int>(10, 1, fn), std::runtime_error);
}
