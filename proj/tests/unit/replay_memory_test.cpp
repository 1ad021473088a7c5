#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "qpass/replay_memory.hpp"

using namespace qpass;

namespace {

Experience exp_with(int a) {
  Experience e;
  e.s = sha256(std::to_string(a));
  e.a = a;
  return e;
}

}  // namespace

TEST(Replay, NotReadyBelowMinFill) {
  ReplayMemory m(10, 4);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 3; ++i) m.insert(exp_with(i));
  EXPECT_FALSE(m.sample(2, rng));
  m.insert(exp_with(3));
  EXPECT_TRUE(m.sample(2, rng));
  EXPECT_FALSE(m.sample(5, rng));
}

TEST(Replay, EvictsOldestAtCapacity) {
  ReplayMemory m(3, 1);
  for (int i = 0; i < 5; ++i) m.insert(exp_with(i));
  EXPECT_EQ(m.size(), 3u);
  const auto c = m.contents();
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].a, 2);
  EXPECT_EQ(c[2].a, 4);
}

TEST(Replay, BatchHasNoRepeats) {
  ReplayMemory m(50, 1);
  for (int i = 0; i < 50; ++i) m.insert(exp_with(i));
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto idx = *m.sample_indices(20, rng);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 20u);
  }
}

TEST(Replay, SamplingIsUniform) {
  // Each slot should appear with probability batch/size; chi-square over 10 slots.
  const int n = 10, batch = 3, trials = 20000;
  ReplayMemory m(n, 1);
  for (int i = 0; i < n; ++i) m.insert(exp_with(i));
  std::mt19937_64 rng(3);
  std::vector<double> counts(n, 0.0);
  for (int t = 0; t < trials; ++t) {
    const auto picked = m.sample_indices(batch, rng);
    ASSERT_TRUE(picked);
    for (auto i : *picked) counts[i] += 1.0;
  }
  const double expected = static_cast<double>(trials) * batch / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.88);  // 99.9th percentile of chi-square with 9 dof
}

TEST(Replay, ConcurrentInsertAndSample) {
  ReplayMemory m(1000, 10);
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int i = 0; i < 5000; ++i) m.insert(exp_with(i));
    done = true;
  });
  std::mt19937_64 rng(1);
  int sampled = 0;
  while (!done)
    if (auto b = m.sample(8, rng)) {
      EXPECT_EQ(b->size(), 8u);
      ++sampled;
    }
  writer.join();
  EXPECT_EQ(m.size(), 1000u);
}
