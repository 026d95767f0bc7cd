#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "fedstale/csv.hpp"
#include "fedstale/rng.hpp"
#include "fedstale/statistics.hpp"
#include "fedstale/thread_pool.hpp"
#include "test_support.hpp"

namespace fedstale {
namespace {

TEST(CounterRng, SameKeySameStream) {
  CounterRng a(42, StreamTag::kParticipation, {3, 7});
  CounterRng b(42, StreamTag::kParticipation, {3, 7});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(CounterRng, PathAndTagSeparateStreams) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 50; ++i) {
    firsts.insert(CounterRng(1, StreamTag::kParticipation, {i, 1})());
    firsts.insert(CounterRng(1, StreamTag::kLocalTraining, {i, 1})());
  }
  EXPECT_EQ(firsts.size(), 100u);
  EXPECT_NE(derive_key(1, {1, 2}), derive_key(1, {2, 1}));
}

TEST(CounterRng, UniformMomentsAndRange) {
  CounterRng rng(9, {0});
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(11, {0});
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(CounterRng, BelowIsUniform) {
  CounterRng rng(5, {0});
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[rng.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Csv, AtomicWriteLeavesNoPartial) {
  testing::TempDir dir;
  write_text_atomic(dir / "a.txt", "hello\n");
  EXPECT_EQ(read_text(dir / "a.txt"), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.partial"));
}

TEST(Csv, SplitTrimmed) {
  const auto parts = split_trimmed(" a , b,c ", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0], "a");
  EXPECT_EQ(parts[2], "c");
}

TEST(Statistics, MeanAndStandardError) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_NEAR(standard_error(v), std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(standard_error(std::vector<double>{3.0}), 0.0);
}

TEST(Statistics, SpearmanHandlesTiesAndConstants) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_NEAR(spearman(x, std::vector<double>{10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, std::vector<double>{4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_EQ(spearman(x, std::vector<double>{5, 5, 5, 5}), 0.0);
  // Ranks of y: 1.5, 1.5, 3, 4. Pearson of (1,2,3,4) with those ranks.
  const double r = spearman(x, std::vector<double>{0, 0, 1, 2});
  EXPECT_NEAR(r, 4.5 / std::sqrt(5.0 * 4.5), 1e-12);
}

TEST(ThreadPool, RunsEveryIndexOnce) {
  for (std::size_t threads : {1u, 3u, 8u}) {
    ThreadPool pool(threads);
    std::vector<std::atomic<int>> hits(1000);
    pool.parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ThreadPool, RethrowsLowestFailingIndex) {
  ThreadPool pool(4);
  try {
    pool.parallel_for(100, [](std::size_t i) {
      if (i % 10 == 7) throw std::runtime_error(std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "7");
  }
  // The pool stays usable afterwards.
  std::atomic<int> n{0};
  pool.parallel_for(10, [&](std::size_t) { n++; });
  EXPECT_EQ(n.load(), 10);
}

}  // namespace
}  // namespace fedstale
