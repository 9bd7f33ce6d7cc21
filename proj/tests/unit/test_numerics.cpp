#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "actc/error.hpp"
#include "actc/kernels.hpp"
#include "actc/parallel.hpp"
#include "actc/rng.hpp"
#include "actc/tensor.hpp"
#include "actc/tensor_io.hpp"
#include "oracles.hpp"

namespace actc {
namespace {

using Block = std::array<std::uint32_t, 4>;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerOnes) {
  const std::uint32_t f = 0xffffffffu;
  EXPECT_EQ(philox4x32_10({f, f, f, f}, {f, f}), (Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPi) {
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, SameQueryTwiceIsIdentical) {
  const StreamKey k{42, 7};
  for (std::uint64_t c = 0; c < 100; ++c) EXPECT_EQ(counter_rng(k, c), counter_rng(k, c));
}

TEST(CounterRng, ValuesInUnitInterval) {
  const StreamKey k{3, 1};
  for (std::uint64_t c = 0; c < 10000; ++c) {
    const double u = counter_rng(k, c);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(CounterRng, StreamsAreUncorrelated) {
  const std::size_t n = 100000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = counter_rng({9, 0}, i);
    b[i] = counter_rng({9, 1}, i);
  }
  EXPECT_LT(std::abs(testing::pearson(a, b)), 0.01);
}

TEST(CounterRng, MeanOfOneStream) {
  double s = 0.0;
  for (std::uint64_t c = 0; c < 100000; ++c) s += counter_rng({5, 2}, c);
  EXPECT_NEAR(s / 1e5, 0.5, 0.005);
}

TEST(CounterRng, NormalMoments) {
  double s = 0.0, s2 = 0.0;
  const std::size_t n = 100000;
  for (std::uint64_t c = 0; c < n; ++c) {
    const double z = counter_normal({1, 1}, c);
    s += z;
    s2 += z * z;
  }
  // 4σ bounds for the sample mean and second moment of N(0, 1).
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(double(n)));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / double(n)));
}

TEST(DeriveSeed, DistinctIndicesGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(17, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Tensor, SinglePrecisionRoundsOnStore) {
  Tensor t = Tensor::vector({0.1, 1.0 / 3.0});
  EXPECT_EQ(t[0], static_cast<double>(0.1f));
  EXPECT_EQ(t[1], static_cast<double>(1.0f / 3.0f));
  Tensor d = Tensor::vector({0.1}, Precision::dbl);
  EXPECT_EQ(d[0], 0.1);
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW((void)Tensor::vector({1, 2}).reshaped({3}), ShapeError);
}

TEST(Tensor, RequireFinite) {
  Tensor t = Tensor::vector({1.0, std::nan("")}, Precision::dbl);
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("t"), NumericError);
}

TEST(Matmul, IdentityLeavesInputUnchanged) {
  const Tensor x = testing::random_tensor({2, 5}, 1);
  EXPECT_EQ(matmul(identity(2, Precision::dbl), x), x);
}

TEST(Matmul, SmallHandCase) {
  const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4}, Precision::dbl);
  const Tensor b = Tensor::matrix(2, 1, {1, 1}, Precision::dbl);
  EXPECT_EQ(matmul(a, b), Tensor::matrix(2, 1, {3, 7}, Precision::dbl));
}

TEST(Matmul, MatchesTripleLoop) {
  const Tensor a = testing::random_tensor({5, 7}, 2), b = testing::random_tensor({7, 3}, 3);
  EXPECT_LT(testing::max_abs_diff(matmul(a, b), testing::naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, TransposedVariantsMatchOracle) {
  const Tensor a = testing::random_tensor({6, 4}, 4), b = testing::random_tensor({6, 3}, 5);
  Tensor at({4, 6}, Precision::dbl);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) at.at(j, i) = a.at(i, j);
  EXPECT_LT(testing::max_abs_diff(matmul_tn(a, b), testing::naive_matmul(at, b)), 1e-12);
  EXPECT_LT(testing::max_abs_diff(matmul_nt(a, a), testing::naive_matmul(a, at)), 1e-12);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  EXPECT_THROW((void)matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(GroupMinmax, TwoGroups) {
  const GroupStats s = group_minmax(Tensor::vector({1, 2, 3, 4}), 2);
  EXPECT_EQ(s.mins, (std::vector<double>{1, 3}));
  EXPECT_EQ(s.ranges, (std::vector<double>{1, 1}));
}

TEST(GroupMinmax, ConstantTensorHasZeroRanges) {
  const GroupStats s = group_minmax(Tensor::full({10}, 2.5), 4);
  for (double r : s.ranges) EXPECT_EQ(r, 0.0);
}

TEST(GroupMinmax, ShortLastGroup) {
  const GroupStats s = group_minmax(Tensor::vector({5, 1, 2, 9, 7}), 2);
  ASSERT_EQ(s.mins.size(), 3u);
  EXPECT_EQ(s.mins[2], 7.0);
  EXPECT_EQ(s.ranges[2], 0.0);
  EXPECT_EQ(num_groups(5, 2), 3u);
}

TEST(GroupMinmax, RejectsBadArguments) {
  EXPECT_THROW((void)group_minmax(Tensor::vector({1, 2}), 1), InvalidArgument);
  EXPECT_THROW((void)group_minmax(Tensor(), 2), ShapeError);
}

TEST(GroupMinmax, RangesAreNonNegativeProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = testing::random_tensor({97}, seed, 3.0);
    const GroupStats s = group_minmax(x, 8);
    for (std::size_t g = 0; g < s.mins.size(); ++g) {
      EXPECT_GE(s.ranges[g], 0.0);
      double mx = s.mins[g];
      for (std::size_t j = g * 8; j < std::min<std::size_t>(97, g * 8 + 8); ++j) {
        EXPECT_GE(x[j], s.mins[g]);
        mx = std::max(mx, x[j]);
      }
      EXPECT_EQ(s.ranges[g], mx - s.mins[g]);
      // min + (max − min) may round one ulp below max.
      EXPECT_LE(mx, s.mins[g] + s.ranges[g] + 4e-16 * (std::abs(s.mins[g]) + s.ranges[g]));
    }
  }
}

TEST(TensorIo, RoundTripBothPrecisions) {
  for (Precision p : {Precision::single, Precision::dbl}) {
    const Tensor t = testing::random_tensor({3, 4}, 8, 1.0, p);
    std::stringstream ss;
    write_tensor(ss, t);
    const Tensor back = read_tensor(ss);
    EXPECT_EQ(back, t);
    EXPECT_EQ(back.precision(), p);
  }
}

TEST(TensorIo, BadMagicIsRejected) {
  std::stringstream ss("XXXX garbage");
  EXPECT_THROW((void)read_tensor(ss), FormatError);
}

TEST(TensorIo, TruncatedStreamIsRejected) {
  std::stringstream ss;
  write_tensor(ss, testing::random_tensor({16}, 1));
  std::string s = ss.str();
  s.resize(s.size() - 5);
  std::stringstream cut(s);
  EXPECT_THROW((void)read_tensor(cut), FormatError);
}

TEST(Checksum, SensitiveToContent) {
  const Tensor a = Tensor::vector({1, 2, 3}), b = Tensor::vector({1, 2, 4});
  EXPECT_EQ(checksum(a.data()), checksum(Tensor::vector({1, 2, 3}).data()));
  EXPECT_NE(checksum(a.data()), checksum(b.data()));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw InvalidArgument("boom");
               }),
               InvalidArgument);
}

TEST(ParallelFor, ThreadBudgetHonoursEnvironment) {
  ::setenv("ACTC_THREADS", "1", 1);
  EXPECT_EQ(thread_budget(), 1u);
  ::unsetenv("ACTC_THREADS");
  EXPECT_GE(thread_budget(), 1u);
}

}  // namespace
}  // namespace actc
