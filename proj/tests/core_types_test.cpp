#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "parloc/core_types.hpp"
#include "parloc/synthetic.hpp"

namespace parloc {
namespace {

using synth::Rng;

std::vector<double> raw_random(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  return v;
}

TEST(L2DistanceTest, IdentityIsZero) {
  Rng rng(1);
  const auto a = synth::random_unit(16, rng);
  EXPECT_EQ(l2_distance(a, a), 0.0);
}

TEST(L2DistanceTest, OrthonormalPair) {
  const std::vector<double> e1{1, 0, 0, 0}, e2{0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(l2_distance(e1, e2), std::sqrt(2.0));
}

TEST(L2DistanceTest, MatchesScalarLoop) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto a = synth::random_unit(8, rng);
    const auto b = synth::random_unit(8, rng);
    double s = 0.0;
    for (std::size_t k = 0; k < 8; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    EXPECT_NEAR(l2_distance(a, b), std::sqrt(s), 1e-15);
  }
}

TEST(L2DistanceTest, DimensionMismatchThrows) {
  const std::vector<double> a{1, 0}, b{1, 0, 0};
  try {
    l2_distance(a, b);
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(BinarizeTest, AllPositiveGivesAllOnes) {
  const std::vector<double> v(70, 0.25);
  const BinaryDescriptor b = binarize(v);
  EXPECT_EQ(b.popcount(), 70u);
  for (std::size_t k = 0; k < 70; ++k) EXPECT_TRUE(b.bit(k));
}

TEST(BinarizeTest, ZeroMapsToOne) {
  const BinaryDescriptor b = binarize(std::vector<double>{-0.1, 0.0, 0.3, -0.2});
  EXPECT_FALSE(b.bit(0));
  EXPECT_TRUE(b.bit(1));
  EXPECT_TRUE(b.bit(2));
  EXPECT_FALSE(b.bit(3));
}

TEST(BinarizeTest, PopcountCountsNonnegativeEntries) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto v = synth::random_unit(256, rng);
    std::size_t nonneg = 0;
    for (double x : v.values()) nonneg += x >= 0.0 ? 1 : 0;
    EXPECT_EQ(binarize(v).popcount(), nonneg);
  }
}

TEST(BinarizeTest, IdempotentThroughSignReconstruction) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto v = synth::random_unit(100, rng);
    const BinaryDescriptor b = binarize(v);
    std::vector<double> pm(100);
    for (std::size_t k = 0; k < 100; ++k) pm[k] = b.bit(k) ? 1.0 : -1.0;
    EXPECT_EQ(binarize(pm), b);
  }
}

TEST(BinarizeTest, PaddingBitsStayZero) {
  const BinaryDescriptor b = binarize(std::vector<double>(65, 1.0));
  ASSERT_EQ(b.words().size(), 2u);
  EXPECT_EQ(b.words()[1], 1u);
}

TEST(HammingDistanceTest, IdentityIsZero) {
  Rng rng(5);
  const auto b = binarize(synth::random_unit(64, rng));
  EXPECT_EQ(hamming_distance(b, b), 0u);
}

TEST(HammingDistanceTest, AllOnesVersusAllZeros) {
  EXPECT_EQ(hamming_distance(binarize(std::vector<double>(8, 1.0)),
                             binarize(std::vector<double>(8, -1.0))),
            8u);
}

TEST(HammingDistanceTest, MatchesBitLoop) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto a = binarize(synth::random_unit(64, rng));
    const auto b = binarize(synth::random_unit(64, rng));
    std::size_t n = 0;
    for (std::size_t k = 0; k < 64; ++k) n += a.bit(k) != b.bit(k) ? 1 : 0;
    EXPECT_EQ(hamming_distance(a, b), n);
  }
}

TEST(WeightedHammingTest, IdentityIsZero) {
  Rng rng(7);
  const auto a = synth::random_unit(32, rng);
  EXPECT_EQ(weighted_hamming_distance(a, a), 0.0);
}

TEST(WeightedHammingTest, SameSignsGiveNoPenalty) {
  EXPECT_EQ(weighted_hamming_distance(std::vector<double>{0.6, 0.8}, std::vector<double>{0.8, 0.6}), 0.0);
}

TEST(WeightedHammingTest, HandEvaluation) {
  EXPECT_DOUBLE_EQ(
      weighted_hamming_distance(std::vector<double>{0.6, -0.8}, std::vector<double>{0.6, 0.8}), 1.6);
}

TEST(DistancePropertyTest, SymmetricNonnegativeAndBounded) {
  Rng rng(8);
  for (int t = 0; t < 2000; ++t) {
    const auto a = synth::random_unit(24, rng);
    const auto b = t % 3 == 0 ? synth::perturb(a, 0.05, rng) : synth::random_unit(24, rng);
    const double l2 = l2_distance(a, b);
    const double wh = weighted_hamming_distance(a, b);
    EXPECT_EQ(l2, l2_distance(b, a));
    EXPECT_EQ(wh, weighted_hamming_distance(b, a));
    EXPECT_EQ(hamming_distance(binarize(a), binarize(b)), hamming_distance(binarize(b), binarize(a)));
    EXPECT_GE(wh, 0.0);
    EXPECT_LE(wh, l2);
    EXPECT_EQ(wh == 0.0, binarize(a) == binarize(b));
  }
}

TEST(UnitVectorTest, ExactUnitValuesKeptBitForBit) {
  const std::vector<double> v{0.6, 0.8};
  const RealDescriptor d(v);
  EXPECT_EQ(d.values()[0], 0.6);
  EXPECT_EQ(d.values()[1], 0.8);
}

TEST(UnitVectorTest, SmallDeviationRenormalized) {
  const RealDescriptor d(std::vector<double>{0.603, 0.804});
  EXPECT_NEAR(std::sqrt(d[0] * d[0] + d[1] * d[1]), 1.0, 1e-15);
}

TEST(UnitVectorTest, LargeDeviationRejected) {
  EXPECT_THROW(RealDescriptor(std::vector<double>{1.0, 1.0}), Error);
  EXPECT_THROW(RealDescriptor(std::vector<double>{NAN, 1.0}), Error);
}

TEST(UnitVectorTest, NormalizeRejectsZero) {
  EXPECT_THROW(RealDescriptor::normalize({0.0, 0.0}), Error);
  Rng rng(9);
  const auto d = RealDescriptor::normalize(raw_random(10, rng));
  double s = 0.0;
  for (double x : d.values()) s += x * x;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

}  // namespace
}  // namespace parloc
