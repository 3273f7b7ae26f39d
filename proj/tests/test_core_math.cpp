#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "imba_ids/core_math.hpp"
#include "test_util.hpp"

using namespace imba_ids;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix m = Matrix::from_rows({{1.5, -2.0, 0.25, 4.0}, {3.0, 0.0, -1.0, 2.0}, {7.0, 8.0, 9.0, -10.0}});
  EXPECT_EQ(matmul(Matrix::identity(3), m), m);
}

TEST(Matmul, ZeroRightOperand) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(a, Matrix(2, 1)), Matrix::from_rows({{0}, {0}}));
}

TEST(Matmul, HandComputedProduct) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5}, {6}});
  EXPECT_EQ(matmul(a, b), Matrix::from_rows({{17}, {39}}));
}

TEST(Matmul, DimensionMismatchNamesBothShapes) {
  try {
    (void)matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3 by 2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, TransposedVariantsAgreeWithExplicitTranspose) {
  Rng rng(11);
  const Matrix a = test::random_matrix(rng, 4, 3);
  const Matrix b = test::random_matrix(rng, 5, 3);
  const Matrix c = test::random_matrix(rng, 4, 6);
  test::expect_near(matmul_transpose_b(a, b), matmul(a, transpose(b)), 1e-14);
  test::expect_near(matmul_transpose_a(a, c), matmul(transpose(a), c), 1e-14);
}

TEST(Matmul, AssociativeOnRandomTriples) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(6), k = 1 + rng.below(6), l = 1 + rng.below(6), n = 1 + rng.below(6);
    const Matrix a = test::random_matrix(rng, m, k);
    const Matrix b = test::random_matrix(rng, k, l);
    const Matrix c = test::random_matrix(rng, l, n);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::abs(left.values()[i]));
      EXPECT_LE(std::abs(left.values()[i] - right.values()[i]) / scale, 1e-9);
    }
  }
}

TEST(Matrix, RejectsWrongValueCount) { EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError); }

TEST(BernoulliMask, KeepOneIsAllOnes) {
  Rng rng(1);
  for (auto v : bernoulli_mask(rng, 1000, 1.0)) EXPECT_EQ(v, 1);
}

TEST(BernoulliMask, KeepZeroIsAllZeros) {
  Rng rng(1);
  for (auto v : bernoulli_mask(rng, 1000, 0.0)) EXPECT_EQ(v, 0);
}

TEST(BernoulliMask, MeanMatchesKeepProbability) {
  Rng rng(2024);
  const auto mask = bernoulli_mask(rng, 100000, 0.8);
  const double mean = std::accumulate(mask.begin(), mask.end(), 0.0) / static_cast<double>(mask.size());
  EXPECT_NEAR(mean, 0.8, 0.01);
}

TEST(BernoulliMask, RejectsOutOfRangeProbability) {
  Rng rng(0);
  EXPECT_THROW(bernoulli_mask(rng, 3, 1.5), std::invalid_argument);
  EXPECT_THROW(bernoulli_mask(rng, 3, -0.1), std::invalid_argument);
  EXPECT_THROW(bernoulli_mask(rng, 3, NAN), std::invalid_argument);
}

TEST(HeInit, ShapeAndStandardDeviation) {
  Rng rng(5);
  const Matrix one = he_init(rng, 2, 3);
  EXPECT_EQ(one.rows(), 3u);
  EXPECT_EQ(one.cols(), 2u);
  // 10^4 draws at fan_in = 2: std should be near sqrt(2 / 2) = 1.
  std::vector<double> draws;
  while (draws.size() < 10000) {
    const Matrix w = he_init(rng, 2, 3);
    draws.insert(draws.end(), w.values().begin(), w.values().end());
  }
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  double sq = 0.0;
  for (double v : draws) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(draws.size() - 1));
  EXPECT_NEAR(sd, 1.0, 0.2);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

TEST(HeInit, SameSeedSameMatrix) {
  Rng a(99), b(99);
  EXPECT_EQ(he_init(a, 7, 5), he_init(b, 7, 5));
}

TEST(HeInit, HugeFanInStaysFinite) {
  Rng rng(1);
  const Matrix w = he_init(rng, 1000000, 1);
  EXPECT_TRUE(w.all_finite());
  for (double v : w.values()) EXPECT_LT(std::abs(v), 0.05);
}

TEST(HeInit, RejectsZeroFan) {
  Rng rng(1);
  EXPECT_THROW(he_init(rng, 0, 3), ShapeError);
  EXPECT_THROW(he_init(rng, 3, 0), ShapeError);
}

TEST(Rng, ReplayReproducesStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.uniform(), b.uniform());
  }
}

TEST(Rng, TenThousandthOutputMatchesStandardReference) {
  // The C++ standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(3, 4), derive_seed(3, 4));
}
