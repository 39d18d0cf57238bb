#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gmrl/random.hpp"
#include "gmrl/tensor.hpp"

using namespace gmrl;

TEST(Matrix, ShapeAndFill) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  for (double v : m.values()) EXPECT_EQ(v, 1.5);
}

TEST(Matrix, InitializerListIsRowMajor) {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m(0, 2), 3.0);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m[4], 5.0);
}

TEST(Matrix, RaggedInitializerThrows) {
  EXPECT_THROW((Matrix{{1, 2}, {3}}), DimensionError);
}

TEST(Matrix, MatmulHandComputed) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  const Matrix c = matmul(a, b);
  EXPECT_EQ(c, (Matrix{{19, 22}, {43, 50}}));
}

TEST(Matrix, TransposedProductsAgreeWithExplicitTranspose) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};     // 2x3
  const Matrix at{{1, 4}, {2, 5}, {3, 6}};  // 3x2
  const Matrix b{{1, 0}, {2, 1}};           // 2x2
  EXPECT_EQ(matmul_tn(a, b), matmul(at, b));
  const Matrix c{{1, 1, 1}, {0, 2, 0}};
  const Matrix ct{{1, 0}, {1, 2}, {1, 0}};
  EXPECT_EQ(matmul_nt(a, c), matmul(a, ct));
}

TEST(Matrix, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  EXPECT_THROW(matmul_tn(Matrix(2, 3), Matrix(3, 3)), DimensionError);
  EXPECT_THROW(matmul_nt(Matrix(2, 3), Matrix(2, 2)), DimensionError);
}

TEST(Matrix, ElementwiseHelpers) {
  Matrix a{{1, -2}, {3, -4}};
  EXPECT_EQ(abs_sum(a), 10.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(a), std::sqrt(30.0));
  EXPECT_EQ(mean(a), -0.5);
  EXPECT_EQ(hadamard(a, Matrix{{1, 0}, {0, 1}}), (Matrix{{1, 0}, {0, -4}}));
  add_in_place(a, Matrix(2, 2, 1.0));
  EXPECT_EQ(a, (Matrix{{2, -1}, {4, -3}}));
  EXPECT_THROW(add_in_place(a, Matrix(1, 2)), DimensionError);
}

TEST(Matrix, MeanOfEmptyThrows) { EXPECT_THROW(mean(Matrix{}), StateError); }

TEST(Matrix, AllFiniteDetectsNan) {
  Matrix m(1, 2);
  EXPECT_TRUE(m.all_finite());
  m[1] = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, DerivedStreamsDiffer) {
  Rng a = Rng::derive(7, "env");
  Rng b = Rng::derive(7, "policy");
  Rng c = Rng::derive(7, "policy", 1);
  EXPECT_NE(a(), b());
  EXPECT_NE(Rng::derive(7, "policy")(), c());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, BelowIsInRangeAndCoversAll) {
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMomentsRoughlyStandard) {
  Rng r(11);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(Rng, StateRoundTripIncludesCachedNormal) {
  Rng a(9);
  a.normal();  // leaves a cached second variate
  Rng b;
  b.set_state(a.state());
  b.set_spare_normal(a.spare_normal());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, w = v;
  Rng a(1), b(1);
  shuffle(v, a);
  shuffle(w, b);
  EXPECT_EQ(v, w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}
