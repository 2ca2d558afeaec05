#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lnet/tensor.hpp"
#include "support.hpp"

using namespace lnet;
using lnet::testing::naive_assemble;
using lnet::testing::random_factors;
using lnet::testing::random_matrix;
using lnet::testing::random_tensor;

TEST(Tensor3, ConstructionAndAccess) {
  Tensor3 t(2, 3, 4, 1.5);
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(t.dim(1), 2);
  EXPECT_EQ(t.dim(3), 4);
  EXPECT_DOUBLE_EQ(t.at(1, 2, 3), 1.5);
  EXPECT_THROW(t.at(2, 0, 0), std::out_of_range);
  EXPECT_THROW(t.at(0, 0, -1), std::out_of_range);
  EXPECT_THROW(Tensor3(0, 1, 1), ShapeError);
  EXPECT_THROW(Tensor3(Dims3{2, 2, 2}, std::vector<double>(7)), ShapeError);
}

TEST(Tensor3, FirstIndexVariesFastest) {
  Tensor3 t(2, 3, 2);
  t(1, 2, 1) = 9.0;
  EXPECT_DOUBLE_EQ(t.data()[1 + 2 * (2 + 3 * 1)], 9.0);
  EXPECT_DOUBLE_EQ(t.slice(1)(1, 2), 9.0);
}

TEST(ModeUnfold, SingleEntry) {
  Tensor3 t(1, 1, 1, 4.25);
  for (int mode = 1; mode <= 3; ++mode) {
    const Matrix m = mode_unfold(t, mode);
    ASSERT_EQ(m.rows(), 1);
    ASSERT_EQ(m.cols(), 1);
    EXPECT_DOUBLE_EQ(m(0, 0), 4.25);
  }
}

TEST(ModeUnfold, IndexLawOnTwoByTwoByTwo) {
  // M_ijk = i + 2(j-1) + 4(k-1) with 1-based indices.
  Tensor3 t(2, 2, 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index k = 0; k < 2; ++k) t(i, j, k) = (i + 1) + 2.0 * j + 4.0 * k;
  const Matrix m1 = mode_unfold(t, 1);
  EXPECT_DOUBLE_EQ(m1(0, 3), 7.0);  // entry (1, 4) = M_{1,2,2}
}

TEST(ModeUnfold, MatchesCyclicLawByLoops) {
  std::mt19937_64 rng(3);
  const Tensor3 t = random_tensor({3, 4, 5}, rng);
  const Matrix m1 = mode_unfold(t, 1), m2 = mode_unfold(t, 2), m3 = mode_unfold(t, 3);
  ASSERT_EQ(m1.rows(), 3);
  ASSERT_EQ(m1.cols(), 20);
  ASSERT_EQ(m2.rows(), 4);
  ASSERT_EQ(m3.rows(), 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index k = 0; k < 5; ++k) {
        EXPECT_EQ(m1(i, j + 4 * k), t(i, j, k));
        EXPECT_EQ(m2(j, k + 5 * i), t(i, j, k));
        EXPECT_EQ(m3(k, i + 3 * j), t(i, j, k));
      }
}

TEST(ModeUnfold, RefoldRoundTripAndNormPreserved) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const Tensor3 t = random_tensor({2 + rep, 3, 4 + rep % 2}, rng);
    for (int mode = 1; mode <= 3; ++mode) {
      const Matrix m = mode_unfold(t, mode);
      EXPECT_EQ(mode_refold(m, mode, t.dims()), t);
      EXPECT_NEAR(m.norm(), frobenius_norm(t), 1e-12 * frobenius_norm(t));
    }
  }
  EXPECT_THROW(mode_unfold(Tensor3(2, 2, 2), 4), ValueError);
  EXPECT_THROW(mode_refold(Matrix(3, 4), 1, {2, 2, 3}), ShapeError);
}

TEST(TuckerAssemble, RankOne) {
  TuckerFactors f;
  f.core = Tensor3(1, 1, 1, 2.0);
  f.u = Matrix(3, 1);
  f.u << 1, 2, 3;
  f.v = Matrix(2, 1);
  f.v << -1, 0.5;
  f.w = Matrix(2, 1);
  f.w << 4, 5;
  const Tensor3 m = tucker_assemble(f);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index k = 0; k < 2; ++k) EXPECT_DOUBLE_EQ(m(i, j, k), 2.0 * f.u(i, 0) * f.v(j, 0) * f.w(k, 0));
}

TEST(TuckerAssemble, IdentityFactorsReturnCore) {
  std::mt19937_64 rng(8);
  TuckerFactors f;
  f.core = random_tensor({2, 3, 4}, rng);
  f.u = Matrix::Identity(2, 2);
  f.v = Matrix::Identity(3, 3);
  f.w = Matrix::Identity(4, 4);
  EXPECT_EQ(tucker_assemble(f), f.core);
}

TEST(TuckerAssemble, MatchesQuadrupleLoop) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Dims3 n{3 + rep % 4, 2 + rep % 5, 6 - rep % 3};
    const Dims3 r{1 + rep % 3, 1 + rep % 2, 2};
    const TuckerFactors f = random_factors(n, r, rng);
    const Tensor3 expect = naive_assemble(f);
    EXPECT_LE(std::sqrt(squared_distance(tucker_assemble(f), expect)), 1e-12 * frobenius_norm(expect));
  }
}

TEST(TuckerAssemble, RejectsIncompatibleShapes) {
  TuckerFactors f;
  f.core = Tensor3(2, 2, 2);
  f.u = Matrix::Zero(3, 2);
  f.v = Matrix::Zero(3, 1);
  f.w = Matrix::Zero(3, 2);
  EXPECT_THROW(tucker_assemble(f), ShapeError);
  f.v = Matrix::Zero(1, 2);
  EXPECT_THROW(f.validate(), ShapeError);
}

TEST(ModeProduct, MatchesLoops) {
  std::mt19937_64 rng(2);
  const Tensor3 t = random_tensor({3, 4, 2}, rng);
  const Matrix a = random_matrix(5, 4, rng);
  const Tensor3 p = mode_product(t, a, 2);
  ASSERT_EQ(p.dims(), (Dims3{3, 5, 2}));
  for (Index i = 0; i < 3; ++i)
    for (Index q = 0; q < 5; ++q)
      for (Index k = 0; k < 2; ++k) {
        double s = 0.0;
        for (Index j = 0; j < 4; ++j) s += a(q, j) * t(i, j, k);
        EXPECT_NEAR(p(i, q, k), s, 1e-12);
      }
  EXPECT_THROW(mode_product(t, Matrix(2, 3), 2), ShapeError);
}

TEST(Norms, Frobenius) {
  EXPECT_DOUBLE_EQ(frobenius_norm(Tensor3(3, 2, 2)), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(Tensor3(2, 2, 2, 1.0)), std::sqrt(8.0));
  EXPECT_THROW(squared_distance(Tensor3(2, 2, 2), Tensor3(2, 2, 3)), ShapeError);
}

TEST(Norms, SigmaRMatchesGramEigenvalues) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix m = random_matrix(3 + rep, 7, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m * m.transpose());
    const Vector ev = es.eigenvalues().reverse();  // decreasing
    for (Index r = 1; r <= m.rows(); ++r) {
      EXPECT_NEAR(sigma_r(m, r), std::sqrt(std::max(0.0, ev(r - 1))), 1e-10);
    }
  }
  EXPECT_THROW(sigma_r(Matrix::Ones(2, 3), 0), ValueError);
  EXPECT_THROW(sigma_r(Matrix::Ones(2, 3), 3), ValueError);
}

TEST(Norms, TwoToInf) {
  EXPECT_DOUBLE_EQ(two_to_inf_norm(Matrix::Identity(3, 3)), 1.0);
  Matrix m(2, 2);
  m << 3, 4, 0, 1;
  EXPECT_DOUBLE_EQ(two_to_inf_norm(m), 5.0);
  std::mt19937_64 rng(4);
  const Matrix x = random_matrix(6, 3, rng);
  double best = 0.0;
  for (Index r = 0; r < 6; ++r) {
    double s = 0.0;
    for (Index c = 0; c < 3; ++c) s += x(r, c) * x(r, c);
    best = std::max(best, std::sqrt(s));
  }
  EXPECT_EQ(two_to_inf_norm(x), best);
}

TEST(SingularVectors, OrthonormalAndSpanLeadingSubspace) {
  std::mt19937_64 rng(21);
  const Matrix m = random_matrix(5, 12, rng);
  const Matrix u = leading_left_singular_vectors(m, 2);
  EXPECT_LE((u.transpose() * u - Matrix::Identity(2, 2)).norm(), 1e-10);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Matrix ref = svd.matrixU().leftCols(2);
  EXPECT_LE((u * u.transpose() - ref * ref.transpose()).norm(), 1e-9);
}
