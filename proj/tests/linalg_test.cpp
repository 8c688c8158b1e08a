#include "preopt/linalg.hpp"

#include <gtest/gtest.h>

#include "preopt/random.hpp"

namespace preopt {
namespace {

TEST(MatVec, IdentityPassesThrough) {
  const DenseMatrix id = DenseMatrix::identity(3);
  const DenseVector v{1.0, 2.0, 3.0};
  const DenseVector out = mat_vec(id, v);
  EXPECT_EQ(out.entries(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(MatVec, ZeroAnnihilates) {
  const DenseMatrix zero(2, 2);
  const DenseVector out = mat_vec(zero, DenseVector{5.0, 7.0});
  EXPECT_EQ(out.entries(), (std::vector<double>{0.0, 0.0}));
}

TEST(MatVec, HandComputedProduct) {
  const DenseMatrix m(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseVector out = mat_vec(m, DenseVector{1.0, 1.0});
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 7.0);
}

TEST(MatVec, DimensionMismatchNamesBothDims) {
  const DenseMatrix m(2, 3);
  try {
    mat_vec(m, DenseVector{1.0, 2.0});
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
  }
}

TEST(MatVec, LinearityProperty) {
  RandomSource rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.pick_index(6);
    const std::size_t cols = 1 + rng.pick_index(6);
    DenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
    DenseVector u(cols), v(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      u[c] = rng.normal();
      v[c] = rng.normal();
    }
    const double a = rng.normal(), b = rng.normal();
    DenseVector combo(cols);
    for (std::size_t c = 0; c < cols; ++c) combo[c] = a * u[c] + b * v[c];
    const DenseVector lhs = mat_vec(m, combo);
    const DenseVector mu = mat_vec(m, u);
    const DenseVector mv = mat_vec(m, v);
    for (std::size_t r = 0; r < rows; ++r) {
      const double rhs = a * mu[r] + b * mv[r];
      EXPECT_NEAR(lhs[r], rhs, 1e-12 * (1.0 + std::abs(rhs)));
    }
  }
}

TEST(EmpiricalSecondMoment, RankOneRow) {
  const DenseMatrix x(1, 2, {1.0, 0.0});
  const DenseMatrix m = empirical_second_moment(x);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 0.0);
}

TEST(EmpiricalSecondMoment, TwoOrthogonalRowsGiveIdentity) {
  const DenseMatrix x(2, 2, {1.0, 1.0, 1.0, -1.0});
  const DenseMatrix m = empirical_second_moment(x);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 1.0);
}

TEST(EmpiricalSecondMoment, SymmetricAndPositiveSemidefinite) {
  RandomSource rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.pick_index(10);
    const std::size_t d = 1 + rng.pick_index(6);
    DenseMatrix x(n, d);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) x(r, c) = rng.normal();
    const DenseMatrix m = empirical_second_moment(x);
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_GE(m(i, i), 0.0);
      for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(m(i, j), m(j, i));
    }
    DenseVector v(d);
    for (std::size_t c = 0; c < d; ++c) v[c] = rng.normal();
    EXPECT_GE(dot(v, mat_vec(m, v)), -1e-12 * squared_norm(v));
  }
}

TEST(EmpiricalSecondMoment, EmptySampleRejected) {
  EXPECT_THROW(empirical_second_moment(DenseMatrix(0, 3)), EmptySampleError);
}

TEST(DiagApply, IdentityMaskAndProduct) {
  EXPECT_EQ(diag_apply(DiagonalMatrix::identity(2), DenseVector{4.0, 5.0}).entries(),
            (std::vector<double>{4.0, 5.0}));
  EXPECT_EQ(diag_apply(DiagonalMatrix{0.0, 1.0}, DenseVector{9.0, 9.0}).entries(),
            (std::vector<double>{0.0, 9.0}));
  EXPECT_EQ(diag_apply(DiagonalMatrix{2.0, -3.0}, DenseVector{1.0, 1.0}).entries(),
            (std::vector<double>{2.0, -3.0}));
  EXPECT_THROW(diag_apply(DiagonalMatrix{1.0}, DenseVector{1.0, 2.0}), ContractError);
}

TEST(Construction, NonFiniteEntriesRejected) {
  EXPECT_THROW(DenseVector({1.0, std::nan("")}), ContractError);
  EXPECT_THROW(DenseMatrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}), ContractError);
  EXPECT_THROW(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), ContractError);
}

TEST(MatMul, MatchesHandComputation) {
  const DenseMatrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseMatrix b(2, 2, {0.0, 1.0, 1.0, 0.0});
  const DenseMatrix c = matmul(a, b);
  EXPECT_DOUBLE_EQ(c(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 3.0);
  EXPECT_THROW(matmul(a, DenseMatrix(3, 2)), ContractError);
}

TEST(MatTVec, TransposeProduct) {
  const DenseMatrix m(2, 3, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  const DenseVector out = mat_tvec(m, DenseVector{1.0, 1.0});
  EXPECT_DOUBLE_EQ(out[0], 5.0);
  EXPECT_DOUBLE_EQ(out[1], 7.0);
  EXPECT_DOUBLE_EQ(out[2], 9.0);
}

}  // namespace
}  // namespace preopt
