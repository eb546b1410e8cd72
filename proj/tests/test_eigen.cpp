#include "eafpca/eigen_basis.hpp"
#include "eafpca/rng.hpp"
#include "eafpca/sim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace eafpca;

namespace {

CovSurfaced surface(const VectorXd& grid, const MatrixXd& values) {
  CovSurfaced c;
  c.t_grid = grid;
  c.values = values;
  return c;
}

}  // namespace

TEST(Eigen, TrapezoidWeights) {
  VectorXd g(4);
  g << 0.0, 1.0, 3.0, 3.5;
  VectorXd w = trapezoid_weights(g);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 1.5);
  EXPECT_DOUBLE_EQ(w[2], 1.25);
  EXPECT_DOUBLE_EQ(w[3], 0.25);
}

TEST(Eigen, RankOneSurface) {
  const VectorXd grid = uniform_grid(0.0, 1.0, 101);
  VectorXd phi(101);
  for (Index i = 0; i < 101; ++i) phi[i] = std::sqrt(2.0) * std::sin(std::numbers::pi * grid[i]);
  const double norm = std::sqrt(trapezoid_weights(grid).dot(phi.cwiseProduct(phi)));
  phi /= norm;
  auto basis = eigendecompose(surface(grid, 4.0 * phi * phi.transpose()));
  EXPECT_NEAR(basis.lambda_star[0], 4.0, 1e-8);
  EXPECT_NEAR(basis.lambda_star[1], 0.0, 1e-8);
  EXPECT_LT((basis.phi.col(0) - phi).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(basis.fve[0], 1.0, 1e-8);
}

TEST(Eigen, Sim1PooledTruth) {
  // Pooled truth sum_k E[lambda_k(Z)] phi_k(s) phi_k(t) with Z ~ U(0, 1).
  double e1 = 0.0, e2 = 0.0;
  const int nz = 200000;
  for (int i = 0; i < nz; ++i) {
    const auto l = truth::sim1_lambda((i + 0.5) / nz);
    e1 += l[0] / nz;
    e2 += l[1] / nz;
  }
  const VectorXd grid = uniform_grid(0.0, 10.0, 201);
  MatrixXd phi(201, 2);
  for (Index i = 0; i < 201; ++i) phi.row(i) << truth::sim1_phi(0, grid[i]), truth::sim1_phi(1, grid[i]);
  const MatrixXd v = e1 * phi.col(0) * phi.col(0).transpose() + e2 * phi.col(1) * phi.col(1).transpose();
  auto basis = eigendecompose(surface(grid, v));
  EXPECT_NEAR(basis.lambda_star[0], e1, 1e-6);
  EXPECT_NEAR(basis.lambda_star[1], e2, 1e-6);
  for (int k = 0; k < 2; ++k) {
    const double sign = basis.phi.col(k).dot(phi.col(k)) < 0 ? -1.0 : 1.0;
    EXPECT_LT((sign * basis.phi.col(k) - phi.col(k)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Eigen, ScalingTheSurface) {
  Rng rng(2);
  auto cov = oracle::random_low_rank(rng, 41, 3);
  auto b1 = eigendecompose(cov);
  cov.values *= 4.0;
  auto b4 = eigendecompose(cov);
  EXPECT_LT((b4.lambda_star - 4.0 * b1.lambda_star).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((b4.phi.leftCols(3) - b1.phi.leftCols(3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Eigen, OrthonormalityAndReconstruction) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Index m = 21 + 10 * (rep % 5);
    const Index r = 1 + rep % 4;
    auto cov = oracle::random_low_rank(rng, m, r);
    auto basis = eigendecompose(cov);
    const MatrixXd gram = basis.phi.transpose() * basis.quad_weights.asDiagonal() * basis.phi;
    EXPECT_LT((gram - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-6);
    auto rec = reconstruct_cov(basis, basis.lambda_star.head(r));
    EXPECT_LT((rec.values - cov.values).cwiseAbs().maxCoeff(), 1e-6);
    for (Index k = 0; k + 1 < m; ++k) EXPECT_GE(basis.lambda_star[k], basis.lambda_star[k + 1]);
  }
}

TEST(Eigen, SignConvention) {
  Rng rng(6);
  auto basis = eigendecompose(oracle::random_low_rank(rng, 31, 3));
  for (Index k = 0; k < 3; ++k) EXPECT_GE(basis.quad_weights.dot(basis.phi.col(k)), -1e-8);
}

TEST(Eigen, Truncation) {
  EigenBasisd b;
  b.lambda_star.resize(4);
  b.lambda_star << 5.0, 3.0, 1.5, 0.5;
  EXPECT_EQ(select_truncation(b, 0.5), 1);
  EXPECT_EQ(select_truncation(b, 0.8), 2);
  EXPECT_EQ(select_truncation(b, 0.95), 3);
  EXPECT_EQ(select_truncation(b, 1.0), 4);
  EXPECT_THROW(select_truncation(b, 0.0), Error);
  b.lambda_star.setZero();
  EXPECT_THROW(select_truncation(b, 0.9), Error);
}

TEST(Eigen, InterpolationBound) {
  const VectorXd grid = uniform_grid(0.0, 10.0, 51);
  MatrixXd phi(51, 2);
  for (Index i = 0; i < 51; ++i) phi.row(i) << truth::sim1_phi(0, grid[i]), truth::sim1_phi(1, grid[i]);
  auto basis = eigendecompose(surface(grid, 4 * phi.col(0) * phi.col(0).transpose() +
                                                phi.col(1) * phi.col(1).transpose()));
  // Linear interpolation error is at most h^2 / 8 max|phi''| = 0.04 / 8 * (pi/10)^2 / sqrt(5).
  const double bound = 0.04 / 8 * std::pow(std::numbers::pi / 10, 2) / std::sqrt(5.0);
  for (double t = 0.1; t < 10.0; t += 0.37) {
    const double a = std::abs(eval_eigenfunction(basis, 0, t));
    EXPECT_LE(std::abs(a - std::abs(truth::sim1_phi(0, t))), bound + 1e-9);
  }
  EXPECT_DOUBLE_EQ(eval_eigenfunction(basis, 1, grid[7]), basis.phi(7, 1));
  EXPECT_THROW(eval_eigenfunction(basis, 0, 10.5), Error);
  EXPECT_THROW(eval_eigenfunction(basis, 5000, 1.0), Error);
}

TEST(Eigen, TiedEigenvaluesWarn) {
  const VectorXd grid = uniform_grid(0.0, 10.0, 51);
  MatrixXd phi(51, 2);
  for (Index i = 0; i < 51; ++i) phi.row(i) << truth::sim1_phi(0, grid[i]), truth::sim1_phi(1, grid[i]);
  auto basis = eigendecompose(surface(grid, 2 * phi * phi.transpose()));
  ASSERT_FALSE(basis.warnings.empty());
  EXPECT_NE(basis.warnings[0].find("tied"), std::string::npos);
}

TEST(Eigen, RejectsBadSurfaces) {
  const VectorXd grid = uniform_grid(0.0, 1.0, 5);
  MatrixXd v = MatrixXd::Identity(5, 5);
  v(0, 1) = 0.5;
  EXPECT_THROW(eigendecompose(surface(grid, v)), Error);
  EXPECT_THROW(eigendecompose(surface(grid, MatrixXd::Identity(4, 4))), DimensionError);
}
