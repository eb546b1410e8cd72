#include "eafpca/eigenmap.hpp"
#include "eafpca/rng.hpp"
#include "eafpca/sim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace eafpca;

TEST(Wls, MatchesStackedSolveOnRandomInstances) {
  Rng rng(2024);
  KernelSpec ep;
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = oracle::random_wls_instance(rng);
    auto est = wls_eigenvalues(std::span<const DesignBlock>(inst.blocks), inst.z, inst.h, ep, false);
    const VectorXd ref = oracle::stacked_wls(inst.blocks, inst.z, inst.h, ep);
    EXPECT_LT((est.raw - ref).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + ref.cwiseAbs().maxCoeff()))
        << "instance " << rep;
    EXPECT_EQ(est.raw, est.lambda);
  }
}

TEST(Wls, ClampingAndEmptyNeighborhood) {
  Rng rng(1);
  auto inst = oracle::random_wls_instance(rng);
  KernelSpec ep;
  auto est = wls_eigenvalues(std::span<const DesignBlock>(inst.blocks), inst.z, inst.h, ep, true);
  EXPECT_EQ(est.lambda, est.raw.cwiseMax(0.0));
  VectorXd far = VectorXd::Constant(inst.z.size(), 5.0);
  EXPECT_THROW(wls_eigenvalues(std::span<const DesignBlock>(inst.blocks), far, inst.h, ep), EmptyNeighborhood);
}

TEST(Wls, DesignRowsEnumeratePairs) {
  const VectorXd grid = uniform_grid(0.0, 1.0, 11);
  auto basis = oracle::basis_from(grid, {[](double) { return 1.0; }, [](double t) { return t - 0.5; }},
                                  VectorXd::Ones(2));
  auto mean = oracle::zero_mean(0.0, 1.0, 1);
  Subject s{"a", VectorXd::Constant(1, 0.3), {{0.0, 1.0}, {0.5, 2.0}, {1.0, 3.0}}};
  auto block = build_design(s, mean, basis, 2);
  ASSERT_EQ(block.X.rows(), 3);
  EXPECT_DOUBLE_EQ(block.Y[0], 2.0);
  EXPECT_DOUBLE_EQ(block.Y[1], 3.0);
  EXPECT_DOUBLE_EQ(block.Y[2], 6.0);
  EXPECT_DOUBLE_EQ(block.X(1, 1), basis.phi(0, 1) * basis.phi(10, 1));
  Subject one{"b", VectorXd::Constant(1, 0.3), {{0.2, 1.0}}};
  EXPECT_THROW(build_design(one, mean, basis, 2), Error);
}

TEST(Wls, NoiselessRankTwoRecoversEigenvalues) {
  // Every subject has covariance lambda(z) exactly when its raw products
  // equal the model covariance, so WLS returns the kernel-weighted truth.
  const VectorXd grid = uniform_grid(0.0, 10.0, 51);
  auto basis = oracle::basis_from(grid, {[](double t) { return truth::sim1_phi(0, t); },
                                         [](double t) { return truth::sim1_phi(1, t); }},
                                  VectorXd::Ones(2));
  std::vector<DesignBlock> blocks;
  const Eigen::Vector2d lam(3.0, 1.0);
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    DesignBlock b;
    b.z = VectorXd::Constant(1, rng.uniform());
    const int m = 6;
    b.X.resize(m * (m - 1) / 2, 2);
    b.Y.resize(m * (m - 1) / 2);
    std::vector<double> t(m);
    for (double& x : t) x = rng.uniform(0, 10);
    Index r = 0;
    for (int j = 0; j < m; ++j)
      for (int k = j + 1; k < m; ++k, ++r) {
        for (int l = 0; l < 2; ++l) b.X(r, l) = eval_eigenfunction(basis, l, t[j]) * eval_eigenfunction(basis, l, t[k]);
        b.Y[r] = b.X.row(r).dot(lam);
      }
    blocks.push_back(b);
  }
  auto est = wls_eigenvalues(std::span<const DesignBlock>(blocks), VectorXd::Constant(1, 0.5),
                             VectorXd::Constant(1, 0.4), KernelSpec{});
  EXPECT_LT((est.lambda - VectorXd(lam)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Scores, TrapezoidExactOnPiecewiseLinear) {
  const VectorXd grid = uniform_grid(0.0, 2.0, 21);
  auto basis = oracle::basis_from(grid, {[](double) { return 1.0; }}, VectorXd::Ones(1));
  const double c = basis.phi(0, 0);
  auto mean = oracle::zero_mean(0.0, 2.0, 1);
  // U(t) = 1 + 3t on [0, 1], 4 - 2(t - 1) on [1, 2]: integral 2.5 + 3 = 5.5.
  Subject s{"a", VectorXd::Constant(1, 0.0), {{0.0, 1.0}, {1.0, 4.0}, {2.0, 2.0}}};
  auto a = pc_scores_trapezoid(s, mean, basis, 1);
  EXPECT_NEAR(a[0], 5.5 * c, 1e-12);
}

TEST(Scores, TrapezoidRecoversNoiselessRankOne) {
  auto phi = [](double t) { return std::numbers::sqrt2 * std::sin(std::numbers::pi * t); };
  const VectorXd grid = uniform_grid(0.0, 1.0, 101);
  auto basis = oracle::basis_from(grid, {phi}, VectorXd::Ones(1));
  auto mean = oracle::zero_mean(0.0, 1.0, 1);
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const double a = 2.0 * rng.normal();
    Subject s{"s", VectorXd::Constant(1, 0.5), {}};
    for (int j = 0; j < 51; ++j) s.obs.push_back({j / 50.0, a * phi(j / 50.0)});
    EXPECT_NEAR(pc_scores_trapezoid(s, mean, basis, 1)[0], a, 1e-3);
  }
}

TEST(Scores, PaceShrinksVariance) {
  auto r = oracle::pace_shrinkage(2000, 0.5, 17);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE(r.sample_var[k], r.lambda[k] + 3 * r.mc_se[k]);
    EXPECT_GT(r.sample_var[k], 0.0);
  }
}

TEST(Scores, PaceWithoutNoiseInterpolates) {
  const VectorXd grid = uniform_grid(0.0, 1.0, 51);
  auto basis = oracle::basis_from(grid, {[](double) { return 1.0; }}, VectorXd::Ones(1));
  auto mean = oracle::zero_mean(0.0, 1.0, 1);
  Subject s{"a", VectorXd::Constant(1, 0.5), {{0.2, 3.0}, {0.6, 3.0}}};
  auto a = pace_scores(s, mean, basis, VectorXd::Constant(1, 2.0), 0.0);
  EXPECT_NEAR(a[0], 3.0, 1e-9);
  auto shrunk = pace_scores(s, mean, basis, VectorXd::Constant(1, 2.0), 1.0);
  // Lambda phi' (phi lambda phi' + I)^{-1} U with phi = (1, 1), lambda = 2: 2 * 6 / 5.
  EXPECT_NEAR(shrunk[0], 2.4, 1e-12);
  EXPECT_THROW(pace_scores(s, mean, basis, VectorXd::Constant(1, -1.0), 1.0), Error);
}

TEST(Field, PcEigenvaluesSmoothSquaredScores) {
  ScoreSet set;
  set.scores.resize(40, 1);
  for (int i = 0; i < 40; ++i) {
    set.z.push_back(VectorXd::Constant(1, i / 39.0));
    set.scores(i, 0) = std::sqrt(1.0 + 2.0 * i / 39.0);
  }
  auto v = pc_eigenvalues(set, VectorXd::Constant(1, 0.5), VectorXd::Constant(1, 0.2), KernelSpec{});
  EXPECT_NEAR(v[0], 2.0, 1e-10);
}

TEST(Field, FailedPointsAreOmitted) {
  auto sim = gen_sim1(80, SchemeKind::Dense, 5);
  Bandwidths b;
  b.h_t = 1.0;
  b.h_z = VectorXd::Constant(1, 0.2);
  const VectorXd tg = uniform_grid(0, 10, 51);
  CovariateGrid zg;
  zg.axes.push_back(uniform_grid(0, 1, 11));
  auto mean = estimate_mean(sim.data, b, KernelSpec{}, tg, zg);
  auto basis = eigendecompose(estimate_pooled_cov(sim.data, mean, 1.0, KernelSpec{}, tg));
  FieldOptions o;
  o.h_lambda = VectorXd::Constant(1, 0.2);
  std::vector<VectorXd> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(VectorXd::Constant(1, i / 19.0));
  pts.push_back(VectorXd::Constant(1, 3.0));
  auto field = eigenvalue_field(sim.data, mean, basis, 2, FieldMethod::WLS, pts, o);
  EXPECT_EQ(field.z_points.size(), 20u);
  ASSERT_EQ(field.failures.size(), 1u);
  EXPECT_DOUBLE_EQ(field.failures[0].z[0], 3.0);
  for (int i = 0; i < 5; ++i) pts.push_back(VectorXd::Constant(1, 4.0 + i));
  EXPECT_THROW(eigenvalue_field(sim.data, mean, basis, 2, FieldMethod::WLS, pts, o), Error);
}

TEST(Field, PcOnSparseDataWarns) {
  auto sim = gen_sim1(200, SchemeKind::Sparse, 6);
  Bandwidths b;
  b.h_t = 1.0;
  b.h_z = VectorXd::Constant(1, 0.2);
  const VectorXd tg = uniform_grid(0, 10, 51);
  CovariateGrid zg;
  zg.axes.push_back(uniform_grid(0, 1, 11));
  auto mean = estimate_mean(sim.data, b, KernelSpec{}, tg, zg);
  auto basis = eigendecompose(estimate_pooled_cov(sim.data, mean, 1.0, KernelSpec{}, tg));
  FieldOptions o;
  o.h_lambda = VectorXd::Constant(1, 0.2);
  o.sigma2 = 1.0;
  auto field = eigenvalue_field(sim.data, mean, basis, 2, FieldMethod::PC, {VectorXd::Constant(1, 0.5)}, o);
  ASSERT_FALSE(field.warnings.empty());
  EXPECT_NE(field.warnings[0].find("sparse"), std::string::npos);
}
