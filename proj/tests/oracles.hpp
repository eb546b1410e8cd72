#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include "eafpca/eigen_basis.hpp"
#include "eafpca/eigenmap.hpp"
#include "eafpca/rng.hpp"
#include "eafpca/sim.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using namespace eafpca;

struct WlsInstance {
  std::vector<DesignBlock> blocks;
  VectorXd z;
  VectorXd h;
};

// Random design blocks with n subjects, N_i observations each, L components
// and p covariates. The query sits at the center of the covariate cloud so
// that enough subjects carry weight.
inline WlsInstance random_wls_instance(Rng& rng) {
  WlsInstance inst;
  const int n = static_cast<int>(rng.uniform_int(20, 80));
  const int L = static_cast<int>(rng.uniform_int(1, 4));
  const int p = static_cast<int>(rng.uniform_int(1, 3));
  inst.z = VectorXd::Constant(p, 0.5);
  inst.h = VectorXd::Constant(p, rng.uniform(0.35, 0.7));
  for (int i = 0; i < n; ++i) {
    const int m = static_cast<int>(rng.uniform_int(2, 8));
    const Index rows = static_cast<Index>(m) * (m - 1) / 2;
    DesignBlock b;
    b.subject_id = std::to_string(i);
    b.z.resize(p);
    for (int k = 0; k < p; ++k) b.z[k] = rng.uniform();
    b.X.resize(rows, L);
    b.Y.resize(rows);
    for (Index r = 0; r < rows; ++r) {
      for (int l = 0; l < L; ++l) b.X(r, l) = rng.normal();
      b.Y[r] = 2.0 * rng.normal();
    }
    inst.blocks.push_back(std::move(b));
  }
  return inst;
}

// Stacks every block into one weighted regression and solves it by QR on
// W^{1/2} X.
inline VectorXd stacked_wls(const std::vector<DesignBlock>& blocks, const VectorXd& z,
                            const VectorXd& h, const KernelSpec& spec) {
  Index rows = 0;
  const Index L = blocks.front().X.cols();
  for (const auto& b : blocks) rows += b.X.rows();
  MatrixXd X(rows, L);
  VectorXd Y(rows), w(rows);
  Index r = 0;
  for (const auto& b : blocks) {
    double wi = 1.0;
    for (Index k = 0; k < z.size(); ++k) wi *= eval_kernel(spec, (b.z[k] - z[k]) / h[k]) / h[k];
    X.middleRows(r, b.X.rows()) = b.X;
    Y.segment(r, b.X.rows()) = b.Y;
    w.segment(r, b.X.rows()).setConstant(wi);
    r += b.X.rows();
  }
  const VectorXd root = w.cwiseSqrt();
  return (root.asDiagonal() * X).colPivHouseholderQr().solve(root.asDiagonal() * Y);
}

// Mean field identically zero over [lo, hi] x [0, 1]^p.
inline MeanField zero_mean(double lo, double hi, int p) {
  MeanField m;
  m.t_grid = uniform_grid(lo, hi, 3);
  for (int k = 0; k < p; ++k) m.z_grid.axes.push_back(uniform_grid(0.0, 1.0, 2));
  m.values = MatrixXd::Zero(3, m.z_grid.size());
  return m;
}

// Basis whose columns are the given functions tabulated on `grid` and
// normalized under the trapezoid rule.
inline EigenBasisd basis_from(const VectorXd& grid, const std::vector<std::function<double(double)>>& fns,
                              const VectorXd& lambda) {
  EigenBasisd b;
  b.t_grid = grid;
  b.quad_weights = trapezoid_weights(grid);
  b.phi.resize(grid.size(), static_cast<Index>(fns.size()));
  for (std::size_t k = 0; k < fns.size(); ++k) {
    for (Index g = 0; g < grid.size(); ++g) b.phi(g, static_cast<Index>(k)) = fns[k](grid[g]);
    const double norm = std::sqrt(b.quad_weights.dot(b.phi.col(static_cast<Index>(k)).cwiseAbs2()));
    b.phi.col(static_cast<Index>(k)) /= norm;
  }
  b.lambda_star = lambda;
  b.fve = VectorXd::Ones(lambda.size());
  return b;
}

// Random rank-r PSD surface on a grid, built from W-orthonormal functions.
inline CovSurfaced random_low_rank(Rng& rng, Index m, Index r) {
  const VectorXd grid = uniform_grid(0.0, 1.0, m);
  const VectorXd w = trapezoid_weights(grid);
  MatrixXd g(m, r);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < r; ++k) g(i, k) = rng.normal();
  // Orthonormalize in the W inner product via QR on W^{1/2} G.
  const VectorXd root = w.cwiseSqrt();
  Eigen::HouseholderQR<MatrixXd> qr(root.asDiagonal() * g);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, r);
  const MatrixXd phi = root.cwiseInverse().asDiagonal() * q;
  VectorXd lam(r);
  for (Index k = 0; k < r; ++k) lam[k] = rng.uniform(0.5, 5.0);
  CovSurfaced c;
  c.t_grid = grid;
  c.values = phi * lam.asDiagonal() * phi.transpose();
  return c;
}

struct ShrinkageResult {
  Eigen::Vector2d lambda;
  Eigen::Vector2d sample_var;
  Eigen::Vector2d mc_se;
};

// Conditional scores of `n` sparse Sim-1 style subjects that all share the
// covariate z0, using the true basis, eigenvalues and noise variance.
inline ShrinkageResult pace_shrinkage(int n, double z0, std::uint64_t seed) {
  const Eigen::Vector2d lam = truth::sim1_lambda(z0);
  const VectorXd grid = VectorXd::LinSpaced(51, 0.0, 10.0);
  const EigenBasisd basis = basis_from(
      grid, {[](double t) { return truth::sim1_phi(0, t); }, [](double t) { return truth::sim1_phi(1, t); }},
      lam);
  const MeanField mean = zero_mean(0.0, 10.0, 1);
  MatrixXd scores(n, 2);
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i) + 1);
    const double a1 = std::sqrt(lam[0]) * rng.normal(), a2 = std::sqrt(lam[1]) * rng.normal();
    const auto idx = rng.sample_without_replacement(51, static_cast<int>(rng.uniform_int(4, 10)));
    Subject s{std::to_string(i), VectorXd::Constant(1, z0), {}};
    for (int j : idx) {
      const double t = grid[j];
      s.obs.push_back({t, a1 * truth::sim1_phi(0, t) + a2 * truth::sim1_phi(1, t) + rng.normal()});
    }
    scores.row(i) = pace_scores(s, mean, basis, lam, 1.0).transpose();
  }
  ShrinkageResult out;
  out.lambda = lam;
  for (int k = 0; k < 2; ++k) {
    const VectorXd c = scores.col(k).array() - scores.col(k).mean();
    const double v = c.squaredNorm() / (n - 1);
    const double m4 = c.array().pow(4).mean();
    out.sample_var[k] = v;
    out.mc_se[k] = std::sqrt(std::max(0.0, m4 - v * v) / n);
  }
  return out;
}

}  // namespace oracle
