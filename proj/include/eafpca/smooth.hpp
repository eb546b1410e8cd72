#pragma once

#include "eafpca/core.hpp"
#include "eafpca/data.hpp"
#include "eafpca/kernel.hpp"
#include "eafpca/local_linear.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace eafpca {

struct Bandwidths {
  double h_t = 0.0;
  VectorXd h_z;
  double h_gamma = 0.0;
  VectorXd h_lambda;

  // Throws unless every entry is positive and finite and the covariate
  // bandwidths have length p.
  void check(int p) const;
};

VectorXd uniform_grid(double lo, double hi, Index m);

// Tensor-product covariate grid: one ascending axis per covariate. Points are
// flattened with the first axis varying fastest.
struct CovariateGrid {
  std::vector<VectorXd> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  Index size() const;
  VectorXd point(Index flat) const;
  static CovariateGrid uniform(const FunctionalDataset& d, Index per_axis);
};

// mu(t, z) tabulated on t_grid x z_grid.
struct MeanField {
  VectorXd t_grid;
  CovariateGrid z_grid;
  MatrixXd values;  // t_grid.size() x z_grid.size()
  Bandwidths bandwidths;
  KernelSpec kernel;
  int degree = 1;

  // Multilinear interpolation; arguments outside the grid are clamped to it.
  double operator()(double t, const VectorXd& z) const;
};

// Symmetric surface V(s, t) on a common time grid.
template <typename Scalar>
struct CovSurface {
  Vector<Scalar> t_grid;
  Matrix<Scalar> values;
  Scalar h_gamma = Scalar(0);

  Index size() const { return t_grid.size(); }
  void symmetrize() { values = (values + values.transpose().eval()) / Scalar(2); }
  // Bilinear interpolation, clamped to the grid.
  Scalar operator()(Scalar s, Scalar t) const;
};

using CovSurfaced = CovSurface<double>;

struct NoiseEstimate {
  double sigma2 = 0.0;
  double raw = 0.0;  // before clamping at zero
};

// Local linear mean over (t, z) with per-subject weight 1/(n N_i).
MeanField estimate_mean(const FunctionalDataset& d, const Bandwidths& b, const KernelSpec& spec,
                        const VectorXd& t_grid, const CovariateGrid& z_grid);

// Same weighting with a local constant fit.
MeanField nadaraya_watson_mean(const FunctionalDataset& d, const Bandwidths& b,
                               const KernelSpec& spec, const VectorXd& t_grid,
                               const CovariateGrid& z_grid);

// Residuals Y_ij - mu(t_ij, z_i) for one subject.
VectorXd centered_values(const Subject& s, const MeanField& mean);

// Two-dimensional local linear fit to the off-diagonal raw products
// U_ij U_ik (ordered pairs j != k) with subject weight 1/(n N_i (N_i - 1)).
CovSurfaced estimate_pooled_cov(const FunctionalDataset& d, const MeanField& mean,
                                double h_gamma, const KernelSpec& spec, const VectorXd& t_grid);

// Average over the central 80% of the time grid of the smoothed raw diagonal
// U_ij^2 minus the pooled covariance diagonal, clamped at zero.
NoiseEstimate estimate_sigma2(const FunctionalDataset& d, const MeanField& mean,
                              const CovSurfaced& cov, const KernelSpec& spec = {});

// ---- implementation of templates ----

namespace detail {
// Index i and fraction f with x = (1 - f) grid[i] + f grid[i + 1], clamped.
template <typename Derived>
std::pair<Index, typename Derived::Scalar> bracket(const Eigen::MatrixBase<Derived>& grid,
                                                   typename Derived::Scalar x) {
  using Scalar = typename Derived::Scalar;
  const Index m = grid.size();
  if (m == 1 || x <= grid[0]) return {0, Scalar(0)};
  if (x >= grid[m - 1]) return {m - 2, Scalar(1)};
  const Scalar* b = grid.derived().data();
  Index hi = std::upper_bound(b, b + m, x) - b;
  Index lo = hi - 1;
  return {lo, (x - grid[lo]) / (grid[hi] - grid[lo])};
}
}  // namespace detail

template <typename Scalar>
Scalar CovSurface<Scalar>::operator()(Scalar s, Scalar t) const {
  if (size() == 1) return values(0, 0);
  auto [i, fs] = detail::bracket(t_grid, s);
  auto [j, ft] = detail::bracket(t_grid, t);
  return (1 - fs) * (1 - ft) * values(i, j) + fs * (1 - ft) * values(i + 1, j) +
         (1 - fs) * ft * values(i, j + 1) + fs * ft * values(i + 1, j + 1);
}

}  // namespace eafpca
