#pragma once

#include "eafpca/core.hpp"
#include "eafpca/smooth.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace eafpca {

// Trapezoid weights of a (possibly non-uniform) ascending grid.
template <typename Derived>
Vector<typename Derived::Scalar> trapezoid_weights(const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  const Index m = grid.size();
  Vector<Scalar> w = Vector<Scalar>::Zero(m);
  for (Index g = 0; g + 1 < m; ++g) {
    const Scalar half = (grid[g + 1] - grid[g]) / Scalar(2);
    w[g] += half;
    w[g + 1] += half;
  }
  return w;
}

// Discretized eigenfunctions of a covariance surface. Column k of `phi` holds
// phi_k on t_grid, normalized so that sum_g w_g phi_k(g)^2 = 1.
template <typename Scalar>
struct EigenBasis {
  Vector<Scalar> t_grid;
  Vector<Scalar> quad_weights;
  Matrix<Scalar> phi;          // m x L
  Vector<Scalar> lambda_star;  // nonincreasing, clamped at zero
  Vector<Scalar> fve;          // cumulative fraction of variance explained
  std::vector<std::string> warnings;

  Index components() const { return phi.cols(); }

  // Copy restricted to the leading L components.
  EigenBasis truncated(Index L) const {
    EigenBasis b = *this;
    b.phi = phi.leftCols(L);
    b.lambda_star = lambda_star.head(L);
    b.fve = fve.head(L);
    return b;
  }
};

using EigenBasisd = EigenBasis<double>;

// Flips phi_k so sum_g w_g phi_k(g) >= 0; when that sum is within 1e-8 of zero
// the entry of largest magnitude is made positive instead.
template <typename Scalar>
void apply_sign_convention(EigenBasis<Scalar>& basis) {
  for (Index k = 0; k < basis.phi.cols(); ++k) {
    auto col = basis.phi.col(k);
    const Scalar integral = basis.quad_weights.dot(col);
    bool flip;
    if (std::abs(integral) > Scalar(1e-8)) {
      flip = integral < Scalar(0);
    } else {
      Index arg;
      col.cwiseAbs().maxCoeff(&arg);
      flip = col[arg] < Scalar(0);
    }
    if (flip) col = -col;
  }
}

// Solves the quadrature-discretized eigen-equation
//   sum_g w_g V(s, g) phi(g) = lambda phi(s)
// through the symmetric matrix W^{1/2} V W^{1/2}.
template <typename Scalar>
EigenBasis<Scalar> eigendecompose(const CovSurface<Scalar>& cov) {
  const char* where = "eigen.eigendecompose";
  const Index m = cov.size();
  if (m < 2) throw Error(where, "time grid needs at least two points");
  if (cov.values.rows() != m || cov.values.cols() != m)
    throw DimensionError(where, "surface values do not match the time grid");
  if (!(cov.t_grid[m - 1] > cov.t_grid[0])) throw Error(where, "time grid has zero width");
  if (!cov.values.allFinite()) throw Error(where, "surface has non-finite values");
  const Scalar asym = (cov.values - cov.values.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-12)) throw Error(where, "surface is not symmetric");

  EigenBasis<Scalar> basis;
  basis.t_grid = cov.t_grid;
  basis.quad_weights = trapezoid_weights(cov.t_grid);
  if ((basis.quad_weights.array() <= Scalar(0)).any())
    throw Error(where, "time grid must be strictly increasing");
  const Vector<Scalar> root = basis.quad_weights.cwiseSqrt();

  Matrix<Scalar> a = root.asDiagonal() * cov.values * root.asDiagonal();
  a = (a + a.transpose().eval()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(a);
  if (solver.info() != Eigen::Success) throw Error(where, "eigensolver did not converge");

  // Eigen returns ascending eigenvalues; reverse into nonincreasing order.
  // The stable sort keeps the solver's order for exact ties.
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return ev[x] > ev[y]; });

  basis.phi.resize(m, m);
  basis.lambda_star.resize(m);
  for (Index k = 0; k < m; ++k) {
    basis.phi.col(k) = solver.eigenvectors().col(order[k]).cwiseQuotient(root);
    const Scalar norm2 = (basis.quad_weights.array() * basis.phi.col(k).array().square()).sum();
    basis.phi.col(k) /= std::sqrt(norm2);
    basis.lambda_star[k] = std::max(ev[order[k]], Scalar(0));
  }
  apply_sign_convention(basis);

  const Scalar total = basis.lambda_star.sum();
  basis.fve.resize(m);
  Scalar running(0);
  for (Index k = 0; k < m; ++k) {
    running += basis.lambda_star[k];
    basis.fve[k] = total > Scalar(0) ? running / total : Scalar(0);
  }
  const Scalar scale = basis.lambda_star[0];
  for (Index k = 0; k + 1 < m && basis.lambda_star[k + 1] > Scalar(0); ++k) {
    if (basis.lambda_star[k] - basis.lambda_star[k + 1] <= Scalar(1e-10) * scale) {
      basis.warnings.push_back("tied pooled eigenvalues at components " + std::to_string(k + 1) +
                               " and " + std::to_string(k + 2));
    }
  }
  return basis;
}

// Smallest L whose cumulative variance share reaches fve_target.
template <typename Scalar>
Index select_truncation(const EigenBasis<Scalar>& basis, Scalar fve_target) {
  const char* where = "eigen.select_truncation";
  if (!(fve_target > Scalar(0) && fve_target <= Scalar(1)))
    throw Error(where, "fve target must lie in (0, 1]");
  const Scalar total = basis.lambda_star.sum();
  if (!(total > Scalar(0))) throw Error(where, "all eigenvalues are zero");
  Scalar running(0);
  for (Index k = 0; k < basis.lambda_star.size(); ++k) {
    running += basis.lambda_star[k];
    // running / total >= target, inclusive.
    if (running >= fve_target * total) return k + 1;
  }
  return basis.lambda_star.size();
}

// Linear interpolation of phi_k at t; exact at grid nodes.
template <typename Scalar>
Scalar eval_eigenfunction(const EigenBasis<Scalar>& basis, Index k, Scalar t) {
  const char* where = "eigen.eval_eigenfunction";
  if (k < 0 || k >= basis.components()) throw Error(where, "component index out of range");
  const Index m = basis.t_grid.size();
  if (!(t >= basis.t_grid[0] && t <= basis.t_grid[m - 1]))
    throw Error(where, "t = " + std::to_string(t) + " outside the basis grid");
  auto [g, f] = detail::bracket(basis.t_grid, t);
  if (f == Scalar(0)) return basis.phi(g, k);
  if (f == Scalar(1)) return basis.phi(g + 1, k);
  return (Scalar(1) - f) * basis.phi(g, k) + f * basis.phi(g + 1, k);
}

// sum_k lambda_k phi_k(s) phi_k(t) over the first lambda.size() components.
template <typename Scalar, typename Derived>
CovSurface<Scalar> reconstruct_cov(const EigenBasis<Scalar>& basis,
                                   const Eigen::MatrixBase<Derived>& lambda) {
  if (lambda.size() > basis.components())
    throw DimensionError("eigenmap.reconstruct_cov", "more eigenvalues than basis components");
  if (!lambda.allFinite()) throw Error("eigenmap.reconstruct_cov", "eigenvalues must be finite");
  const auto phi = basis.phi.leftCols(lambda.size());
  CovSurface<Scalar> out;
  out.t_grid = basis.t_grid;
  out.values = phi * lambda.asDiagonal() * phi.transpose();
  out.symmetrize();
  return out;
}

}  // namespace eafpca
