#pragma once

#include "eafpca/core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace eafpca {

enum class KernelFamily { Epanechnikov, Uniform, Gaussian };

// Unscaled kernel K(u). Epanechnikov and Uniform are symmetric densities on
// [-1, 1]. Gaussian has unbounded support; it is provided for Nadaraya-Watson
// style smoothing and field smoothing but does not satisfy the compact-support
// requirement of the local linear theory.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;

  // Integral of u^2 K(u).
  constexpr double second_moment() const {
    switch (family) {
      case KernelFamily::Epanechnikov: return 0.2;
      case KernelFamily::Uniform: return 1.0 / 3.0;
      case KernelFamily::Gaussian: return 1.0;
    }
    return 0.0;
  }

  // |u| beyond which K(u) is treated as zero. Gaussian weights past 8 sd are
  // below 1.3e-14 of the peak and are dropped for neighbor searches.
  constexpr double support_radius() const {
    return family == KernelFamily::Gaussian ? 8.0 : 1.0;
  }

  constexpr bool compact() const { return family != KernelFamily::Gaussian; }
};

std::string to_string(KernelFamily f);
KernelFamily parse_kernel_family(const std::string& s);

template <typename Scalar>
Scalar eval_kernel(const KernelSpec& spec, Scalar u) {
  using std::abs;
  using std::exp;
  switch (spec.family) {
    case KernelFamily::Epanechnikov:
      return abs(u) <= Scalar(1) ? Scalar(0.75) * (Scalar(1) - u * u) : Scalar(0);
    case KernelFamily::Uniform:
      return abs(u) <= Scalar(1) ? Scalar(0.5) : Scalar(0);
    case KernelFamily::Gaussian:
      return exp(-u * u / Scalar(2)) / Scalar(std::sqrt(2.0 * std::numbers::pi));
  }
  return Scalar(0);
}

// K_h(d) = K(d / h) / h.
template <typename Scalar>
Scalar scaled_kernel(const KernelSpec& spec, Scalar diff, Scalar h) {
  return eval_kernel(spec, diff / h) / h;
}

// prod_k K(diffs_k / h_k) / h_k.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar product_weight(const KernelSpec& spec,
                                         const Eigen::MatrixBase<DerivedA>& diffs,
                                         const Eigen::MatrixBase<DerivedB>& h) {
  using Scalar = typename DerivedA::Scalar;
  if (diffs.size() != h.size())
    throw DimensionError("kernel.product_weight", "diffs and bandwidths differ in length");
  Scalar w(1);
  for (Index k = 0; k < diffs.size(); ++k) {
    w *= scaled_kernel<Scalar>(spec, diffs[k], h[k]);
    if (w == Scalar(0)) break;
  }
  return w;
}

}  // namespace eafpca
