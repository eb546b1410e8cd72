#pragma once

#include "eafpca/core.hpp"
#include "eafpca/kernel.hpp"

#include <span>
#include <string>
#include <vector>

namespace eafpca {

template <typename Scalar>
struct WeightedSample {
  Vector<Scalar> x;
  Scalar y;
  Scalar w;
};

inline constexpr int kMaxLocalDim = 8;

// Weighted normal equations of y ~ b0 + b1'(x - query) / h, accumulated one
// sample at a time. Differences are pre-scaled by the bandwidth so the system
// is dimensionless; the intercept is unaffected by that scaling.
// degree 0 gives the Nadaraya-Watson (local constant) fit.
template <typename Scalar>
class LocalLinearSystem {
 public:
  using Gram = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLocalDim + 1,
                             kMaxLocalDim + 1>;
  using Rhs = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxLocalDim + 1, 1>;

  LocalLinearSystem(Index dim, int degree = 1)
      : dim_(dim), size_(degree == 0 ? 1 : dim + 1) {
    if (dim > kMaxLocalDim)
      throw DimensionError("smooth.local_linear_fit", "at most 8 regressors supported");
    gram_.setZero(size_, size_);
    rhs_.setZero(size_);
  }

  // `scaled_diff` holds (x_k - query_k) / h_k for k < dim; `w` is the full
  // sample weight including the kernel factor.
  void add(const Scalar* scaled_diff, Scalar y, Scalar w) {
    if (!(w > Scalar(0))) return;
    ++count_;
    Scalar v[kMaxLocalDim + 1];
    v[0] = Scalar(1);
    for (Index k = 1; k < size_; ++k) v[k] = scaled_diff[k - 1];
    for (Index a = 0; a < size_; ++a) {
      const Scalar wa = w * v[a];
      rhs_[a] += wa * y;
      for (Index b = a; b < size_; ++b) gram_(a, b) += wa * v[b];
    }
  }

  Index count() const { return count_; }
  Index parameters() const { return size_; }

  // Returns b0. Throws InsufficientLocalData with `query` when fewer than
  // `parameters()` samples had positive weight.
  Scalar solve(const std::vector<double>& query, Scalar ridge_factor = Scalar(kRidgeFactor),
               const char* where = "smooth.local_linear_fit") const {
    if (count_ < size_) throw InsufficientLocalData(where, query);
    if (size_ == 1) return rhs_[0] / gram_(0, 0);
    Gram g = gram_.template selfadjointView<Eigen::Upper>();
    Eigen::LLT<Gram> llt(g);
    if (llt.info() != Eigen::Success || !(llt.rcond() > Scalar(1e-13))) {
      const Scalar ridge = ridge_factor * g.trace();
      g.diagonal().array() += ridge;
      llt.compute(g);
      if (llt.info() != Eigen::Success) throw InsufficientLocalData(where, query);
    }
    return llt.solve(Rhs(rhs_))[0];
  }

 private:
  Index dim_;
  Index size_;
  Index count_ = 0;
  Gram gram_;
  Rhs rhs_;
};

// Weighted local linear (degree 1) or local constant (degree 0) estimate at
// `query`: sample weights are w_i * prod_k K_{h_k}(x_ik - query_k).
template <typename Scalar>
Scalar local_linear_fit(std::span<const WeightedSample<Scalar>> samples,
                        const Vector<Scalar>& query, const Vector<Scalar>& h,
                        const KernelSpec& spec, Scalar ridge_factor = Scalar(kRidgeFactor),
                        int degree = 1) {
  const Index d = query.size();
  if (h.size() != d)
    throw DimensionError("smooth.local_linear_fit", "query and bandwidth differ in length");
  if ((h.array() <= Scalar(0)).any())
    throw Error("smooth.local_linear_fit", "bandwidths must be positive");
  LocalLinearSystem<Scalar> sys(d, degree);
  Scalar diff[kMaxLocalDim];
  for (const auto& s : samples) {
    if (s.x.size() != d)
      throw DimensionError("smooth.local_linear_fit", "sample and query differ in length");
    Scalar w = s.w;
    for (Index k = 0; k < d && w > Scalar(0); ++k) {
      diff[k] = (s.x[k] - query[k]) / h[k];
      w *= eval_kernel(spec, diff[k]) / h[k];
    }
    sys.add(diff, s.y, w);
  }
  std::vector<double> q(query.data(), query.data() + d);
  return sys.solve(q, ridge_factor);
}

template <typename Scalar>
Scalar nadaraya_watson_fit(std::span<const WeightedSample<Scalar>> samples,
                           const Vector<Scalar>& query, const Vector<Scalar>& h,
                           const KernelSpec& spec) {
  return local_linear_fit(samples, query, h, spec, Scalar(kRidgeFactor), 0);
}

}  // namespace eafpca
