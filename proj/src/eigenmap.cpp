#include "eafpca/eigenmap.hpp"

#include "eafpca/local_linear.hpp"
#include "eafpca/parallel.hpp"

#include <fmt/format.h>

#include <cmath>
#include <optional>

namespace eafpca {

namespace {

MatrixXd eigenfunction_values(const Subject& s, const EigenBasisd& basis, Index L) {
  MatrixXd phi(s.n_obs(), L);
  for (int j = 0; j < s.n_obs(); ++j)
    for (Index l = 0; l < L; ++l) phi(j, l) = eval_eigenfunction(basis, l, s.obs[j].t);
  return phi;
}

void check_components(const EigenBasisd& basis, Index L, const char* where) {
  if (L < 1 || L > basis.components())
    throw Error(where, fmt::format("L = {} outside [1, {}]", L, basis.components()));
}

}  // namespace

DesignBlock build_design(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                         Index L) {
  const char* where = "eigenmap.build_design";
  check_components(basis, L, where);
  const int m = s.n_obs();
  if (m < 2) throw Error(where, fmt::format("subject '{}' has fewer than two observations", s.id));
  const VectorXd u = centered_values(s, mean);
  const MatrixXd phi = eigenfunction_values(s, basis, L);
  const Index rows = static_cast<Index>(m) * (m - 1) / 2;
  DesignBlock block{s.id, s.z, MatrixXd(rows, L), VectorXd(rows)};
  Index r = 0;
  for (int j = 0; j < m; ++j)
    for (int k = j + 1; k < m; ++k, ++r) {
      block.X.row(r) = phi.row(j).cwiseProduct(phi.row(k));
      block.Y[r] = u[j] * u[k];
    }
  return block;
}

DesignSummary summarize(const DesignBlock& block) {
  return {block.z, block.X.transpose() * block.X, block.X.transpose() * block.Y, block.X.rows()};
}

WlsEstimate wls_eigenvalues(std::span<const DesignSummary> blocks, const VectorXd& z,
                            const VectorXd& h_lambda, const KernelSpec& spec, bool clamp) {
  const char* where = "eigenmap.wls_eigenvalues";
  if (blocks.empty()) throw EmptyNeighborhood(where, {z.data(), z.data() + z.size()});
  const Index L = blocks.front().gram.rows();
  if (h_lambda.size() != z.size()) throw DimensionError(where, "h_lambda and z differ in length");
  MatrixXd gram = MatrixXd::Zero(L, L);
  VectorXd cross = VectorXd::Zero(L);
  double total = 0.0;
  for (const auto& b : blocks) {
    if (b.z.size() != z.size()) throw DimensionError(where, "covariate dimension mismatch");
    const double w = product_weight(spec, b.z - z, h_lambda);
    if (w <= 0.0 || b.rows == 0) continue;
    gram.noalias() += w * b.gram;
    cross.noalias() += w * b.cross;
    total += w;
  }
  if (!(total > 0.0)) throw EmptyNeighborhood(where, {z.data(), z.data() + z.size()});

  WlsEstimate est;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
    gram.diagonal().array() += kRidgeFactor * gram.trace();
    llt.compute(gram);
    est.ridged = true;
    if (llt.info() != Eigen::Success || !(llt.rcond() > 0.0))
      throw Error(where, "weighted Gram matrix is singular");
  }
  est.raw = llt.solve(cross);
  est.lambda = clamp ? est.raw.cwiseMax(0.0) : est.raw;
  return est;
}

WlsEstimate wls_eigenvalues(std::span<const DesignBlock> blocks, const VectorXd& z,
                            const VectorXd& h_lambda, const KernelSpec& spec, bool clamp) {
  std::vector<DesignSummary> summaries;
  summaries.reserve(blocks.size());
  for (const auto& b : blocks) summaries.push_back(summarize(b));
  return wls_eigenvalues(std::span<const DesignSummary>(summaries), z, h_lambda, spec, clamp);
}

VectorXd pc_scores_trapezoid(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                             Index L) {
  const char* where = "eigenmap.pc_scores_trapezoid";
  check_components(basis, L, where);
  if (s.n_obs() < 2) throw Error(where, fmt::format("subject '{}' has fewer than two observations", s.id));
  const VectorXd u = centered_values(s, mean);
  const MatrixXd phi = eigenfunction_values(s, basis, L);
  VectorXd a = VectorXd::Zero(L);
  for (int j = 0; j + 1 < s.n_obs(); ++j) {
    const double dt = s.obs[j + 1].t - s.obs[j].t;
    a += (u[j] * phi.row(j) + u[j + 1] * phi.row(j + 1)).transpose() * (dt / 2.0);
  }
  return a;
}

VectorXd pace_scores(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                     const VectorXd& lambda_at_z, double sigma2) {
  const char* where = "eigenmap.pace_scores";
  const Index L = lambda_at_z.size();
  check_components(basis, L, where);
  if (s.n_obs() < 1) throw Error(where, "subject has no observations");
  if (!(sigma2 >= 0.0)) throw Error(where, "sigma2 must be nonnegative");
  if ((lambda_at_z.array() < 0.0).any()) throw Error(where, "eigenvalues must be nonnegative");

  const VectorXd u = centered_values(s, mean);
  const MatrixXd phi = eigenfunction_values(s, basis, L);
  MatrixXd sigma = phi * lambda_at_z.asDiagonal() * phi.transpose();
  sigma.diagonal().array() += sigma2;

  VectorXd solved;
  Eigen::LLT<MatrixXd> llt(sigma);
  if (sigma2 > 0.0 && llt.info() == Eigen::Success) {
    solved = llt.solve(u);
  } else {
    // Symmetric pseudo-inverse with relative tolerance 1e-10.
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
    if (es.info() != Eigen::Success) throw Error(where, "eigensolver failed");
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    VectorXd inv = VectorXd::Zero(es.eigenvalues().size());
    for (Index i = 0; i < inv.size(); ++i)
      if (es.eigenvalues()[i] > 1e-10 * top) inv[i] = 1.0 / es.eigenvalues()[i];
    solved = es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * u);
  }
  VectorXd a = lambda_at_z.asDiagonal() * (phi.transpose() * solved);
  if (!a.allFinite()) throw Error(where, "non-finite conditional scores");
  return a;
}

VectorXd pc_eigenvalues(const ScoreSet& scores, const VectorXd& z, const VectorXd& h_lambda,
                        const KernelSpec& spec) {
  const char* where = "eigenmap.pc_eigenvalues";
  const Index p = z.size();
  const Index L = scores.scores.cols();
  if (h_lambda.size() != p) throw DimensionError(where, "h_lambda and z differ in length");
  std::vector<LocalLinearSystem<double>> systems(L, LocalLinearSystem<double>(p));
  double diff[kMaxLocalDim];
  for (std::size_t i = 0; i < scores.z.size(); ++i) {
    const VectorXd& zi = scores.z[i];
    double w = 1.0;
    for (Index k = 0; k < p && w > 0.0; ++k) {
      diff[k] = (zi[k] - z[k]) / h_lambda[k];
      w *= eval_kernel(spec, diff[k]) / h_lambda[k];
    }
    if (w <= 0.0) continue;
    for (Index l = 0; l < L; ++l) {
      const double a = scores.scores(static_cast<Index>(i), l);
      systems[l].add(diff, a * a, w);
    }
  }
  VectorXd out(L);
  const std::vector<double> q(z.data(), z.data() + p);
  for (Index l = 0; l < L; ++l) out[l] = systems[l].solve(q, kRidgeFactor, where);
  return out;
}

std::string to_string(FieldMethod m) {
  switch (m) {
    case FieldMethod::WLS: return "WLS";
    case FieldMethod::PC: return "PC";
    case FieldMethod::PC2: return "PC2";
  }
  return "?";
}

FieldMethod parse_field_method(const std::string& s) {
  if (s == "WLS" || s == "wls") return FieldMethod::WLS;
  if (s == "PC" || s == "pc") return FieldMethod::PC;
  if (s == "PC2" || s == "pc2") return FieldMethod::PC2;
  throw Error("eigenmap.method", "unknown method '" + s + "' (expected WLS, PC or PC2)");
}

std::vector<DesignSummary> design_summaries(const FunctionalDataset& d, const MeanField& mean,
                                            const EigenBasisd& basis, Index L,
                                            std::vector<std::string>* warnings) {
  std::vector<std::optional<DesignSummary>> slots(d.size());
  parallel_for(static_cast<std::ptrdiff_t>(d.size()), [&](std::ptrdiff_t i) {
    const Subject& s = d.subject(static_cast<std::size_t>(i));
    if (s.n_obs() >= 2) slots[i] = summarize(build_design(s, mean, basis, L));
  });
  std::vector<DesignSummary> out;
  std::size_t skipped = 0;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
    else ++skipped;
  }
  if (skipped && warnings)
    warnings->push_back(fmt::format("{} subject(s) with fewer than two observations skipped", skipped));
  return out;
}

ScoreSet predict_scores(const FunctionalDataset& d, const MeanField& mean,
                        const EigenBasisd& basis, Index L, ScoreMethod method, double sigma2,
                        const MatrixXd& lambda_rows) {
  ScoreSet set;
  set.method = method;
  set.scores.resize(static_cast<Index>(d.size()), L);
  set.z.reserve(d.size());
  for (const auto& s : d.subjects()) set.z.push_back(s.z);
  const VectorXd pooled = basis.lambda_star.head(L);
  parallel_for(static_cast<std::ptrdiff_t>(d.size()), [&](std::ptrdiff_t i) {
    const Subject& s = d.subject(static_cast<std::size_t>(i));
    if (method == ScoreMethod::Trapezoid) {
      set.scores.row(i) = pc_scores_trapezoid(s, mean, basis, L).transpose();
    } else {
      const VectorXd lam = lambda_rows.size() ? VectorXd(lambda_rows.row(i).transpose()) : pooled;
      set.scores.row(i) = pace_scores(s, mean, basis, lam, sigma2).transpose();
    }
  });
  return set;
}

EigenvalueField eigenvalue_field(const FunctionalDataset& d, const MeanField& mean,
                                 const EigenBasisd& basis, Index L, FieldMethod method,
                                 const std::vector<VectorXd>& z_points,
                                 const FieldOptions& options) {
  const char* where = "eigenmap.eigenvalue_field";
  check_components(basis, L, where);
  if (method == FieldMethod::PC2) throw Error(where, "use squared_score_field for PC2");
  EigenvalueField field;
  field.method = method;

  std::vector<DesignSummary> summaries;
  ScoreSet scores;
  if (method == FieldMethod::WLS) {
    summaries = design_summaries(d, mean, basis, L, &field.warnings);
  } else {
    const SamplingScheme scheme = classify_scheme(d, options.dense_threshold);
    if (scheme.kind == SchemeKind::Dense) {
      scores = predict_scores(d, mean, basis, L, ScoreMethod::Trapezoid, 0.0);
    } else {
      field.warnings.push_back(fmt::format(
          "PC-based eigenvalues on sparse data (median N_i = {}); squared conditional scores "
          "underestimate the eigenvalues, the estimator is only recommended for dense data",
          scheme.median_obs));
      MatrixXd lambda_rows;
      if (options.pace_covariate_lambda) {
        auto own = design_summaries(d, mean, basis, L);
        lambda_rows.resize(static_cast<Index>(d.size()), L);
        for (std::size_t i = 0; i < d.size(); ++i) {
          lambda_rows.row(static_cast<Index>(i)) =
              wls_eigenvalues(std::span<const DesignSummary>(own), d.subject(i).z,
                              options.h_lambda, options.kernel, true)
                  .lambda.transpose();
        }
      }
      scores = predict_scores(d, mean, basis, L, ScoreMethod::Conditional, options.sigma2,
                              lambda_rows);
    }
  }

  const auto npts = static_cast<std::ptrdiff_t>(z_points.size());
  std::vector<std::optional<WlsEstimate>> results(z_points.size());
  std::vector<std::string> errors(z_points.size());
  parallel_for(npts, [&](std::ptrdiff_t i) {
    try {
      if (method == FieldMethod::WLS) {
        results[i] = wls_eigenvalues(std::span<const DesignSummary>(summaries), z_points[i],
                                     options.h_lambda, options.kernel, options.clamp);
      } else {
        WlsEstimate e;
        e.raw = pc_eigenvalues(scores, z_points[i], options.h_lambda, options.kernel);
        e.lambda = options.clamp ? e.raw.cwiseMax(0.0) : e.raw;
        results[i] = std::move(e);
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  std::vector<Index> ok;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i]) ok.push_back(static_cast<Index>(i));
    else field.failures.push_back({z_points[i], errors[i]});
  }
  if (!z_points.empty() &&
      static_cast<double>(field.failures.size()) >
          options.max_failure_fraction * static_cast<double>(z_points.size())) {
    throw Error(where, fmt::format("{} of {} covariate points failed; first: {}",
                                   field.failures.size(), z_points.size(),
                                   field.failures.front().message));
  }
  const auto rows = static_cast<Index>(ok.size());
  field.lambda.resize(rows, L);
  field.raw.resize(rows, L);
  field.clamped.resize(rows, L);
  for (Index r = 0; r < rows; ++r) {
    const WlsEstimate& e = *results[ok[r]];
    field.z_points.push_back(z_points[ok[r]]);
    field.lambda.row(r) = e.lambda.transpose();
    field.raw.row(r) = e.raw.transpose();
    field.clamped.row(r) = (e.lambda.array() != e.raw.array()).transpose();
  }
  return field;
}

EigenvalueField squared_score_field(const FunctionalDataset& d, const MeanField& mean,
                                    const EigenBasisd& basis, Index L) {
  const ScoreSet scores = predict_scores(d, mean, basis, L, ScoreMethod::Trapezoid, 0.0);
  EigenvalueField field;
  field.method = FieldMethod::PC2;
  field.z_points = scores.z;
  field.lambda = scores.scores.array().square().matrix();
  field.raw = field.lambda;
  field.clamped.setConstant(field.lambda.rows(), L, false);
  return field;
}

}  // namespace eafpca
