#pragma once

#include "eafpca/core.hpp"
#include "eafpca/data.hpp"
#include "eafpca/eigen_basis.hpp"
#include "eafpca/kernel.hpp"
#include "eafpca/smooth.hpp"

#include <span>
#include <string>
#include <vector>

namespace eafpca {

// Regression of one subject's off-diagonal raw products on eigenfunction
// products: rows enumerate pairs j < k lexicographically,
//   X(row, l) = phi_l(t_j) phi_l(t_k),  Y(row) = U_j U_k.
struct DesignBlock {
  std::string subject_id;
  VectorXd z;
  MatrixXd X;
  VectorXd Y;
};

// Sufficient statistics X'X and X'Y of a design block. The WLS kernel weight
// is constant within a subject, so these reproduce the stacked solve exactly.
struct DesignSummary {
  VectorXd z;
  MatrixXd gram;
  VectorXd cross;
  Index rows = 0;
};

DesignBlock build_design(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                         Index L);
DesignSummary summarize(const DesignBlock& block);

struct WlsEstimate {
  VectorXd lambda;  // clamped at zero when requested
  VectorXd raw;     // before clamping
  bool ridged = false;
};

// Kernel-weighted least squares
//   lambda(z) = (X' W_z X)^{-1} X' W_z Y,
// with subject weight prod_k K_{h_k}(z_ik - z_k) replicated over its rows.
WlsEstimate wls_eigenvalues(std::span<const DesignSummary> blocks, const VectorXd& z,
                            const VectorXd& h_lambda, const KernelSpec& spec, bool clamp = true);
WlsEstimate wls_eigenvalues(std::span<const DesignBlock> blocks, const VectorXd& z,
                            const VectorXd& h_lambda, const KernelSpec& spec, bool clamp = true);

enum class ScoreMethod { Trapezoid, Conditional };

struct ScoreSet {
  MatrixXd scores;  // subjects x L
  std::vector<VectorXd> z;
  ScoreMethod method = ScoreMethod::Trapezoid;
};

// Trapezoid-rule integral of U(t) phi_k(t) over the subject's own times.
VectorXd pc_scores_trapezoid(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                             Index L);

// Best linear predictor Lambda Phi' (Phi Lambda Phi' + sigma2 I)^{-1} U.
VectorXd pace_scores(const Subject& s, const MeanField& mean, const EigenBasisd& basis,
                     const VectorXd& lambda_at_z, double sigma2);

// Local linear smooth of squared scores over the covariates (unit weights).
VectorXd pc_eigenvalues(const ScoreSet& scores, const VectorXd& z, const VectorXd& h_lambda,
                        const KernelSpec& spec);

enum class FieldMethod { WLS, PC, PC2 };

std::string to_string(FieldMethod m);
FieldMethod parse_field_method(const std::string& s);

struct FieldOptions {
  VectorXd h_lambda;
  KernelSpec kernel;
  bool clamp = true;
  double sigma2 = 0.0;                       // noise variance for conditional scores
  int dense_threshold = kDefaultDenseThreshold;
  bool pace_covariate_lambda = false;        // second pass with WLS lambda(z_i)
  double max_failure_fraction = 0.1;
};

struct FieldFailure {
  VectorXd z;
  std::string message;
};

// Covariate-specific eigenvalues at a list of covariate points. Points whose
// local problem fails are omitted from `z_points` and listed in `failures`.
struct EigenvalueField {
  std::vector<VectorXd> z_points;
  MatrixXd lambda;  // z_points.size() x L
  MatrixXd raw;     // pre-clamp values
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> clamped;
  FieldMethod method = FieldMethod::WLS;
  std::vector<FieldFailure> failures;
  std::vector<std::string> warnings;
};

std::vector<DesignSummary> design_summaries(const FunctionalDataset& d, const MeanField& mean,
                                            const EigenBasisd& basis, Index L,
                                            std::vector<std::string>* warnings = nullptr);

// Scores of every subject. Dense data uses the trapezoid rule, sparse data the
// conditional predictor seeded with `lambda_rows` (one row per subject) or
// with the pooled eigenvalues when it is empty.
ScoreSet predict_scores(const FunctionalDataset& d, const MeanField& mean,
                        const EigenBasisd& basis, Index L, ScoreMethod method, double sigma2,
                        const MatrixXd& lambda_rows = {});

// Batch driver over z points for the WLS and PC estimators.
EigenvalueField eigenvalue_field(const FunctionalDataset& d, const MeanField& mean,
                                 const EigenBasisd& basis, Index L, FieldMethod method,
                                 const std::vector<VectorXd>& z_points,
                                 const FieldOptions& options);

// Unsmoothed squared trapezoid scores at each subject's own covariate, the
// PC^2 features used for clustering comparisons.
EigenvalueField squared_score_field(const FunctionalDataset& d, const MeanField& mean,
                                    const EigenBasisd& basis, Index L);

}  // namespace eafpca
