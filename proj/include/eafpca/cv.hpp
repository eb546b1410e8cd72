#pragma once

#include "eafpca/core.hpp"
#include "eafpca/data.hpp"
#include "eafpca/kernel.hpp"
#include "eafpca/smooth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eafpca {

// What a bandwidth candidate is scored on. Mean: held-out Y_ij against the
// fitted mean. Covariance: held-out off-diagonal U_ij U_ik against the
// pooled surface. Eigenvalue: held-out U_ij U_ik against the rank-L
// covariance sum_k lambda_k(z_i) phi_k(t_ij) phi_k(t_ik) with WLS
// eigenvalues fitted on the training folds.
enum class CvTarget { Mean, Covariance, Eigenvalue };

std::string to_string(CvTarget t);
CvTarget parse_cv_target(const std::string& s);

struct CvSettings {
  KernelSpec kernel;
  Index t_points = 51;
  Index z_points_per_axis = 11;
  Index components = 2;  // L for the eigenvalue target
};

struct CvResult {
  Bandwidths best;
  Index best_index = 0;
  std::vector<double> errors;  // average over folds; +inf when a fold failed
  MatrixXd fold_errors;        // candidates x folds
};

// Subject i goes to fold order[i] % folds after a seeded shuffle.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

// Subjects with fold == k (held_out) or != k.
FunctionalDataset fold_subset(const FunctionalDataset& d, const std::vector<int>& fold, int k,
                              bool held_out);

// Held-out squared prediction error of one candidate on one split.
double cv_fold_error(const FunctionalDataset& train, const FunctionalDataset& test,
                     CvTarget target, const Bandwidths& b, const CvSettings& settings);

// Errors within 1e-9 relative (or 1e-18 absolute) of the minimum count as
// ties, resolved toward the lexicographically smallest (h_t, h_z, h_gamma,
// h_lambda).
CvResult cv_bandwidth(const FunctionalDataset& d, CvTarget target,
                      const std::vector<Bandwidths>& candidates, int folds, std::uint64_t seed,
                      const CvSettings& settings = {});

// Lexicographic order on (h_t, h_z..., h_gamma, h_lambda...).
bool bandwidth_less(const Bandwidths& a, const Bandwidths& b);

}  // namespace eafpca
