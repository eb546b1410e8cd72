#pragma once

#include "eafpca/core.hpp"

#include <cstdint>
#include <vector>

namespace eafpca {

struct KMeansOptions {
  int k = 3;
  int restarts = 20;
  int max_iter = 300;
  double tol = 1e-6;  // relative inertia change
  std::uint64_t seed = 0;
  bool standardize = false;
};

struct Clustering {
  std::vector<int> labels;
  MatrixXd centroids;  // k x L, in the units of the input rows
  double inertia = 0.0;
  int k = 0;
  int restarts = 0;
  std::uint64_t seed = 0;
  int best_restart = 0;
  // Inertia after every assignment step of the winning restart. With
  // standardize, inertia is measured in the standardized space.
  std::vector<double> trace;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// inertia (ties go to the lowest restart index). Restart r draws from
// Rng(seed, r + 1).
Clustering kmeans(const MatrixXd& rows, const KMeansOptions& options);

// Sum of squared distances of rows to their assigned centroids.
double inertia(const MatrixXd& rows, const MatrixXd& centroids, const std::vector<int>& labels);

// counts(c, t): points in predicted cluster c with truth class t.
Eigen::MatrixXi confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int n_clusters, int n_classes);

// Cluster-to-class assignment maximizing the total number of matched points.
// matching[c] is the class of cluster c, or -1 when there are more clusters
// than classes and c is left over.
std::vector<int> match_clusters(const std::vector<int>& pred, const std::vector<int>& truth,
                                int n_clusters = -1, int n_classes = -1);

// Minimum-cost assignment of rows to columns (rows <= cols). Returns the
// column of each row.
std::vector<int> hungarian(const MatrixXd& cost);

}  // namespace eafpca
