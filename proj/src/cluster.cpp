#include "eafpca/cluster.hpp"

#include "eafpca/parallel.hpp"
#include "eafpca/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eafpca {

namespace {

struct Run {
  std::vector<int> labels;
  MatrixXd centroids;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

double assign(const MatrixXd& x, const MatrixXd& c, std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    total += best;
  }
  return total;
}

MatrixXd seed_plus_plus(const MatrixXd& x, int k, Rng& rng) {
  const Index n = x.rows();
  MatrixXd c(k, x.cols());
  c.row(0) = x.row(static_cast<Index>(rng.uniform_int(0, n - 1)));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = (x.row(i) - c.row(0)).squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.uniform_int(0, n - 1));
    }
    c.row(j) = x.row(pick);
    for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.row(i) - c.row(j)).squaredNorm());
  }
  return c;
}

// Centroid update; empty clusters take the point farthest from its centroid.
MatrixXd update(const MatrixXd& x, const MatrixXd& old, std::vector<int>& labels, int k) {
  MatrixXd c = MatrixXd::Zero(k, x.cols());
  std::vector<Index> count(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    c.row(labels[i]) += x.row(i);
    ++count[static_cast<std::size_t>(labels[i])];
  }
  for (int j = 0; j < k; ++j) {
    if (count[static_cast<std::size_t>(j)] > 0) {
      c.row(j) /= static_cast<double>(count[static_cast<std::size_t>(j)]);
      continue;
    }
    Index far = 0;
    double best = -1.0;
    for (Index i = 0; i < x.rows(); ++i) {
      if (count[static_cast<std::size_t>(labels[i])] <= 1) continue;
      const double d = (x.row(i) - old.row(labels[i])).squaredNorm();
      if (d > best) {
        best = d;
        far = i;
      }
    }
    if (best < 0.0) {
      c.row(j) = old.row(j);
      continue;
    }
    --count[static_cast<std::size_t>(labels[far])];
    labels[far] = j;
    count[static_cast<std::size_t>(j)] = 1;
    c.row(j) = x.row(far);
  }
  return c;
}

Run lloyd(const MatrixXd& x, const KMeansOptions& o, int restart) {
  Rng rng(o.seed, static_cast<std::uint64_t>(restart) + 1);
  Run run;
  run.centroids = seed_plus_plus(x, o.k, rng);
  run.labels.assign(static_cast<std::size_t>(x.rows()), 0);
  run.inertia = assign(x, run.centroids, run.labels);
  run.trace.push_back(run.inertia);
  std::vector<int> next(run.labels.size());
  for (int it = 0; it < o.max_iter; ++it) {
    const MatrixXd c = update(x, run.centroids, run.labels, o.k);
    const double value = assign(x, c, next);
    run.trace.push_back(value);
    const bool same = next == run.labels;
    const double change = run.inertia - value;
    run.centroids = c;
    run.labels.swap(next);
    run.inertia = value;
    if (same || change <= o.tol * std::max(value, std::numeric_limits<double>::min())) break;
  }
  return run;
}

}  // namespace

double inertia(const MatrixXd& rows, const MatrixXd& centroids, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != rows.rows())
    throw DimensionError("cluster.inertia", "one label per row required");
  double total = 0.0;
  for (Index i = 0; i < rows.rows(); ++i)
    total += (rows.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

Clustering kmeans(const MatrixXd& rows, const KMeansOptions& o) {
  const char* where = "cluster.kmeans";
  if (o.k < 1) throw Error(where, "k must be at least 1");
  if (o.k > rows.rows()) throw Error(where, "k exceeds the number of points");
  if (o.restarts < 1 || o.max_iter < 1) throw Error(where, "restarts and max_iter must be positive");
  if (!rows.allFinite()) throw Error(where, "features must be finite");

  MatrixXd x = rows;
  VectorXd center = VectorXd::Zero(rows.cols());
  VectorXd scale = VectorXd::Ones(rows.cols());
  if (o.standardize && rows.rows() > 1) {
    center = rows.colwise().mean().transpose();
    for (Index j = 0; j < rows.cols(); ++j) {
      const double sd = std::sqrt((rows.col(j).array() - center[j]).square().sum() /
                                  static_cast<double>(rows.rows() - 1));
      if (sd > 0.0) scale[j] = sd;
    }
    x = (rows.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
  }

  std::vector<Run> runs(static_cast<std::size_t>(o.restarts));
  parallel_for(o.restarts, [&](std::ptrdiff_t r) {
    runs[static_cast<std::size_t>(r)] = lloyd(x, o, static_cast<int>(r));
  });
  int best = 0;
  for (int r = 1; r < o.restarts; ++r)
    if (runs[static_cast<std::size_t>(r)].inertia < runs[static_cast<std::size_t>(best)].inertia)
      best = r;

  Run& win = runs[static_cast<std::size_t>(best)];
  Clustering out;
  out.labels = std::move(win.labels);
  out.centroids = (win.centroids.array().rowwise() * scale.transpose().array()).rowwise() +
                  center.transpose().array();
  out.inertia = win.inertia;
  out.k = o.k;
  out.restarts = o.restarts;
  out.seed = o.seed;
  out.best_restart = best;
  out.trace = std::move(win.trace);
  return out;
}

Eigen::MatrixXi confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int n_clusters, int n_classes) {
  if (pred.size() != truth.size())
    throw DimensionError("cluster.confusion", "prediction and truth differ in length");
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n_clusters, n_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= n_clusters || truth[i] < 0 || truth[i] >= n_classes)
      throw Error("cluster.confusion", "label out of range");
    ++m(pred[i], truth[i]);
  }
  return m;
}

std::vector<int> hungarian(const MatrixXd& cost) {
  const Index n = cost.rows(), m = cost.cols();
  if (n > m) throw DimensionError("cluster.hungarian", "more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u, v and column matches p are 1-based with a sentinel column 0.
  VectorXd u = VectorXd::Zero(n + 1), v = VectorXd::Zero(m + 1);
  std::vector<Index> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    VectorXd minv = VectorXd::Constant(m + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(m + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[p[static_cast<std::size_t>(j)]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = static_cast<int>(j - 1);
  return col;
}

std::vector<int> match_clusters(const std::vector<int>& pred, const std::vector<int>& truth,
                                int n_clusters, int n_classes) {
  if (n_clusters < 0) n_clusters = pred.empty() ? 0 : *std::max_element(pred.begin(), pred.end()) + 1;
  if (n_classes < 0) n_classes = truth.empty() ? 0 : *std::max_element(truth.begin(), truth.end()) + 1;
  const Eigen::MatrixXi counts = confusion(pred, truth, n_clusters, n_classes);
  const int size = std::max(n_clusters, n_classes);
  MatrixXd cost = MatrixXd::Zero(size, size);
  cost.topLeftCorner(n_clusters, n_classes) = -counts.cast<double>();
  const std::vector<int> col = hungarian(cost);
  std::vector<int> matching(static_cast<std::size_t>(n_clusters), -1);
  for (int c = 0; c < n_clusters; ++c)
    if (col[static_cast<std::size_t>(c)] < n_classes) matching[static_cast<std::size_t>(c)] = col[static_cast<std::size_t>(c)];
  return matching;
}

}  // namespace eafpca
