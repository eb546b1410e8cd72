#include "eafpca/cv.hpp"

#include "eafpca/eigen_basis.hpp"
#include "eafpca/eigenmap.hpp"
#include "eafpca/parallel.hpp"
#include "eafpca/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace eafpca {

std::string to_string(CvTarget t) {
  switch (t) {
    case CvTarget::Mean: return "mean";
    case CvTarget::Covariance: return "covariance";
    case CvTarget::Eigenvalue: return "eigenvalue";
  }
  return "?";
}

CvTarget parse_cv_target(const std::string& s) {
  if (s == "mean") return CvTarget::Mean;
  if (s == "covariance") return CvTarget::Covariance;
  if (s == "eigenvalue") return CvTarget::Eigenvalue;
  throw Error("kernel.cv", "unknown cv target '" + s + "'");
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0);
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < order.size(); ++r)
    fold[static_cast<std::size_t>(order[r])] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return fold;
}

FunctionalDataset fold_subset(const FunctionalDataset& d, const std::vector<int>& fold, int k,
                              bool held_out) {
  std::vector<Subject> keep;
  for (std::size_t i = 0; i < d.size(); ++i)
    if ((fold[static_cast<std::size_t>(i)] == k) == held_out) keep.push_back(d.subject(static_cast<Index>(i)));
  return FunctionalDataset(std::move(keep), d.covariate_dim(), d.time_domain());
}

double cv_fold_error(const FunctionalDataset& train, const FunctionalDataset& test,
                     CvTarget target, const Bandwidths& b, const CvSettings& settings) {
  const Interval dom = train.time_domain();
  const VectorXd t_grid = uniform_grid(dom.lo, dom.hi, settings.t_points);
  const CovariateGrid z_grid = CovariateGrid::uniform(train, settings.z_points_per_axis);
  const MeanField mean = estimate_mean(train, b, settings.kernel, t_grid, z_grid);

  double sse = 0.0;
  Index count = 0;
  if (target == CvTarget::Mean) {
    for (const Subject& s : test.subjects())
      for (const Observation& o : s.obs) {
        const double e = o.y - mean(o.t, s.z);
        sse += e * e;
        ++count;
      }
    return count > 0 ? sse / static_cast<double>(count) : 0.0;
  }

  const CovSurfaced cov = estimate_pooled_cov(train, mean, b.h_gamma, settings.kernel, t_grid);
  if (target == CvTarget::Covariance) {
    for (const Subject& s : test.subjects()) {
      const VectorXd u = centered_values(s, mean);
      for (int j = 0; j < s.n_obs(); ++j)
        for (int k = 0; k < s.n_obs(); ++k) {
          if (j == k) continue;
          const double e = u[j] * u[k] - cov(s.obs[j].t, s.obs[k].t);
          sse += e * e;
          ++count;
        }
    }
    return count > 0 ? sse / static_cast<double>(count) : 0.0;
  }

  const EigenBasisd basis = eigendecompose(cov);
  const Index L = std::min(settings.components, basis.components());
  const std::vector<DesignSummary> summaries = design_summaries(train, mean, basis, L);
  for (const Subject& s : test.subjects()) {
    if (s.n_obs() < 2) continue;
    const WlsEstimate est = wls_eigenvalues(std::span<const DesignSummary>(summaries), s.z,
                                            b.h_lambda, settings.kernel, true);
    const DesignBlock block = build_design(s, mean, basis, L);
    sse += (block.Y - block.X * est.lambda).squaredNorm();
    count += block.Y.size();
  }
  return count > 0 ? sse / static_cast<double>(count) : 0.0;
}

bool bandwidth_less(const Bandwidths& a, const Bandwidths& b) {
  std::vector<double> x{a.h_t}, y{b.h_t};
  x.insert(x.end(), a.h_z.data(), a.h_z.data() + a.h_z.size());
  y.insert(y.end(), b.h_z.data(), b.h_z.data() + b.h_z.size());
  x.push_back(a.h_gamma);
  y.push_back(b.h_gamma);
  x.insert(x.end(), a.h_lambda.data(), a.h_lambda.data() + a.h_lambda.size());
  y.insert(y.end(), b.h_lambda.data(), b.h_lambda.data() + b.h_lambda.size());
  return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

CvResult cv_bandwidth(const FunctionalDataset& d, CvTarget target,
                      const std::vector<Bandwidths>& candidates, int folds, std::uint64_t seed,
                      const CvSettings& settings) {
  const char* where = "kernel.cv_bandwidth";
  if (candidates.empty()) throw Error(where, "no bandwidth candidates");
  if (folds < 2) throw Error(where, "need at least two folds");
  if (d.size() < 2 * static_cast<std::size_t>(folds)) throw Error(where, "fewer than two subjects per fold");
  for (const auto& c : candidates) c.check(d.covariate_dim());

  CvResult out;
  out.errors.assign(candidates.size(), 0.0);
  if (candidates.size() == 1) {
    out.best = candidates.front();
    return out;
  }

  const std::vector<int> fold = fold_assignment(d.size(), folds, seed);
  std::vector<FunctionalDataset> train, test;
  for (int k = 0; k < folds; ++k) {
    train.push_back(fold_subset(d, fold, k, false));
    test.push_back(fold_subset(d, fold, k, true));
  }

  const Index nc = static_cast<Index>(candidates.size());
  out.fold_errors.resize(nc, folds);
  parallel_for(nc * folds, [&](std::ptrdiff_t job) {
    const Index c = job / folds;
    const int k = static_cast<int>(job % folds);
    double e;
    try {
      e = cv_fold_error(train[k], test[k], target, candidates[static_cast<std::size_t>(c)], settings);
    } catch (const Error&) {
      e = std::numeric_limits<double>::infinity();
    }
    out.fold_errors(c, k) = e;
  });

  for (Index c = 0; c < nc; ++c) out.errors[static_cast<std::size_t>(c)] = out.fold_errors.row(c).mean();
  const double min = *std::min_element(out.errors.begin(), out.errors.end());
  if (!std::isfinite(min))
    throw Error(where, "every candidate produced singular local fits; try larger bandwidths");
  const double slack = std::max(1e-18, 1e-9 * min);
  bool found = false;
  for (Index c = 0; c < nc; ++c) {
    if (out.errors[static_cast<std::size_t>(c)] > min + slack) continue;
    if (!found || bandwidth_less(candidates[static_cast<std::size_t>(c)], out.best)) {
      out.best = candidates[static_cast<std::size_t>(c)];
      out.best_index = c;
      found = true;
    }
  }
  return out;
}

}  // namespace eafpca
