#include "eafpca/smooth.hpp"

#include "eafpca/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eafpca {

void Bandwidths::check(int p) const {
  auto positive = [](double h) { return std::isfinite(h) && h > 0.0; };
  if (!positive(h_t)) throw Error("kernel.bandwidths", "h_t must be positive and finite");
  if (!positive(h_gamma)) throw Error("kernel.bandwidths", "h_gamma must be positive and finite");
  if (h_z.size() != p || h_lambda.size() != p)
    throw DimensionError("kernel.bandwidths",
                         fmt::format("h_z and h_lambda need {} entries", p));
  for (Index k = 0; k < p; ++k) {
    if (!positive(h_z[k]) || !positive(h_lambda[k]))
      throw Error("kernel.bandwidths", "covariate bandwidths must be positive and finite");
  }
}

VectorXd uniform_grid(double lo, double hi, Index m) {
  if (m < 1) throw Error("smooth.grid", "grid needs at least one point");
  if (m == 1 || lo == hi) return VectorXd::Constant(1, lo);
  VectorXd g = VectorXd::LinSpaced(m, lo, hi);
  g[m - 1] = hi;
  return g;
}

Index CovariateGrid::size() const {
  Index n = 1;
  for (const auto& a : axes) n *= a.size();
  return axes.empty() ? 0 : n;
}

VectorXd CovariateGrid::point(Index flat) const {
  VectorXd z(dim());
  for (int k = 0; k < dim(); ++k) {
    const Index m = axes[k].size();
    z[k] = axes[k][flat % m];
    flat /= m;
  }
  return z;
}

CovariateGrid CovariateGrid::uniform(const FunctionalDataset& d, Index per_axis) {
  CovariateGrid g;
  for (int k = 0; k < d.covariate_dim(); ++k) {
    const Interval r = d.covariate_range(k);
    g.axes.push_back(uniform_grid(r.lo, r.hi, per_axis));
  }
  return g;
}

double MeanField::operator()(double t, const VectorXd& z) const {
  const int p = z_grid.dim();
  auto [ti, tf] = detail::bracket(t_grid, t);
  Index zi[kMaxLocalDim];
  double zf[kMaxLocalDim];
  Index stride[kMaxLocalDim];
  Index s = 1;
  for (int k = 0; k < p; ++k) {
    auto [i, f] = detail::bracket(z_grid.axes[k], z[k]);
    zi[k] = i;
    zf[k] = f;
    stride[k] = s;
    s *= z_grid.axes[k].size();
  }
  const bool t_single = t_grid.size() == 1;
  double out = 0.0;
  for (unsigned corner = 0; corner < (1u << (p + 1)); ++corner) {
    double w = 1.0;
    Index row = ti, col = 0;
    if (corner & 1u) {
      if (t_single) continue;
      w *= tf;
      row += 1;
    } else {
      w *= 1.0 - tf;
    }
    bool skip = false;
    for (int k = 0; k < p; ++k) {
      Index idx = zi[k];
      if (corner & (2u << k)) {
        if (z_grid.axes[k].size() == 1) {
          skip = true;
          break;
        }
        w *= zf[k];
        idx += 1;
      } else {
        w *= 1.0 - zf[k];
      }
      col += idx * stride[k];
    }
    if (skip || w == 0.0) continue;
    out += w * values(row, col);
  }
  return out;
}

VectorXd centered_values(const Subject& s, const MeanField& mean) {
  VectorXd u(s.n_obs());
  for (int j = 0; j < s.n_obs(); ++j) u[j] = s.obs[j].y - mean(s.obs[j].t, s.z);
  return u;
}

namespace {

struct LocalObs {
  double t;
  double y;
  double w;
  std::size_t source;  // candidate subject, indexes the scaled covariate offsets
};

MeanField fit_mean(const FunctionalDataset& d, const Bandwidths& b, const KernelSpec& spec,
                   const VectorXd& t_grid, const CovariateGrid& z_grid, int degree,
                   const char* where) {
  const int p = d.covariate_dim();
  if (d.empty()) throw Error(where, "empty dataset");
  if (z_grid.dim() != p) throw DimensionError(where, "covariate grid dimension differs from p");
  if (p + 1 > kMaxLocalDim) throw DimensionError(where, "too many covariates");
  if (!(b.h_t > 0.0) || b.h_z.size() != p || (b.h_z.array() <= 0.0).any())
    throw Error(where, "h_t and h_z must be positive with p entries");

  const double n = static_cast<double>(d.size());
  const double r = spec.support_radius();

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return d.subject(a).z[0] < d.subject(c).z[0];
  });
  std::vector<double> z0(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) z0[i] = d.subject(order[i]).z[0];

  MeanField field{t_grid, z_grid, MatrixXd(t_grid.size(), z_grid.size()), b, spec, degree};

  parallel_for(z_grid.size(), [&](std::ptrdiff_t j) {
    const VectorXd zq = z_grid.point(j);
    const auto lo = std::lower_bound(z0.begin(), z0.end(), zq[0] - r * b.h_z[0]) - z0.begin();
    const auto hi = std::upper_bound(z0.begin(), z0.end(), zq[0] + r * b.h_z[0]) - z0.begin();

    std::vector<double> zdiffs;
    std::vector<std::pair<std::size_t, double>> cand;  // subject, covariate weight
    for (auto c = lo; c < hi; ++c) {
      const Subject& s = d.subject(order[c]);
      const double kz = product_weight(spec, s.z - zq, b.h_z);
      if (kz > 0.0 && s.n_obs() > 0) cand.emplace_back(order[c], kz);
    }
    zdiffs.resize(cand.size() * p);
    std::vector<LocalObs> obs;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const Subject& s = d.subject(cand[c].first);
      for (int k = 0; k < p; ++k) zdiffs[c * p + k] = (s.z[k] - zq[k]) / b.h_z[k];
      const double w = cand[c].second / (n * s.n_obs());
      for (const auto& o : s.obs) obs.push_back({o.t, o.y, w, c});
    }
    std::stable_sort(obs.begin(), obs.end(),
                     [](const LocalObs& a, const LocalObs& c) { return a.t < c.t; });

    std::vector<double> query(p + 1);
    for (int k = 0; k < p; ++k) query[k + 1] = zq[k];
    double diff[kMaxLocalDim];
    for (Index g = 0; g < t_grid.size(); ++g) {
      const double tq = t_grid[g];
      auto first = std::lower_bound(obs.begin(), obs.end(), tq - r * b.h_t,
                                    [](const LocalObs& o, double v) { return o.t < v; });
      LocalLinearSystem<double> sys(p + 1, degree);
      for (auto it = first; it != obs.end() && it->t <= tq + r * b.h_t; ++it) {
        diff[0] = (it->t - tq) / b.h_t;
        const double kt = eval_kernel(spec, diff[0]) / b.h_t;
        if (kt <= 0.0) continue;
        for (int k = 0; k < p; ++k) diff[k + 1] = zdiffs[it->source * p + k];
        sys.add(diff, it->y, it->w * kt);
      }
      query[0] = tq;
      field.values(g, j) = sys.solve(query, kRidgeFactor, where);
    }
  });
  return field;
}

// Raw products aggregated over identical (s, t) locations: the local linear
// solution only depends on the total weight and weighted response per location.
struct PairPoint {
  double s;
  double t;
  double w;
  double y;
};

std::vector<PairPoint> aggregate_pairs(const FunctionalDataset& d, const MeanField& mean) {
  std::vector<double> times;
  for (const auto& s : d.subjects())
    for (const auto& o : s.obs) times.push_back(o.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const auto nt = static_cast<Index>(times.size());
  const double n = static_cast<double>(d.size());
  auto time_index = [&](double t) {
    return static_cast<Index>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  };

  std::vector<PairPoint> points;
  if (nt <= 4096) {
    MatrixXd w = MatrixXd::Zero(nt, nt), wy = MatrixXd::Zero(nt, nt);
    for (const auto& s : d.subjects()) {
      const int m = s.n_obs();
      if (m < 2) continue;
      const VectorXd u = centered_values(s, mean);
      const double sw = 1.0 / (n * m * (m - 1));
      std::vector<Index> idx(m);
      for (int j = 0; j < m; ++j) idx[j] = time_index(s.obs[j].t);
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          if (j == k) continue;
          w(idx[j], idx[k]) += sw;
          wy(idx[j], idx[k]) += sw * u[j] * u[k];
        }
    }
    for (Index a = 0; a < nt; ++a)
      for (Index c = 0; c < nt; ++c)
        if (w(a, c) > 0.0) points.push_back({times[a], times[c], w(a, c), wy(a, c) / w(a, c)});
  } else {
    for (const auto& s : d.subjects()) {
      const int m = s.n_obs();
      if (m < 2) continue;
      const VectorXd u = centered_values(s, mean);
      const double sw = 1.0 / (n * m * (m - 1));
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          if (j != k) points.push_back({s.obs[j].t, s.obs[k].t, sw, sw * u[j] * u[k]});
    }
    std::sort(points.begin(), points.end(), [](const PairPoint& a, const PairPoint& c) {
      return a.s < c.s || (a.s == c.s && a.t < c.t);
    });
    std::vector<PairPoint> merged;
    for (const auto& pt : points) {
      if (!merged.empty() && merged.back().s == pt.s && merged.back().t == pt.t) {
        merged.back().w += pt.w;
        merged.back().y += pt.y;
      } else {
        merged.push_back(pt);
      }
    }
    for (auto& pt : merged) pt.y /= pt.w;
    points = std::move(merged);
  }
  return points;
}

}  // namespace

MeanField estimate_mean(const FunctionalDataset& d, const Bandwidths& b, const KernelSpec& spec,
                        const VectorXd& t_grid, const CovariateGrid& z_grid) {
  return fit_mean(d, b, spec, t_grid, z_grid, 1, "smooth.estimate_mean");
}

MeanField nadaraya_watson_mean(const FunctionalDataset& d, const Bandwidths& b,
                               const KernelSpec& spec, const VectorXd& t_grid,
                               const CovariateGrid& z_grid) {
  return fit_mean(d, b, spec, t_grid, z_grid, 0, "smooth.nadaraya_watson_mean");
}

CovSurfaced estimate_pooled_cov(const FunctionalDataset& d, const MeanField& mean,
                                double h_gamma, const KernelSpec& spec, const VectorXd& t_grid) {
  const char* where = "smooth.estimate_pooled_cov";
  if (!(h_gamma > 0.0)) throw Error(where, "h_gamma must be positive");
  if (std::none_of(d.subjects().begin(), d.subjects().end(),
                   [](const Subject& s) { return s.covariance_eligible(); }))
    throw Error(where, "no subject has two or more observations");

  const std::vector<PairPoint> points = aggregate_pairs(d, mean);
  const double r = spec.support_radius();
  const Index m = t_grid.size();
  CovSurfaced cov{t_grid, MatrixXd(m, m), h_gamma};

  parallel_for(m, [&](std::ptrdiff_t g) {
    const double sq = t_grid[g];
    auto first = std::lower_bound(points.begin(), points.end(), sq - r * h_gamma,
                                  [](const PairPoint& p, double v) { return p.s < v; });
    auto last = std::upper_bound(points.begin(), points.end(), sq + r * h_gamma,
                                 [](double v, const PairPoint& p) { return v < p.s; });
    std::vector<std::pair<const PairPoint*, double>> row;  // point, s-kernel weight
    for (auto it = first; it != last; ++it) {
      const double ks = eval_kernel(spec, (it->s - sq) / h_gamma) / h_gamma;
      if (ks > 0.0) row.emplace_back(&*it, ks);
    }
    double diff[2];
    for (Index c = 0; c < m; ++c) {
      const double tq = t_grid[c];
      LocalLinearSystem<double> sys(2);
      for (const auto& [pt, ks] : row) {
        diff[1] = (pt->t - tq) / h_gamma;
        if (std::abs(diff[1]) > r) continue;
        const double kt = eval_kernel(spec, diff[1]) / h_gamma;
        if (kt <= 0.0) continue;
        diff[0] = (pt->s - sq) / h_gamma;
        sys.add(diff, pt->y, pt->w * ks * kt);
      }
      cov.values(g, c) = sys.solve({sq, tq}, kRidgeFactor, where);
    }
  });
  cov.symmetrize();
  return cov;
}

NoiseEstimate estimate_sigma2(const FunctionalDataset& d, const MeanField& mean,
                              const CovSurfaced& cov, const KernelSpec& spec) {
  const char* where = "smooth.estimate_sigma2";
  const double n = static_cast<double>(d.size());
  struct DiagPoint {
    double t, w, y;
  };
  std::vector<DiagPoint> diag;
  for (const auto& s : d.subjects()) {
    if (s.n_obs() == 0) continue;
    const VectorXd u = centered_values(s, mean);
    const double w = 1.0 / (n * s.n_obs());
    for (int j = 0; j < s.n_obs(); ++j) diag.push_back({s.obs[j].t, w, w * u[j] * u[j]});
  }
  if (diag.empty()) throw Error(where, "no diagonal data");
  std::sort(diag.begin(), diag.end(), [](const DiagPoint& a, const DiagPoint& c) { return a.t < c.t; });
  std::vector<DiagPoint> merged;
  for (const auto& p : diag) {
    if (!merged.empty() && merged.back().t == p.t) {
      merged.back().w += p.w;
      merged.back().y += p.y;
    } else {
      merged.push_back(p);
    }
  }
  for (auto& p : merged) p.y /= p.w;

  const Index m = cov.size();
  const double lo = cov.t_grid[0], hi = cov.t_grid[m - 1];
  const double a = lo + 0.1 * (hi - lo), b = hi - 0.1 * (hi - lo);
  const double h = cov.h_gamma;
  const double r = spec.support_radius();
  double total = 0.0;
  int used = 0;
  for (Index g = 0; g < m; ++g) {
    const double tq = cov.t_grid[g];
    if (tq < a || tq > b) continue;
    LocalLinearSystem<double> sys(1);
    double diff;
    for (const auto& p : merged) {
      diff = (p.t - tq) / h;
      if (std::abs(diff) > r) continue;
      sys.add(&diff, p.y, p.w * eval_kernel(spec, diff) / h);
    }
    total += sys.solve({tq}, kRidgeFactor, where) - cov.values(g, g);
    ++used;
  }
  if (used == 0) throw Error(where, "time grid has no interior points");
  NoiseEstimate est;
  est.raw = total / used;
  est.sigma2 = std::max(0.0, est.raw);
  return est;
}

}  // namespace eafpca
