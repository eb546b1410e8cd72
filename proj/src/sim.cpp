#include "eafpca/sim.hpp"

#include "eafpca/eigen_basis.hpp"
#include "eafpca/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eafpca {

using std::numbers::pi;

namespace {

constexpr int kSim1Points = 51;
constexpr int kLatticePoints = 31;
constexpr double kSim2NoiseSd = 0.2;
constexpr double kSim3NoiseVar = 0.4;

VectorXd lattice_z(int q, Index flat) {
  VectorXd z(2);
  z << (static_cast<double>(flat % q) + 0.5) / q, (static_cast<double>(flat / q) + 0.5) / q;
  return z;
}

std::string subject_id(Index i) { return fmt::format("s{:05d}", i); }

}  // namespace

// ---- phantom ----

bool Ellipse::contains(double x, double y) const {
  const double th = phi_deg * pi / 180.0;
  const double dx = x - x0, dy = y - y0;
  const double xr = dx * std::cos(th) + dy * std::sin(th);
  const double yr = -dx * std::sin(th) + dy * std::cos(th);
  return (xr * xr) / (a * a) + (yr * yr) / (b * b) <= 1.0;
}

const std::vector<Ellipse>& shepp_logan_ellipses() {
  // intensity, a, b, x0, y0, phi (degrees)
  static const std::vector<Ellipse> table{
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  return table;
}

double phantom_intensity(double x, double y) {
  double v = 0.0;
  for (const auto& e : shepp_logan_ellipses())
    if (e.contains(x, y)) v += e.intensity;
  return v;
}

RegionMap gen_phantom(int q) {
  if (q < 16) throw Error("sim.gen_phantom", "grid size must be at least 16");
  RegionMap map{q, Eigen::MatrixXi(q, q)};
  for (int i2 = 0; i2 < q; ++i2)
    for (int i1 = 0; i1 < q; ++i1) {
      const double x = 2.0 * (i1 + 0.5) / q - 1.0;
      const double y = 2.0 * (i2 + 0.5) / q - 1.0;
      // Sums of table intensities carry rounding; thresholds sit between levels.
      const double v = phantom_intensity(x, y);
      map.labels(i1, i2) = v > 0.5 ? S2 : v > 0.05 ? S1 : S0;
    }
  return map;
}

int RegionMap::label_at(const VectorXd& z) const {
  const int i1 = std::clamp(static_cast<int>(std::floor(z[0] * q)), 0, q - 1);
  const int i2 = std::clamp(static_cast<int>(std::floor(z[1] * q)), 0, q - 1);
  return labels(i1, i2);
}

std::array<Index, 3> RegionMap::counts() const {
  std::array<Index, 3> c{0, 0, 0};
  for (Index i = 0; i < labels.size(); ++i) ++c[labels.data()[i]];
  return c;
}

// ---- truth functions ----

namespace truth {

Eigen::Vector2d sim1_lambda(double z) {
  return {4.0 * (1.0 + 2.0 * std::sin(0.1 + pi * z * z / 2.0)),
          2.0 * (2.0 + std::sin(2.0 * z * pi))};
}

double sim1_phi(int k, double t) {
  return k == 0 ? -std::cos(pi * t / 10.0) / std::sqrt(5.0) : std::sin(pi * t / 10.0) / std::sqrt(5.0);
}

Eigen::Vector2d region_lambda(int region, const VectorXd& z) {
  switch (region) {
    case S2:
      return {8.0 + std::cos(z[0] * 2.0 * pi) / 2.0, 4.0 + std::sin((0.5 + z[0]) * 2.0 * pi) / 8.0};
    case S1: {
      const double c = std::cos(z[0] * pi) * std::sin(0.5 + z[1]);
      return {3.0 + c, 1.5 + c / 2.0};
    }
    default:
      return {0.0, 0.0};
  }
}

double sim2_psi(int k, double t, const VectorXd& z) {
  const double arg = 2.0 * pi * z.norm() * t;
  return std::sqrt(2.0) * (k == 0 ? std::sin(arg) : std::cos(arg)) / 2.0;
}

double sim3_phi(int k, double t, int region, char variant) {
  const double kk = k + 1.0;
  if (variant == 'A' || variant == 'B' || region == S1)
    return std::sin(2.0 * pi * kk * t) + std::cos(2.0 * pi * kk * t);
  if (region == S2) return std::sin(2.0 * pi * kk * t) + std::cos(4.0 * pi * kk * t);
  return 0.0;
}

}  // namespace truth

std::string to_string(SimKind k) {
  switch (k) {
    case SimKind::Sim1: return "sim1";
    case SimKind::Sim2: return "sim2";
    case SimKind::Sim3: return "sim3";
  }
  return "?";
}

SimKind parse_sim_kind(const std::string& s) {
  if (s == "sim1") return SimKind::Sim1;
  if (s == "sim2") return SimKind::Sim2;
  if (s == "sim3") return SimKind::Sim3;
  throw Error("sim.kind", "unknown simulation '" + s + "'");
}

Index SimTruth::lattice_index(const VectorXd& z) const {
  const int i1 = std::clamp(static_cast<int>(std::floor(z[0] * q)), 0, q - 1);
  const int i2 = std::clamp(static_cast<int>(std::floor(z[1] * q)), 0, q - 1);
  return static_cast<Index>(i1) + static_cast<Index>(q) * i2;
}

Eigen::Vector2d SimTruth::lambda_at(const VectorXd& z) const {
  if (!lattice()) return truth::sim1_lambda(z[0]);
  return lambda.row(lattice_index(z)).transpose();
}

double SimTruth::eigenfunction(int k, double t, const VectorXd& z) const {
  switch (kind) {
    case SimKind::Sim1: return truth::sim1_phi(k, t);
    case SimKind::Sim2: return truth::sim2_psi(k, t, z);
    case SimKind::Sim3: {
      const int region = regions.empty() ? S1 : regions[lattice_index(z)];
      return truth::sim3_phi(k, t, region, variant);
    }
  }
  return 0.0;
}

MatrixXd SimTruth::covariance(const VectorXd& z, const VectorXd& t_grid) const {
  const Eigen::Vector2d lam = lambda_at(z);
  MatrixXd f(t_grid.size(), 2);
  for (Index g = 0; g < t_grid.size(); ++g)
    for (int k = 0; k < 2; ++k) f(g, k) = eigenfunction(k, t_grid[g], z);
  return f * lam.asDiagonal() * f.transpose();
}

// ---- generators ----

Simulation gen_sim1(int n, SchemeKind scheme, std::uint64_t seed) {
  if (n < 1) throw Error("sim.gen_sim1", "n must be positive");
  SimTruth tr;
  tr.kind = SimKind::Sim1;
  tr.seed = seed;
  tr.n = n;
  tr.scheme = scheme;
  tr.sigma2 = 1.0;
  tr.time_domain = {0.0, 10.0};
  tr.z_domain = {{0.0, 1.0}};
  tr.lambda.resize(n, 2);
  tr.scores.resize(n, 2);

  const VectorXd grid = VectorXd::LinSpaced(kSim1Points, 0.0, 10.0);
  std::vector<Subject> subjects(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i) + 1);
    Subject& s = subjects[i];
    s.id = subject_id(i);
    s.z = VectorXd::Constant(1, rng.uniform());
    const Eigen::Vector2d lam = truth::sim1_lambda(s.z[0]);
    const double a1 = rng.normal() * std::sqrt(lam[0]);
    const double a2 = rng.normal() * std::sqrt(lam[1]);
    tr.lambda.row(i) = lam.transpose();
    tr.scores.row(i) << a1, a2;
    std::vector<int> idx;
    if (scheme == SchemeKind::Dense) {
      idx.resize(kSim1Points);
      for (int j = 0; j < kSim1Points; ++j) idx[j] = j;
    } else {
      const int m = static_cast<int>(rng.uniform_int(4, 10));
      idx = rng.sample_without_replacement(kSim1Points, m);
    }
    for (int j : idx) {
      const double t = grid[j];
      const double x = a1 * truth::sim1_phi(0, t) + a2 * truth::sim1_phi(1, t);
      s.obs.push_back({t, x + rng.normal()});
    }
  }
  return {FunctionalDataset(std::move(subjects), 1, tr.time_domain), std::move(tr)};
}

namespace {

// Shared lattice generator: eigenfunctions given by `eigf(k, t, flat)`.
template <typename EigFn>
Simulation lattice_sim(SimTruth tr, const MatrixXd& lam1, const MatrixXd& lam2, double noise_sd,
                       EigFn eigf) {
  const int q = tr.q;
  const Index n = static_cast<Index>(q) * q;
  tr.n = static_cast<int>(n);
  tr.scheme = SchemeKind::Dense;
  tr.time_domain = {0.0, 1.0};
  tr.z_domain = {{0.0, 1.0}, {0.0, 1.0}};
  tr.lambda.resize(n, 2);
  tr.scores.resize(n, 2);
  const VectorXd times = VectorXd::LinSpaced(kLatticePoints, 0.0, 1.0);

  std::vector<Subject> subjects(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Rng rng(tr.seed, static_cast<std::uint64_t>(i) + 1);
    Subject& s = subjects[static_cast<std::size_t>(i)];
    s.id = subject_id(i);
    s.z = lattice_z(q, i);
    const double l1 = lam1.data()[i], l2 = lam2.data()[i];
    const double a1 = rng.normal() * std::sqrt(l1);
    const double a2 = rng.normal() * std::sqrt(l2);
    tr.lambda.row(i) << l1, l2;
    tr.scores.row(i) << a1, a2;
    for (Index j = 0; j < times.size(); ++j) {
      const double t = times[j];
      const double x = a1 * eigf(0, t, i) + a2 * eigf(1, t, i);
      s.obs.push_back({t, x + noise_sd * rng.normal()});
    }
  }
  return {FunctionalDataset(std::move(subjects), 2, tr.time_domain), std::move(tr)};
}

void region_lambda_maps(const RegionMap& map, MatrixXd& lam1, MatrixXd& lam2) {
  const int q = map.q;
  lam1.resize(q, q);
  lam2.resize(q, q);
  for (Index i = 0; i < static_cast<Index>(q) * q; ++i) {
    const Eigen::Vector2d l = truth::region_lambda(map.labels.data()[i], lattice_z(q, i));
    lam1.data()[i] = l[0];
    lam2.data()[i] = l[1];
  }
}

}  // namespace

Simulation gen_sim2(int q, std::uint64_t seed) {
  if (q < 16 || q > 128) throw Error("sim.gen_sim2", "q must lie in [16, 128]");
  const RegionMap map = gen_phantom(q);
  MatrixXd lam1, lam2;
  region_lambda_maps(map, lam1, lam2);
  SimTruth tr;
  tr.kind = SimKind::Sim2;
  tr.seed = seed;
  tr.q = q;
  tr.sigma2 = kSim2NoiseSd * kSim2NoiseSd;
  tr.labels.assign(map.labels.data(), map.labels.data() + map.labels.size());
  tr.regions = tr.labels;
  return lattice_sim(std::move(tr), lam1, lam2, kSim2NoiseSd, [q](int k, double t, Index i) {
    return truth::sim2_psi(k, t, lattice_z(q, i));
  });
}

Simulation gen_sim3(char variant, int q, std::uint64_t seed) {
  if (variant < 'A' || variant > 'D') throw Error("sim.gen_sim3", "variant must be A, B, C or D");
  if (q < 16) throw Error("sim.gen_sim3", "grid size must be at least 16");
  const RegionMap map = gen_phantom(q);
  MatrixXd lam1, lam2;
  region_lambda_maps(map, lam1, lam2);

  SimTruth tr;
  tr.kind = SimKind::Sim3;
  tr.variant = variant;
  tr.seed = seed;
  tr.q = q;
  tr.sigma2 = kSim3NoiseVar;
  tr.regions.assign(map.labels.data(), map.labels.data() + map.labels.size());
  tr.labels = tr.regions;

  if (variant == 'B' || variant == 'D') {
    lam1 = smooth_field(lam1, kSim3SmoothingSd);
    lam2 = smooth_field(lam2, kSim3SmoothingSd);
    // Ground truth after smoothing: argmax of the smoothed class indicators.
    std::array<MatrixXd, 3> ind;
    for (int c = 0; c < 3; ++c)
      ind[c] = smooth_field((map.labels.array() == c).cast<double>().matrix(), kSim3SmoothingSd);
    for (Index i = 0; i < static_cast<Index>(q) * q; ++i) {
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (ind[c].data()[i] > ind[best].data()[i]) best = c;
      tr.labels[static_cast<std::size_t>(i)] = best;
    }
  }
  const std::vector<int> regions = tr.regions;
  return lattice_sim(std::move(tr), lam1, lam2, std::sqrt(kSim3NoiseVar),
                     [regions, variant](int k, double t, Index i) {
                       return truth::sim3_phi(k, t, regions[static_cast<std::size_t>(i)], variant);
                     });
}

MatrixXd smooth_field(const MatrixXd& field, double sigma) {
  if (!(sigma > 0.0)) throw Error("sim.smooth_field", "sigma must be positive");
  auto weights = [sigma](Index m) {
    MatrixXd w(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index k = 0; k < m; ++k) {
        const double d = static_cast<double>(i - k) / static_cast<double>(m);
        w(i, k) = std::exp(-d * d / (2.0 * sigma * sigma));
      }
    return MatrixXd(w.array().colwise() / w.rowwise().sum().array());
  };
  const MatrixXd wr = weights(field.rows());
  const MatrixXd wc = weights(field.cols());
  return wr * field * wc.transpose();
}

double ise_curve(const VectorXd& est, const VectorXd& truth, const VectorXd& grid) {
  if (est.size() != truth.size() || est.size() != grid.size())
    throw DimensionError("sim.ise_curve", "estimate, truth and grid differ in length");
  return trapezoid_weights(grid).dot((est - truth).array().square().matrix());
}

double ise_lattice(const VectorXd& est, const VectorXd& truth, double cell_area) {
  if (est.size() != truth.size()) throw DimensionError("sim.ise_lattice", "shape mismatch");
  return cell_area * (est - truth).squaredNorm();
}

double ise_cov3(const std::function<MatrixXd(Index)>& est,
                const std::function<MatrixXd(Index)>& truth, const VectorXd& t_grid,
                const VectorXd& z_weights) {
  const VectorXd w = trapezoid_weights(t_grid);
  double total = 0.0;
  for (Index i = 0; i < z_weights.size(); ++i) {
    const MatrixXd diff = est(i) - truth(i);
    if (diff.rows() != t_grid.size() || diff.cols() != t_grid.size())
      throw DimensionError("sim.ise_cov3", "surface does not match the time grid");
    total += z_weights[i] * w.dot(diff.array().square().matrix() * w);
  }
  return total;
}

std::vector<ClassMetrics> recall_precision(const std::vector<int>& pred,
                                           const std::vector<int>& truth,
                                           const std::vector<int>& matching, int n_classes) {
  if (pred.size() != truth.size())
    throw DimensionError("sim.recall_precision", "prediction and truth differ in length");
  std::vector<ClassMetrics> out(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i];
    const int mapped = (p >= 0 && p < static_cast<int>(matching.size())) ? matching[p] : -1;
    const int t = truth[i];
    if (mapped == t) {
      ++out[t].tp;
    } else {
      if (t >= 0 && t < n_classes) ++out[t].fn;
      if (mapped >= 0 && mapped < n_classes) ++out[mapped].fp;
    }
  }
  for (auto& m : out) {
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  return out;
}

}  // namespace eafpca
