#pragma once

#include "eafpca/core.hpp"
#include "eafpca/data.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eafpca {

// Region labels of the phantom lattice.
enum Region : int { S0 = 0, S1 = 1, S2 = 2 };

// q x q lattice over [0,1]^2 with cell centers ((i1 + 0.5)/q, (i2 + 0.5)/q).
// Entry (i1, i2) belongs to the subject with flat index i1 + q i2, which is
// also Eigen's column-major storage order.
struct RegionMap {
  int q = 0;
  Eigen::MatrixXi labels;

  int label_at(const VectorXd& z) const;
  std::array<Index, 3> counts() const;
};

// One ellipse of the Shepp-Logan table, in [-1,1]^2 image coordinates.
struct Ellipse {
  double intensity;
  double a, b;    // half-axes
  double x0, y0;  // center
  double phi_deg;
  bool contains(double x, double y) const;
};

// Modified Shepp-Logan ellipse table (ten ellipses).
const std::vector<Ellipse>& shepp_logan_ellipses();

// Intensity of the phantom at image coordinates (x, y) in [-1,1]^2.
double phantom_intensity(double x, double y);

// Renders the phantom at q x q. Intensity above 0.5 (skull ring) is S2, above
// 0.05 (brain tissue and the small bright ellipses) is S1, the rest S0
// (background and the two dark ellipses).
RegionMap gen_phantom(int q);

enum class SimKind { Sim1, Sim2, Sim3 };
std::string to_string(SimKind k);
SimKind parse_sim_kind(const std::string& s);

struct SimTruth {
  SimKind kind = SimKind::Sim1;
  char variant = 'A';  // Sim3 only
  std::uint64_t seed = 0;
  int n = 0;
  int q = 0;
  SchemeKind scheme = SchemeKind::Dense;
  double sigma2 = 0.0;
  Interval time_domain{0.0, 1.0};
  std::vector<Interval> z_domain;
  MatrixXd lambda;          // subjects x 2, true eigenvalues at each subject
  MatrixXd scores;          // subjects x 2, realized scores
  std::vector<int> labels;  // lattice sims: region per subject (after smoothing for 3B/3D)
  std::vector<int> regions; // lattice sims: unsmoothed phantom region per subject

  bool lattice() const { return kind != SimKind::Sim1; }
  Index lattice_index(const VectorXd& z) const;
  // Eigenvalue functions at z: analytic for Sim1, the lattice cell otherwise.
  Eigen::Vector2d lambda_at(const VectorXd& z) const;
  // k-th temporal eigenfunction at (t, z), k in {0, 1}.
  double eigenfunction(int k, double t, const VectorXd& z) const;
  // True covariance at z tabulated on a time grid.
  MatrixXd covariance(const VectorXd& z, const VectorXd& t_grid) const;
};

// Truth functions of the simulation designs.
namespace truth {
Eigen::Vector2d sim1_lambda(double z);
double sim1_phi(int k, double t);
Eigen::Vector2d region_lambda(int region, const VectorXd& z);
double sim2_psi(int k, double t, const VectorXd& z);
double sim3_phi(int k, double t, int region, char variant);
}  // namespace truth

struct Simulation {
  FunctionalDataset data;
  SimTruth truth;
};

// n curves on 51 equally spaced points of [0,10]; sparse designs keep
// N_i ~ U{4..10} of them.
Simulation gen_sim1(int n, SchemeKind scheme, std::uint64_t seed);

// One curve per lattice cell with z-dependent eigenfunctions.
Simulation gen_sim2(int q, std::uint64_t seed);

// Variants A-D: common (A, B) or region-specific (C, D) eigenfunctions, with
// the eigenvalue maps smoothed spatially for B and D.
Simulation gen_sim3(char variant, int q, std::uint64_t seed);

inline constexpr double kSim3SmoothingSd = 0.03;

// Gaussian product-kernel smoothing of a q x q lattice field (cell spacing
// 1/q, sigma in the same units). Weights are renormalized per output cell.
MatrixXd smooth_field(const MatrixXd& field, double sigma);

// Trapezoid integral of (est - truth)^2 over an ascending grid.
double ise_curve(const VectorXd& est, const VectorXd& truth, const VectorXd& grid);
// Riemann sum of (est - truth)^2 over lattice cells of area cell_area.
double ise_lattice(const VectorXd& est, const VectorXd& truth, double cell_area);

// Discretized integral over s, t (trapezoid on t_grid) and z (cell weights)
// of {est(z)(s,t) - truth(z)(s,t)}^2. Each callable returns the surface at z
// index i tabulated on t_grid.
double ise_cov3(const std::function<MatrixXd(Index)>& est,
                const std::function<MatrixXd(Index)>& truth, const VectorXd& t_grid,
                const VectorXd& z_weights);

struct ClassMetrics {
  std::optional<double> recall;
  std::optional<double> precision;
  Index tp = 0, fp = 0, fn = 0;
};

// Per truth class c: recall = TP/(TP+FN), precision = TP/(TP+FP) where a
// prediction counts for class matching[pred]. Unmatched clusters (-1) count
// only as false negatives.
std::vector<ClassMetrics> recall_precision(const std::vector<int>& pred,
                                           const std::vector<int>& truth,
                                           const std::vector<int>& matching, int n_classes);

}  // namespace eafpca
