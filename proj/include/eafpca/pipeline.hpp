#pragma once

#include "eafpca/cluster.hpp"
#include "eafpca/config.hpp"
#include "eafpca/cv.hpp"
#include "eafpca/eigenmap.hpp"
#include "eafpca/io.hpp"
#include "eafpca/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eafpca {

struct SimSpec {
  SimKind kind = SimKind::Sim1;
  int n = 200;
  SchemeKind scheme = SchemeKind::Dense;
  int q = 64;
  char variant = 'A';
};

// Everything a subcommand needs, resolved from a Config. Bandwidth entries
// left at zero are filled from the data: h_t and h_gamma at a tenth of the
// time range, h_z and h_lambda at a fifth of each covariate range.
struct PipelineConfig {
  std::string out = "out";
  std::uint64_t seed = 1;
  int runs = 1;
  int threads = 0;

  std::string data_path;  // empty: generate from `sim` when has_sim
  bool has_sim = false;
  SimSpec sim;
  std::string truth_path;

  KernelSpec kernel;
  Bandwidths bandwidths;
  std::string cv_grid;
  int cv_folds = 5;

  Index t_points = 101;
  Index z_points_per_axis = 26;
  Index L = 0;  // 0: smallest L reaching `fve`
  double fve = 0.9;

  FieldMethod method = FieldMethod::WLS;
  bool clamp = true;
  bool pace_covariate_lambda = false;
  std::string z_source = "auto";  // grid | subjects | auto (grid when p = 1)
  Index field_points = 101;
  std::optional<Interval> z_range;
  std::string field_path;

  std::vector<int> cluster_k;
  int restarts = 20;
  int max_iter = 300;
  double tol = 1e-6;
  bool standardize = false;
  bool svg = false;
  std::string labels_path;

  static PipelineConfig from(const Config& c);
  std::string path(const std::string& name) const;
  std::string default_field_path() const;
};

// Fitting settings matching a simulation design (bandwidths, grids, L); the
// simulate command writes them with data.path and truth.path as sim.cfg.
Config sim_defaults(const SimSpec& spec);

// Lower-case method name used in file names ("wls", "pc", "pc2").
std::string method_tag(FieldMethod m);

Simulation simulate(const SimSpec& spec, std::uint64_t seed);

struct FitResult {
  MeanField mean;
  CovSurfaced cov;
  EigenBasisd basis;
  NoiseEstimate sigma2;
  Index L = 0;
  Bandwidths bandwidths;
  std::vector<std::string> log;
};

// Bandwidths with zero entries replaced by the data-relative defaults.
Bandwidths resolve_bandwidths(const FunctionalDataset& d, const Bandwidths& given);

// Staged cross-validation driven by `grid` ("h_t:0.5,1; h_lambda:0.1,0.2"):
// mean bandwidths first, then h_gamma, then h_lambda, each stage holding the
// others at their current values.
Bandwidths cross_validate(const FunctionalDataset& d, const Bandwidths& start, const std::string& grid,
                          int folds, std::uint64_t seed, const CvSettings& settings,
                          std::vector<std::string>* log = nullptr);

// Log lines are collected in FitResult::log and echoed to stderr when `echo`.
FitResult fit(const FunctionalDataset& d, const PipelineConfig& cfg, bool echo = true);

std::vector<VectorXd> field_points(const FunctionalDataset& d, const PipelineConfig& cfg);

EigenvalueField eigenmap(const FunctionalDataset& d, const FitResult& fit, const PipelineConfig& cfg);

// ISE of each eigenvalue function against the truth; for lattice designs also
// the covariance ISE of the eigen-adjusted surface and of the pooled surface.
std::vector<Metric> evaluate_field(const TruthFile& truth, const EigenvalueField& field,
                                   const EigenBasisd* basis = nullptr,
                                   const CovSurfaced* pooled = nullptr);

// Recall and precision per truth class after optimal cluster matching.
std::vector<Metric> evaluate_clusters(const TruthFile& truth, const LabelTable& labels);

// Mean and sample SD per metric name, in order of first appearance.
std::vector<Metric> aggregate(const std::vector<std::vector<Metric>>& runs);

int cmd_simulate(const PipelineConfig& cfg);
int cmd_fit(const PipelineConfig& cfg);
int cmd_eigenmap(const PipelineConfig& cfg);
int cmd_cluster(const PipelineConfig& cfg);
int cmd_evaluate(const PipelineConfig& cfg);

}  // namespace eafpca
