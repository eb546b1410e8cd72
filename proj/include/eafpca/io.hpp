#pragma once

#include "eafpca/cluster.hpp"
#include "eafpca/core.hpp"
#include "eafpca/eigen_basis.hpp"
#include "eafpca/eigenmap.hpp"
#include "eafpca/sim.hpp"
#include "eafpca/smooth.hpp"

#include <string>
#include <vector>

namespace eafpca {

// Every artifact is a CSV table with a header row plus, where noted, a
// key-value sidecar at "<path>.meta". Reals are written with 17 significant
// digits so a write/read cycle is exact.

// t, z_1..z_p, value (t fastest); sidecar: kernel, degree, bandwidths.
void write_mean_field(const MeanField& mean, const std::string& path);
MeanField read_mean_field(const std::string& path);

// s, t, value; sidecar: h_gamma.
void write_cov_surface(const CovSurfaced& cov, const std::string& path);
CovSurfaced read_cov_surface(const std::string& path);

// t, phi_1..phi_K; sidecar: lambda_star, fve.
void write_eigen_basis(const EigenBasisd& basis, const std::string& path);
EigenBasisd read_eigen_basis(const std::string& path);

// z_1..z_p, lambda_1..lambda_L, clamped_mask (bit k-1 set when lambda_k was
// clamped); raw pre-clamp values go to "<stem>.raw.csv", the method and any
// failures to the sidecar.
void write_field(const EigenvalueField& field, const std::string& path);
EigenvalueField read_field(const std::string& path);
std::string raw_field_path(const std::string& path);

// z_1..z_p, label plus a JSON summary at "<stem>.json".
void write_clustering(const std::vector<VectorXd>& z, const Clustering& c, const std::string& path);
struct LabelTable {
  std::vector<VectorXd> z;
  std::vector<int> labels;
};
LabelTable read_labels(const std::string& path);

// One JSON object for the design, then one per subject with id, z, lambda,
// scores and (lattice designs) label and region.
struct TruthFile {
  SimTruth truth;
  std::vector<std::string> ids;
  std::vector<VectorXd> z;
};
void write_truth(const Simulation& sim, const std::string& path);
TruthFile read_truth(const std::string& path);

struct Metric {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  int runs = 1;
};
// metric, mean, sd, runs; and the same content as a JSON object.
void write_metrics(const std::vector<Metric>& metrics, const std::string& csv_path,
                   const std::string& json_path);
std::vector<Metric> read_metrics(const std::string& csv_path);

// Minimal SVG output: a q x q heatmap (column-major cells, first index along
// x) and a line plot of the columns of `y` against `x`.
void write_svg_heatmap(const MatrixXd& cells, const std::string& title, const std::string& path);
void write_svg_lines(const VectorXd& x, const MatrixXd& y, const std::string& title,
                     const std::string& path);

std::string path_stem(const std::string& path);

}  // namespace eafpca
