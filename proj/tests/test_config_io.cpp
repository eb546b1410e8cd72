#include "eafpca/config.hpp"
#include "eafpca/io.hpp"
#include "eafpca/rng.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace eafpca;

TEST(Config, ParsesKeysValuesAndComments) {
  auto c = Config::parse(
      "# header\n"
      "kernel.family = gaussian   # trailing\n"
      "\n"
      "bandwidth.h_z = 0.1, 0.2\n"
      "cluster.standardize=yes\n"
      "fpca.L = 3\n");
  EXPECT_EQ(c.get_string("kernel.family", ""), "gaussian");
  EXPECT_EQ(c.get_list("bandwidth.h_z"), (std::vector<double>{0.1, 0.2}));
  EXPECT_TRUE(c.get_bool("cluster.standardize", false));
  EXPECT_EQ(c.get_int("fpca.L", 0), 3);
  EXPECT_EQ(c.get_int("missing", 7), 7);
  EXPECT_TRUE(c.get_list("missing").empty());
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(Config::parse("no equals sign\n"), ParseError);
  EXPECT_THROW(Config::parse("bad key! = 1\n"), ParseError);
  try {
    Config::parse("a = 1\nb = 2\na = 3\n");
    FAIL() << "duplicate key accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  auto c = Config::parse("x = abc\n");
  EXPECT_THROW(c.get_double("x", 0), Error);
  EXPECT_THROW(c.get_int("x", 0), Error);
  EXPECT_THROW(c.get_bool("x", false), Error);
}

TEST(Config, MergeAndTextRoundTrip) {
  auto a = Config::parse("a = 1\nb = 2\n");
  a.merge(Config::parse("b = 5\nc = x\n"));
  EXPECT_EQ(a.get_string("b", ""), "5");
  auto back = Config::parse(a.to_text());
  EXPECT_EQ(back.values(), a.values());
}

TEST(Config, IntRanges) {
  EXPECT_EQ(parse_int_range("3", "k"), (std::vector<int>{3}));
  EXPECT_EQ(parse_int_range("2..5", "k"), (std::vector<int>{2, 3, 4, 5}));
  EXPECT_EQ(parse_int_range("2,4,6", "k"), (std::vector<int>{2, 4, 6}));
  EXPECT_THROW(parse_int_range("5..2", "k"), Error);
  EXPECT_THROW(parse_int_range("2.5", "k"), Error);
}

namespace {

MeanField sample_mean() {
  MeanField m;
  m.t_grid = uniform_grid(0.0, 1.0, 7);
  m.z_grid.axes = {uniform_grid(0.0, 1.0, 3), uniform_grid(-1.0, 2.0, 4)};
  m.values.resize(7, 12);
  Rng rng(1);
  for (Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.normal() / 3.0;
  m.bandwidths.h_t = 0.1;
  m.bandwidths.h_z = Eigen::Vector2d(0.2, 0.3);
  m.kernel.family = KernelFamily::Uniform;
  return m;
}

}  // namespace

TEST(Io, MeanFieldRoundTrip) {
  testutil::TempDir dir("io_mean");
  auto m = sample_mean();
  write_mean_field(m, dir / "mean.csv");
  auto back = read_mean_field(dir / "mean.csv");
  EXPECT_EQ(back.t_grid, m.t_grid);
  ASSERT_EQ(back.z_grid.dim(), 2);
  EXPECT_EQ(back.z_grid.axes[1], m.z_grid.axes[1]);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.kernel.family, KernelFamily::Uniform);
  EXPECT_EQ(back.bandwidths.h_z, m.bandwidths.h_z);
}

TEST(Io, CovarianceAndBasisRoundTrip) {
  testutil::TempDir dir("io_cov");
  CovSurfaced c;
  c.t_grid = uniform_grid(0.0, 2.0, 9);
  Rng rng(2);
  MatrixXd a(9, 9);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  c.values = a * a.transpose() / 7.0;
  c.h_gamma = 0.3;
  write_cov_surface(c, dir / "cov.csv");
  auto cb = read_cov_surface(dir / "cov.csv");
  EXPECT_EQ(cb.values, c.values);
  EXPECT_EQ(cb.h_gamma, c.h_gamma);

  auto basis = eigendecompose(c);
  write_eigen_basis(basis, dir / "basis.csv");
  auto bb = read_eigen_basis(dir / "basis.csv");
  EXPECT_EQ(bb.phi, basis.phi);
  EXPECT_EQ(bb.lambda_star, basis.lambda_star);
  EXPECT_EQ(bb.fve, basis.fve);
  EXPECT_EQ(bb.quad_weights, basis.quad_weights);
}

TEST(Io, FieldRoundTrip) {
  testutil::TempDir dir("io_field");
  EigenvalueField f;
  f.method = FieldMethod::PC;
  for (int i = 0; i < 4; ++i) f.z_points.push_back(Eigen::Vector2d(i / 3.0, 1.0 - i / 7.0));
  f.raw.resize(4, 2);
  f.raw << 1.0, -0.5, 2.0 / 3.0, 0.25, -1e-3, 4.0, 0.1, 0.2;
  f.lambda = f.raw.cwiseMax(0.0);
  f.clamped = f.lambda.array() != f.raw.array();
  f.failures.push_back({Eigen::Vector2d(0.5, 0.5), "insufficient local data"});
  f.warnings.push_back("note");
  write_field(f, dir / "field.csv");
  auto back = read_field(dir / "field.csv");
  EXPECT_EQ(back.method, FieldMethod::PC);
  EXPECT_EQ(back.lambda, f.lambda);
  EXPECT_EQ(back.raw, f.raw);
  EXPECT_TRUE((back.clamped == f.clamped).all());
  ASSERT_EQ(back.z_points.size(), 4u);
  EXPECT_EQ(back.z_points[1], f.z_points[1]);
  ASSERT_EQ(back.failures.size(), 1u);
  EXPECT_EQ(back.failures[0].message, "insufficient local data");
  EXPECT_TRUE(std::filesystem::exists(raw_field_path(dir / "field.csv")));
}

TEST(Io, TruthRoundTrip) {
  testutil::TempDir dir("io_truth");
  auto sim = gen_sim3('C', 16, 4);
  write_truth(sim, dir / "truth.ndjson");
  auto t = read_truth(dir / "truth.ndjson");
  EXPECT_EQ(t.truth.kind, SimKind::Sim3);
  EXPECT_EQ(t.truth.variant, 'C');
  EXPECT_EQ(t.truth.q, 16);
  EXPECT_EQ(t.truth.lambda, sim.truth.lambda);
  EXPECT_EQ(t.truth.scores, sim.truth.scores);
  EXPECT_EQ(t.truth.labels, sim.truth.labels);
  EXPECT_EQ(t.truth.regions, sim.truth.regions);
  EXPECT_EQ(t.ids.front(), sim.data.subject(0).id);
  EXPECT_EQ(t.z[17], sim.data.subject(17).z);
}

TEST(Io, LabelsAndMetricsRoundTrip) {
  testutil::TempDir dir("io_labels");
  std::vector<VectorXd> z;
  Clustering c;
  for (int i = 0; i < 5; ++i) {
    z.push_back(VectorXd::Constant(1, i / 4.0));
    c.labels.push_back(i % 2);
  }
  c.k = 2;
  c.centroids = MatrixXd::Zero(2, 1);
  write_clustering(z, c, dir / "clusters.csv");
  auto t = read_labels(dir / "clusters.csv");
  EXPECT_EQ(t.labels, c.labels);
  EXPECT_EQ(t.z[3], z[3]);
  EXPECT_TRUE(std::filesystem::exists(dir / "clusters.json"));

  std::vector<Metric> m{{"ise_lambda_1", 2.5, 0.125, 10}, {"recall_S0", 0.95, 0.01, 10}};
  write_metrics(m, dir / "m.csv", dir / "m.json");
  auto mb = read_metrics(dir / "m.csv");
  ASSERT_EQ(mb.size(), 2u);
  EXPECT_EQ(mb[1].name, "recall_S0");
  EXPECT_EQ(mb[0].sd, 0.125);
  EXPECT_EQ(mb[1].runs, 10);
}

TEST(Io, SvgOutputIsWellFormed) {
  testutil::TempDir dir("io_svg");
  write_svg_heatmap(MatrixXd::Random(8, 8), "field", dir / "h.svg");
  write_svg_lines(uniform_grid(0, 1, 5), MatrixXd::Random(5, 2), "basis", dir / "l.svg");
  for (const char* f : {"h.svg", "l.svg"}) {
    const auto text = testutil::slurp(dir / f);
    EXPECT_NE(text.find("<svg"), std::string::npos);
    EXPECT_NE(text.find("</svg>"), std::string::npos);
  }
}
