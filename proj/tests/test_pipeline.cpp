#include "eafpca/pipeline.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

using namespace eafpca;
namespace fs = std::filesystem;

namespace {

PipelineConfig configure(const std::string& out, const std::string& extra) {
  auto c = Config::parse(extra);
  c.set("out", out);
  return PipelineConfig::from(c);
}

// Simulate, then fit and map with the settings written next to the data.
PipelineConfig run_sim_pipeline(const std::string& out, const std::string& sim_keys) {
  cmd_simulate(configure(out, sim_keys));
  auto c = Config::load(out + "/sim.cfg");
  c.set("out", out);
  auto cfg = PipelineConfig::from(c);
  cmd_fit(cfg);
  cmd_eigenmap(cfg);
  return cfg;
}

std::map<std::string, std::string> snapshot(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() != ".log")
      files[fs::relative(e.path(), dir).string()] = testutil::slurp(e.path().string());
  return files;
}

}  // namespace

TEST(Pipeline, Sim1EndToEnd) {
  testutil::TempDir dir("pipe_sim1");
  auto cfg = run_sim_pipeline(dir.str(), "sim.kind = sim1\nsim.n = 200\nsim.scheme = dense\nseed = 3\n");
  auto basis = read_eigen_basis(dir / "basis.csv");
  EXPECT_GE(basis.fve[1], 0.95);
  auto field = read_field(cfg.default_field_path());
  EXPECT_EQ(field.z_points.size(), 101u);
  EXPECT_EQ(field.lambda.cols(), 2);
  cmd_evaluate(cfg);
  auto metrics = read_metrics(dir / "metrics.csv");
  ASSERT_EQ(metrics.size(), 2u);
  EXPECT_EQ(metrics[0].name, "ise_lambda_1");
  EXPECT_GT(metrics[0].mean, 0.0);
  EXPECT_LT(metrics[0].mean, 20.0);
}

TEST(Pipeline, RerunIsByteIdentical) {
  testutil::TempDir dir("pipe_rerun");
  run_sim_pipeline(dir.str(), "sim.kind = sim1\nsim.n = 120\nsim.scheme = sparse\nseed = 8\n");
  const auto first = snapshot(dir.str());
  run_sim_pipeline(dir.str(), "sim.kind = sim1\nsim.n = 120\nsim.scheme = sparse\nseed = 8\n");
  const auto second = snapshot(dir.str());
  EXPECT_GE(first.size(), 8u);
  EXPECT_EQ(first, second);
}

TEST(Pipeline, Sim3ClusterAndEvaluate) {
  testutil::TempDir dir("pipe_sim3");
  auto cfg = run_sim_pipeline(dir.str(), "sim.kind = sim3\nsim.q = 24\nsim.variant = A\nseed = 2\n");
  cmd_cluster(cfg);
  EXPECT_TRUE(fs::exists(dir / "clusters_wls_k3.csv"));
  EXPECT_TRUE(fs::exists(dir / "clusters_wls_k3.json"));
  auto labels = read_labels(dir / "clusters_wls_k3.csv");
  EXPECT_EQ(labels.labels.size(), 576u);
}

TEST(Pipeline, TruthInjectionScoresPerfectly) {
  auto sim = gen_sim2(16, 4);
  TruthFile tf{sim.truth, {}, {}};
  EigenvalueField f;
  f.lambda = sim.truth.lambda;
  for (const auto& s : sim.data.subjects()) f.z_points.push_back(s.z);
  for (const auto& m : evaluate_field(tf, f)) EXPECT_EQ(m.mean, 0.0) << m.name;

  LabelTable labels{f.z_points, sim.truth.labels};
  for (const auto& m : evaluate_clusters(tf, labels))
    if (!std::isnan(m.mean)) EXPECT_DOUBLE_EQ(m.mean, 1.0) << m.name;

  auto one = gen_sim1(20, SchemeKind::Dense, 1);
  TruthFile t1{one.truth, {}, {}};
  EigenvalueField g;
  g.lambda.resize(11, 2);
  for (int i = 0; i <= 10; ++i) {
    g.z_points.push_back(VectorXd::Constant(1, i / 10.0));
    g.lambda.row(i) = truth::sim1_lambda(i / 10.0).transpose();
  }
  for (const auto& m : evaluate_field(t1, g)) EXPECT_EQ(m.mean, 0.0) << m.name;
}

TEST(Pipeline, MismatchedTruthIsDimensionError) {
  auto sim = gen_sim2(16, 4);
  TruthFile tf{sim.truth, {}, {}};
  EigenvalueField f;
  f.lambda = MatrixXd::Ones(3, 2);
  for (int i = 0; i < 3; ++i) f.z_points.push_back(VectorXd::Constant(1, 0.5));
  EXPECT_THROW(evaluate_field(tf, f), DimensionError);
  auto one = gen_sim1(20, SchemeKind::Dense, 1);
  TruthFile t1{one.truth, {}, {}};
  f.z_points.assign(3, VectorXd::Constant(2, 0.5));
  EXPECT_THROW(evaluate_field(t1, f), DimensionError);
}

TEST(Pipeline, AggregateMeanAndSd) {
  std::vector<std::vector<Metric>> runs{{{"a", 1.0, 0, 1}, {"b", std::nan(""), 0, 1}},
                                        {{"a", 3.0, 0, 1}, {"b", 2.0, 0, 1}}};
  auto agg = aggregate(runs);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_DOUBLE_EQ(agg[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].sd, std::sqrt(2.0));
  EXPECT_EQ(agg[0].runs, 2);
  EXPECT_DOUBLE_EQ(agg[1].mean, 2.0);
  EXPECT_EQ(agg[1].runs, 1);
}

TEST(Pipeline, ConfigValidation) {
  EXPECT_THROW(PipelineConfig::from(Config::parse("bandwidth.h_q = 1\n")), Error);
  EXPECT_THROW(PipelineConfig::from(Config::parse("sim.kind = sim1\ndata.path = x.csv\n")), Error);
  auto cfg = PipelineConfig::from(Config::parse("eigenmap.method = pc\nout = o\n"));
  EXPECT_EQ(cfg.default_field_path(), (fs::path("o") / "field_pc.csv").string());
}

TEST(Pipeline, DefaultBandwidthsFollowTheData) {
  auto sim = gen_sim1(50, SchemeKind::Dense, 2);
  auto b = resolve_bandwidths(sim.data, Bandwidths{});
  EXPECT_DOUBLE_EQ(b.h_t, 1.0);
  EXPECT_DOUBLE_EQ(b.h_gamma, 1.0);
  const Interval zr = sim.data.covariate_range(0);
  EXPECT_DOUBLE_EQ(b.h_z[0], 0.2 * zr.width());
  EXPECT_DOUBLE_EQ(b.h_lambda[0], 0.2 * zr.width());
}

TEST(Pipeline, MissingDataFileFails) {
  testutil::TempDir dir("pipe_missing");
  auto cfg = configure(dir.str(), "data.path = " + (dir / "nope.csv") + "\n");
  EXPECT_THROW(cmd_fit(cfg), Error);
}
