#include "eafpca/pipeline.hpp"

#include "eafpca/parallel.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace eafpca {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "out", "seed", "runs", "threads",
    "data.path", "truth.path",
    "sim.kind", "sim.n", "sim.scheme", "sim.q", "sim.variant",
    "kernel.family",
    "bandwidth.h_t", "bandwidth.h_z", "bandwidth.h_gamma", "bandwidth.h_lambda",
    "bandwidth.cv.folds", "bandwidth.cv.grid",
    "grid.t_points", "grid.z_points_per_axis",
    "fpca.L", "fpca.fve",
    "eigenmap.method", "eigenmap.clamp", "eigenmap.pace_covariate_lambda", "eigenmap.z_source",
    "eigenmap.z_points", "eigenmap.z_range", "eigenmap.field",
    "cluster.k", "cluster.restarts", "cluster.max_iter", "cluster.tol", "cluster.standardize",
    "cluster.svg", "cluster.labels",
};

VectorXd list_or_empty(const Config& c, const std::string& key) {
  const auto v = c.get_list(key);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

VectorXd broadcast(const VectorXd& v, int p, const char* name) {
  if (v.size() == p) return v;
  if (v.size() == 1) return VectorXd::Constant(p, v[0]);
  throw DimensionError("kernel.bandwidths", fmt::format("{} needs 1 or {} entries, got {}", name, p, v.size()));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cli.output", "cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".write_probe";
  std::ofstream test(probe);
  if (!test) throw Error("cli.output", "output directory '" + dir + "' is not writable");
  test.close();
  fs::remove(probe, ec);
}

void note(std::vector<std::string>& log, const std::string& line, bool echo) {
  log.push_back(line);
  if (echo) std::cerr << line << '\n';
}

std::vector<double> head_of(const VectorXd& v, Index n) {
  n = std::min(n, v.size());
  return std::vector<double>(v.data(), v.data() + n);
}

FunctionalDataset load_source(const PipelineConfig& cfg) {
  if (!cfg.data_path.empty()) return load_dataset(cfg.data_path);
  if (cfg.has_sim) return simulate(cfg.sim, cfg.seed).data;
  const std::string fallback = cfg.path("data.csv");
  if (fs::exists(fallback)) return load_dataset(fallback);
  throw Error("cli.input", "no dataset: set data.path or sim.kind");
}

json bandwidths_json(const Bandwidths& b) {
  return {{"h_t", b.h_t},
          {"h_z", std::vector<double>(b.h_z.data(), b.h_z.data() + b.h_z.size())},
          {"h_gamma", b.h_gamma},
          {"h_lambda", std::vector<double>(b.h_lambda.data(), b.h_lambda.data() + b.h_lambda.size())}};
}

VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

void write_fit(const FitResult& r, const PipelineConfig& cfg) {
  write_mean_field(r.mean, cfg.path("mean.csv"));
  write_cov_surface(r.cov, cfg.path("cov.csv"));
  write_eigen_basis(r.basis, cfg.path("basis.csv"));
  json j;
  j["kernel"] = to_string(cfg.kernel.family);
  j["bandwidths"] = bandwidths_json(r.bandwidths);
  j["L"] = r.L;
  j["sigma2"] = r.sigma2.sigma2;
  j["sigma2_raw"] = r.sigma2.raw;
  j["lambda_star"] = head_of(r.basis.lambda_star, 10);
  j["fve"] = head_of(r.basis.fve, 10);
  j["warnings"] = r.basis.warnings;
  std::ofstream(cfg.path("fit.json")) << j.dump(2) << '\n';
  std::ofstream log(cfg.path("fit.log"));
  for (const auto& line : r.log) log << line << '\n';
}

FitResult read_fit(const PipelineConfig& cfg) {
  const std::string meta = cfg.path("fit.json");
  std::ifstream in(meta);
  if (!in) throw Error("cli.eigenmap", "fit artifacts not found in '" + cfg.out + "'; run fit first");
  FitResult r;
  json j;
  try {
    j = json::parse(in);
    r.L = j.at("L").get<Index>();
    r.sigma2.sigma2 = j.at("sigma2").get<double>();
    r.sigma2.raw = j.at("sigma2_raw").get<double>();
    const json& b = j.at("bandwidths");
    r.bandwidths.h_t = b.at("h_t").get<double>();
    r.bandwidths.h_z = to_vec(b.at("h_z").get<std::vector<double>>());
    r.bandwidths.h_gamma = b.at("h_gamma").get<double>();
    r.bandwidths.h_lambda = to_vec(b.at("h_lambda").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error("cli.eigenmap", meta + ": " + e.what());
  }
  r.mean = read_mean_field(cfg.path("mean.csv"));
  r.mean.bandwidths = r.bandwidths;
  r.cov = read_cov_surface(cfg.path("cov.csv"));
  r.basis = read_eigen_basis(cfg.path("basis.csv"));
  return r;
}

bool square_lattice(const std::vector<VectorXd>& z, int& q) {
  if (z.empty() || z.front().size() != 2) return false;
  q = static_cast<int>(std::lround(std::sqrt(static_cast<double>(z.size()))));
  return static_cast<std::size_t>(q) * static_cast<std::size_t>(q) == z.size();
}

MatrixXd lattice_image(const std::vector<VectorXd>& z, const VectorXd& values, int q) {
  MatrixXd img = MatrixXd::Constant(q, q, std::nan(""));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int i1 = std::clamp(static_cast<int>(std::floor(z[i][0] * q)), 0, q - 1);
    const int i2 = std::clamp(static_cast<int>(std::floor(z[i][1] * q)), 0, q - 1);
    img(i1, i2) = values[static_cast<Index>(i)];
  }
  return img;
}

}  // namespace

// ---- configuration ----

PipelineConfig PipelineConfig::from(const Config& c) {
  for (const auto& [k, v] : c.values())
    if (!kKnownKeys.count(k)) throw Error("cli.config", "unknown key '" + k + "'");
  PipelineConfig p;
  p.out = c.get_string("out", p.out);
  p.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
  p.runs = static_cast<int>(c.get_int("runs", 1));
  p.threads = static_cast<int>(c.get_int("threads", 0));
  if (p.runs < 1) throw Error("cli.config", "runs must be positive");

  p.data_path = c.get_string("data.path", "");
  p.truth_path = c.get_string("truth.path", "");
  p.has_sim = c.has("sim.kind");
  if (p.has_sim && !p.data_path.empty())
    throw Error("cli.config", "data.path and sim.kind are mutually exclusive sources");
  if (p.has_sim) {
    p.sim.kind = parse_sim_kind(c.get_string("sim.kind", "sim1"));
    p.sim.n = static_cast<int>(c.get_int("sim.n", p.sim.n));
    const std::string scheme = c.get_string("sim.scheme", "dense");
    if (scheme == "dense" || scheme == "complete") p.sim.scheme = SchemeKind::Dense;
    else if (scheme == "sparse") p.sim.scheme = SchemeKind::Sparse;
    else throw Error("cli.config", "sim.scheme must be dense or sparse");
    p.sim.q = static_cast<int>(c.get_int("sim.q", p.sim.q));
    const std::string variant = c.get_string("sim.variant", "A");
    if (variant.size() != 1) throw Error("cli.config", "sim.variant must be one of A, B, C, D");
    p.sim.variant = variant[0];
  }

  p.kernel.family = parse_kernel_family(c.get_string("kernel.family", "epanechnikov"));
  p.bandwidths.h_t = c.get_double("bandwidth.h_t", 0.0);
  p.bandwidths.h_z = list_or_empty(c, "bandwidth.h_z");
  p.bandwidths.h_gamma = c.get_double("bandwidth.h_gamma", 0.0);
  p.bandwidths.h_lambda = list_or_empty(c, "bandwidth.h_lambda");
  p.cv_grid = c.get_string("bandwidth.cv.grid", "");
  p.cv_folds = static_cast<int>(c.get_int("bandwidth.cv.folds", p.cv_folds));

  p.t_points = c.get_int("grid.t_points", p.t_points);
  p.z_points_per_axis = c.get_int("grid.z_points_per_axis", p.z_points_per_axis);
  p.L = c.get_int("fpca.L", 0);
  p.fve = c.get_double("fpca.fve", p.fve);

  p.method = parse_field_method(c.get_string("eigenmap.method", "wls"));
  p.clamp = c.get_bool("eigenmap.clamp", true);
  p.pace_covariate_lambda = c.get_bool("eigenmap.pace_covariate_lambda", false);
  p.z_source = c.get_string("eigenmap.z_source", "auto");
  if (p.z_source != "auto" && p.z_source != "grid" && p.z_source != "subjects")
    throw Error("cli.config", "eigenmap.z_source must be auto, grid or subjects");
  p.field_points = c.get_int("eigenmap.z_points", p.field_points);
  if (c.has("eigenmap.z_range")) {
    const auto r = c.get_list("eigenmap.z_range");
    if (r.size() != 2 || !(r[1] > r[0])) throw Error("cli.config", "eigenmap.z_range needs lo, hi with lo < hi");
    p.z_range = Interval{r[0], r[1]};
  }
  p.field_path = c.get_string("eigenmap.field", "");

  if (c.has("cluster.k")) p.cluster_k = parse_int_range(*c.get("cluster.k"), "cluster.k");
  p.restarts = static_cast<int>(c.get_int("cluster.restarts", p.restarts));
  p.max_iter = static_cast<int>(c.get_int("cluster.max_iter", p.max_iter));
  p.tol = c.get_double("cluster.tol", p.tol);
  p.standardize = c.get_bool("cluster.standardize", false);
  p.svg = c.get_bool("cluster.svg", false);
  p.labels_path = c.get_string("cluster.labels", "");
  return p;
}

std::string PipelineConfig::path(const std::string& name) const { return (fs::path(out) / name).string(); }

std::string method_tag(FieldMethod m) {
  std::string s = to_string(m);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string PipelineConfig::default_field_path() const {
  return field_path.empty() ? path("field_" + method_tag(method) + ".csv") : field_path;
}

Config sim_defaults(const SimSpec& spec) {
  Config c;
  c.set("kernel.family", "epanechnikov");
  c.set("grid.t_points", "101");
  c.set("grid.z_points_per_axis", "26");
  switch (spec.kind) {
    case SimKind::Sim1:
      c.set("bandwidth.h_t", "1");
      c.set("bandwidth.h_z", "0.2");
      c.set("bandwidth.h_gamma", "1");
      c.set("bandwidth.h_lambda", "0.2");
      c.set("fpca.L", "2");
      c.set("eigenmap.z_source", "grid");
      c.set("eigenmap.z_points", "101");
      c.set("eigenmap.z_range", "0, 1");
      break;
    case SimKind::Sim2:
      c.set("bandwidth.h_t", "0.1");
      c.set("bandwidth.h_z", "0.1");
      c.set("bandwidth.h_gamma", "0.1");
      c.set("bandwidth.h_lambda", "0.05");
      c.set("fpca.fve", "0.9");
      c.set("eigenmap.z_source", "subjects");
      break;
    case SimKind::Sim3:
      c.set("bandwidth.h_t", "0.1");
      c.set("bandwidth.h_z", "0.1");
      c.set("bandwidth.h_gamma", "0.1");
      c.set("bandwidth.h_lambda", "0.03");
      c.set("fpca.L", "2");
      c.set("eigenmap.z_source", "subjects");
      c.set("cluster.k", "3");
      break;
  }
  return c;
}

Simulation simulate(const SimSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case SimKind::Sim1: return gen_sim1(spec.n, spec.scheme, seed);
    case SimKind::Sim2: return gen_sim2(spec.q, seed);
    case SimKind::Sim3: return gen_sim3(spec.variant, spec.q, seed);
  }
  throw Error("sim.simulate", "unknown design");
}

// ---- fitting ----

Bandwidths resolve_bandwidths(const FunctionalDataset& d, const Bandwidths& given) {
  const int p = d.covariate_dim();
  const Interval dom = d.time_domain();
  const double trange = dom.hi > dom.lo ? dom.hi - dom.lo : 1.0;
  Bandwidths b = given;
  if (b.h_t == 0.0) b.h_t = 0.1 * trange;
  if (b.h_gamma == 0.0) b.h_gamma = 0.1 * trange;
  VectorXd zdef(p);
  for (int k = 0; k < p; ++k) {
    const Interval r = d.covariate_range(k);
    zdef[k] = r.hi > r.lo ? 0.2 * (r.hi - r.lo) : 1.0;
  }
  b.h_z = b.h_z.size() == 0 ? zdef : broadcast(b.h_z, p, "h_z");
  b.h_lambda = b.h_lambda.size() == 0 ? zdef : broadcast(b.h_lambda, p, "h_lambda");
  b.check(p);
  return b;
}

Bandwidths cross_validate(const FunctionalDataset& d, const Bandwidths& start, const std::string& grid,
                          int folds, std::uint64_t seed, const CvSettings& settings,
                          std::vector<std::string>* log) {
  const int p = d.covariate_dim();
  std::map<std::string, std::vector<double>> lists;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error("cli.config", "bandwidth.cv.grid entries look like 'h_t:0.5,1'");
    std::string name = item.substr(0, colon);
    name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
    if (name != "h_t" && name != "h_z" && name != "h_gamma" && name != "h_lambda")
      throw Error("cli.config", "unknown bandwidth '" + name + "' in bandwidth.cv.grid");
    lists[name] = parse_real_list(item.substr(colon + 1), "bandwidth.cv.grid");
  }
  Bandwidths b = start;
  auto run = [&](CvTarget target, const std::vector<Bandwidths>& cands) {
    if (cands.size() < 2) {
      if (!cands.empty()) b = cands.front();
      return;
    }
    const CvResult r = cv_bandwidth(d, target, cands, folds, seed, settings);
    b = r.best;
    if (log) {
      for (std::size_t c = 0; c < cands.size(); ++c)
        log->push_back(fmt::format("cv {} candidate {}: error {:.6g}", to_string(target), c, r.errors[c]));
      log->push_back(fmt::format("cv {} selected candidate {}", to_string(target), r.best_index));
    }
  };
  auto values = [&](const char* name, std::vector<double> fallback) {
    auto it = lists.find(name);
    return it == lists.end() ? fallback : it->second;
  };
  if (lists.count("h_t") || lists.count("h_z")) {
    std::vector<Bandwidths> cands;
    for (double ht : values("h_t", {b.h_t}))
      for (double hz : values("h_z", {-1.0})) {
        Bandwidths c = b;
        c.h_t = ht;
        if (hz > 0) c.h_z = VectorXd::Constant(p, hz);
        cands.push_back(c);
      }
    run(CvTarget::Mean, cands);
  }
  if (lists.count("h_gamma")) {
    std::vector<Bandwidths> cands;
    for (double hg : lists["h_gamma"]) {
      Bandwidths c = b;
      c.h_gamma = hg;
      cands.push_back(c);
    }
    run(CvTarget::Covariance, cands);
  }
  if (lists.count("h_lambda")) {
    std::vector<Bandwidths> cands;
    for (double hl : lists["h_lambda"]) {
      Bandwidths c = b;
      c.h_lambda = VectorXd::Constant(p, hl);
      cands.push_back(c);
    }
    run(CvTarget::Eigenvalue, cands);
  }
  return b;
}

FitResult fit(const FunctionalDataset& d, const PipelineConfig& cfg, bool echo) {
  if (d.empty()) throw Error("cli.fit", "dataset has no subjects");
  FitResult r;
  r.bandwidths = resolve_bandwidths(d, cfg.bandwidths);
  if (!cfg.cv_grid.empty()) {
    CvSettings s;
    s.kernel = cfg.kernel;
    s.components = cfg.L > 0 ? cfg.L : 2;
    r.bandwidths = cross_validate(d, r.bandwidths, cfg.cv_grid, cfg.cv_folds, cfg.seed, s, &r.log);
  }
  const Bandwidths& b = r.bandwidths;
  note(r.log, fmt::format("bandwidths: h_t = {:g}, h_z = {}, h_gamma = {:g}, h_lambda = {}", b.h_t,
                          fmt::join(head_of(b.h_z, b.h_z.size()), " "), b.h_gamma,
                          fmt::join(head_of(b.h_lambda, b.h_lambda.size()), " ")), echo);
  const Interval dom = d.time_domain();
  const VectorXd t_grid = uniform_grid(dom.lo, dom.hi, cfg.t_points);
  const CovariateGrid z_grid = CovariateGrid::uniform(d, cfg.z_points_per_axis);
  r.mean = estimate_mean(d, b, cfg.kernel, t_grid, z_grid);
  r.mean.bandwidths = b;
  r.cov = estimate_pooled_cov(d, r.mean, b.h_gamma, cfg.kernel, t_grid);
  r.basis = eigendecompose(r.cov);
  r.sigma2 = estimate_sigma2(d, r.mean, r.cov, cfg.kernel);
  r.L = cfg.L > 0 ? std::min<Index>(cfg.L, r.basis.components()) : select_truncation(r.basis, cfg.fve);
  note(r.log, fmt::format("sigma2 = {:.6g} (raw {:.6g})", r.sigma2.sigma2, r.sigma2.raw), echo);
  note(r.log, "k  lambda_star  fve", echo);
  for (Index k = 0; k < std::min<Index>(8, r.basis.components()); ++k)
    note(r.log, fmt::format("{:<2} {:<12.6g} {:.6f}", k + 1, r.basis.lambda_star[k], r.basis.fve[k]), echo);
  note(r.log, fmt::format("L = {}", r.L), echo);
  for (const auto& w : r.basis.warnings) note(r.log, "warning: " + w, echo);
  return r;
}

std::vector<VectorXd> field_points(const FunctionalDataset& d, const PipelineConfig& cfg) {
  const int p = d.covariate_dim();
  const bool grid = cfg.z_source == "grid" || (cfg.z_source == "auto" && p == 1);
  std::vector<VectorXd> pts;
  if (!grid) {
    for (const auto& s : d.subjects()) pts.push_back(s.z);
    return pts;
  }
  CovariateGrid g;
  for (int k = 0; k < p; ++k) {
    const Interval r = cfg.z_range.value_or(d.covariate_range(k));
    g.axes.push_back(uniform_grid(r.lo, r.hi, cfg.field_points));
  }
  for (Index f = 0; f < g.size(); ++f) pts.push_back(g.point(f));
  return pts;
}

EigenvalueField eigenmap(const FunctionalDataset& d, const FitResult& fit, const PipelineConfig& cfg) {
  if (cfg.method == FieldMethod::PC2) return squared_score_field(d, fit.mean, fit.basis, fit.L);
  FieldOptions o;
  o.h_lambda = fit.bandwidths.h_lambda;
  o.kernel = cfg.kernel;
  o.clamp = cfg.clamp;
  o.sigma2 = fit.sigma2.sigma2;
  o.pace_covariate_lambda = cfg.pace_covariate_lambda;
  return eigenvalue_field(d, fit.mean, fit.basis, fit.L, cfg.method, field_points(d, cfg), o);
}

// ---- evaluation ----

std::vector<Metric> evaluate_field(const TruthFile& tf, const EigenvalueField& field,
                                   const EigenBasisd* basis, const CovSurfaced* pooled) {
  const char* where = "cli.evaluate";
  const SimTruth& t = tf.truth;
  const Index n = static_cast<Index>(field.z_points.size());
  const Index K = std::min<Index>(2, field.lambda.cols());
  std::vector<Metric> out;
  if (n == 0) throw Error(where, "eigenvalue field is empty");
  if (!t.lattice()) {
    if (field.z_points.front().size() != 1) throw DimensionError(where, "field covariates do not match the truth (p = 1)");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return field.z_points[static_cast<std::size_t>(a)][0] < field.z_points[static_cast<std::size_t>(b)][0];
    });
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) z[i] = field.z_points[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])][0];
    for (Index k = 0; k < K; ++k) {
      VectorXd est(n), tru(n);
      for (Index i = 0; i < n; ++i) {
        est[i] = field.lambda(order[static_cast<std::size_t>(i)], k);
        tru[i] = truth::sim1_lambda(z[i])[k];
      }
      out.push_back({fmt::format("ise_lambda_{}", k + 1), ise_curve(est, tru, z), 0.0, 1});
    }
    return out;
  }

  if (t.lambda.rows() != static_cast<Index>(t.q) * t.q)
    throw DimensionError(where, "truth does not cover the lattice");
  const double area = 1.0 / (static_cast<double>(t.q) * t.q);
  std::vector<Index> cell(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (field.z_points[static_cast<std::size_t>(i)].size() != 2)
      throw DimensionError(where, "field covariates do not match the lattice truth");
    cell[static_cast<std::size_t>(i)] = t.lattice_index(field.z_points[static_cast<std::size_t>(i)]);
  }
  for (Index k = 0; k < K; ++k) {
    VectorXd est(n), tru(n);
    for (Index i = 0; i < n; ++i) {
      est[i] = field.lambda(i, k);
      tru[i] = t.lambda(cell[static_cast<std::size_t>(i)], k);
    }
    out.push_back({fmt::format("ise_lambda_{}", k + 1), ise_lattice(est, tru, area), 0.0, 1});
  }
  if (basis && pooled) {
    if (field.lambda.cols() > basis->components())
      throw DimensionError(where, "field has more eigenvalues than the basis");
    const VectorXd& tg = basis->t_grid;
    const VectorXd w = VectorXd::Constant(n, area);
    MatrixXd pooled_on_grid(tg.size(), tg.size());
    for (Index a = 0; a < tg.size(); ++a)
      for (Index b = 0; b < tg.size(); ++b) pooled_on_grid(a, b) = (*pooled)(tg[a], tg[b]);
    auto tru = [&](Index i) { return t.covariance(field.z_points[static_cast<std::size_t>(i)], tg); };
    const double e = ise_cov3(
        [&](Index i) { return reconstruct_cov(*basis, VectorXd(field.lambda.row(i).transpose())).values; }, tru,
        tg, w);
    const double e0 = ise_cov3([&](Index) { return pooled_on_grid; }, tru, tg, w);
    out.push_back({"ise_cov", e, 0.0, 1});
    out.push_back({"ise_cov_pooled", e0, 0.0, 1});
    out.push_back({"ise_cov_ratio", e0 > 0 ? e / e0 : std::nan(""), 0.0, 1});
  }
  return out;
}

std::vector<Metric> evaluate_clusters(const TruthFile& tf, const LabelTable& labels) {
  const char* where = "cli.evaluate";
  const SimTruth& t = tf.truth;
  if (!t.lattice() || t.labels.empty()) throw Error(where, "truth has no region labels");
  std::vector<int> truth_labels;
  for (const auto& z : labels.z) {
    if (z.size() != 2) throw DimensionError(where, "cluster covariates do not match the lattice truth");
    truth_labels.push_back(t.labels[static_cast<std::size_t>(t.lattice_index(z))]);
  }
  const auto matching = match_clusters(labels.labels, truth_labels, -1, 3);
  const auto m = recall_precision(labels.labels, truth_labels, matching, 3);
  std::vector<Metric> out;
  for (int c = 0; c < 3; ++c)
    out.push_back({fmt::format("recall_S{}", c), m[static_cast<std::size_t>(c)].recall.value_or(std::nan("")), 0.0, 1});
  for (int c = 0; c < 3; ++c)
    out.push_back({fmt::format("precision_S{}", c), m[static_cast<std::size_t>(c)].precision.value_or(std::nan("")), 0.0, 1});
  return out;
}

std::vector<Metric> aggregate(const std::vector<std::vector<Metric>>& runs) {
  std::vector<std::string> names;
  std::map<std::string, std::vector<double>> values;
  for (const auto& run : runs)
    for (const auto& m : run) {
      if (!values.count(m.name)) names.push_back(m.name);
      auto& v = values[m.name];
      if (std::isfinite(m.mean)) v.push_back(m.mean);
    }
  std::vector<Metric> out;
  for (const auto& name : names) {
    const auto& v = values[name];
    Metric m{name, std::nan(""), std::nan(""), static_cast<int>(v.size())};
    if (!v.empty()) {
      double s = 0.0;
      for (double x : v) s += x;
      m.mean = s / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m.mean) * (x - m.mean);
      m.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out.push_back(m);
  }
  return out;
}

// ---- subcommands ----

int cmd_simulate(const PipelineConfig& cfg) {
  if (!cfg.has_sim) throw Error("cli.simulate", "sim.kind is required");
  ensure_dir(cfg.out);
  const Simulation sim = simulate(cfg.sim, cfg.seed);
  save_dataset(sim.data, cfg.path("data.csv"));
  write_truth(sim, cfg.path("truth.ndjson"));
  Config hints = sim_defaults(cfg.sim);
  hints.set("data.path", cfg.path("data.csv"));
  hints.set("truth.path", cfg.path("truth.ndjson"));
  hints.set("seed", std::to_string(cfg.seed));
  std::ofstream(cfg.path("sim.cfg")) << "# settings for fitting this simulated dataset\n" << hints.to_text();
  const SamplingScheme scheme = classify_scheme(sim.data);
  std::cout << fmt::format("{}: n = {}, scheme = {}, observations = {}, seed = {}\n", to_string(cfg.sim.kind),
                           sim.data.size(), to_string(scheme.kind), sim.data.total_observations(), cfg.seed);
  return 0;
}

int cmd_fit(const PipelineConfig& cfg) {
  const FunctionalDataset d = load_source(cfg);
  ensure_dir(cfg.out);
  const FitResult r = fit(d, cfg);
  write_fit(r, cfg);
  if (cfg.svg) {
    write_svg_lines(r.basis.t_grid, r.basis.phi.leftCols(r.L), "eigenfunctions", cfg.path("basis.svg"));
  }
  return 0;
}

int cmd_eigenmap(const PipelineConfig& cfg) {
  const FunctionalDataset d = load_source(cfg);
  const FitResult r = read_fit(cfg);
  ensure_dir(cfg.out);
  const EigenvalueField f = eigenmap(d, r, cfg);
  for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
  if (!f.failures.empty())
    std::cerr << fmt::format("{} covariate points failed and were omitted\n", f.failures.size());
  const std::string path = cfg.default_field_path();
  write_field(f, path);
  int q = 0;
  if (cfg.svg && square_lattice(f.z_points, q))
    write_svg_heatmap(lattice_image(f.z_points, f.lambda.col(0), q), "lambda_1", path_stem(path) + ".svg");
  std::cout << fmt::format("{}: {} points, L = {}\n", path, f.z_points.size(), f.lambda.cols());
  return 0;
}

int cmd_cluster(const PipelineConfig& cfg) {
  const std::string path = cfg.default_field_path();
  if (!fs::exists(path)) throw Error("cli.cluster", "eigenvalue field '" + path + "' not found; run eigenmap first");
  const EigenvalueField f = read_field(path);
  ensure_dir(cfg.out);
  const std::vector<int> ks = cfg.cluster_k.empty() ? std::vector<int>{3} : cfg.cluster_k;
  for (int k : ks) {
    KMeansOptions o;
    o.k = k;
    o.restarts = cfg.restarts;
    o.max_iter = cfg.max_iter;
    o.tol = cfg.tol;
    o.seed = cfg.seed;
    o.standardize = cfg.standardize;
    const Clustering c = kmeans(f.lambda, o);
    const std::string out = cfg.path(fmt::format("clusters_{}_k{}.csv", method_tag(f.method), k));
    write_clustering(f.z_points, c, out);
    int q = 0;
    if (cfg.svg && square_lattice(f.z_points, q)) {
      VectorXd lab(static_cast<Index>(c.labels.size()));
      for (std::size_t i = 0; i < c.labels.size(); ++i) lab[static_cast<Index>(i)] = c.labels[i];
      write_svg_heatmap(lattice_image(f.z_points, lab, q), fmt::format("k-means, k = {}", k), path_stem(out) + ".svg");
    }
    std::cout << fmt::format("{}: k = {}, inertia = {:.6g}\n", out, k, c.inertia);
  }
  return 0;
}

namespace {

std::vector<Metric> evaluate_dir(const PipelineConfig& cfg, const TruthFile& truth) {
  std::vector<Metric> metrics;
  const std::string fpath = cfg.default_field_path();
  if (fs::exists(fpath)) {
    const EigenvalueField f = read_field(fpath);
    std::optional<EigenBasisd> basis;
    std::optional<CovSurfaced> pooled;
    if (truth.truth.lattice() && fs::exists(cfg.path("basis.csv")) && fs::exists(cfg.path("cov.csv"))) {
      basis = read_eigen_basis(cfg.path("basis.csv"));
      pooled = read_cov_surface(cfg.path("cov.csv"));
    }
    const auto m = evaluate_field(truth, f, basis ? &*basis : nullptr, pooled ? &*pooled : nullptr);
    metrics.insert(metrics.end(), m.begin(), m.end());
  }
  std::string lpath = cfg.labels_path;
  if (lpath.empty() && truth.truth.lattice()) {
    const int k = cfg.cluster_k.empty() ? 3 : cfg.cluster_k.front();
    lpath = cfg.path(fmt::format("clusters_{}_k{}.csv", method_tag(cfg.method), k));
  }
  if (!lpath.empty() && fs::exists(lpath)) {
    const auto m = evaluate_clusters(truth, read_labels(lpath));
    metrics.insert(metrics.end(), m.begin(), m.end());
  }
  if (metrics.empty()) throw Error("cli.evaluate", "nothing to evaluate: no field or cluster file found");
  return metrics;
}

}  // namespace

int cmd_evaluate(const PipelineConfig& cfg) {
  if (cfg.runs == 1 && !cfg.has_sim) {
    const std::string tpath = cfg.truth_path.empty() ? cfg.path("truth.ndjson") : cfg.truth_path;
    if (!fs::exists(tpath)) throw Error("cli.evaluate", "truth file '" + tpath + "' not found");
    const TruthFile truth = read_truth(tpath);
    const auto metrics = evaluate_dir(cfg, truth);
    write_metrics(metrics, cfg.path("metrics.csv"), cfg.path("metrics.json"));
    for (const auto& m : metrics) std::cout << fmt::format("{:<16} {:.6g}\n", m.name, m.mean);
    return 0;
  }
  if (!cfg.has_sim) throw Error("cli.evaluate", "batch evaluation needs sim.kind");
  ensure_dir(cfg.out);
  std::vector<std::vector<Metric>> per_run(static_cast<std::size_t>(cfg.runs));
  parallel_for(cfg.runs, [&](std::ptrdiff_t r) {
    PipelineConfig rc = cfg;
    rc.seed = cfg.seed + static_cast<std::uint64_t>(r);
    rc.out = cfg.path(fmt::format("run_{:03d}", r));
    rc.field_path.clear();
    rc.labels_path.clear();
    ensure_dir(rc.out);
    const Simulation sim = simulate(cfg.sim, rc.seed);
    write_truth(sim, rc.path("truth.ndjson"));
    const FitResult fr = fit(sim.data, rc, false);
    write_fit(fr, rc);
    const EigenvalueField f = eigenmap(sim.data, fr, rc);
    write_field(f, rc.default_field_path());
    if (!cfg.cluster_k.empty() && sim.truth.lattice()) {
      KMeansOptions o;
      o.k = cfg.cluster_k.front();
      o.restarts = cfg.restarts;
      o.max_iter = cfg.max_iter;
      o.tol = cfg.tol;
      o.seed = rc.seed;
      o.standardize = cfg.standardize;
      write_clustering(f.z_points, kmeans(f.lambda, o),
                       rc.path(fmt::format("clusters_{}_k{}.csv", method_tag(f.method), o.k)));
    }
    TruthFile tf{sim.truth, {}, {}};
    const auto metrics = evaluate_dir(rc, tf);
    write_metrics(metrics, rc.path("metrics.csv"), rc.path("metrics.json"));
    per_run[static_cast<std::size_t>(r)] = metrics;
  });
  const auto agg = aggregate(per_run);
  write_metrics(agg, cfg.path("metrics.csv"), cfg.path("metrics.json"));
  for (const auto& m : agg) std::cout << fmt::format("{:<16} {:.6g} ({:.3g})\n", m.name, m.mean, m.sd);
  return 0;
}

}  // namespace eafpca
