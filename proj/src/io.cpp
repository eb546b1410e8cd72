#include "eafpca/io.hpp"

#include "eafpca/config.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace eafpca {

using nlohmann::json;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::ofstream open_out(const std::string& path, const char* where) {
  std::ofstream out(path);
  if (!out) throw Error(where, "cannot write '" + path + "'");
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

Table read_table(const std::string& path, const char* where) {
  std::ifstream in(path);
  if (!in) throw Error(where, "cannot read '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header", where);
  t.header = split(line);
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw ParseError(path, no, fmt::format("expected {} fields, found {}", t.header.size(), cells.size()), where);
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0') throw ParseError(path, no, "'" + c + "' is not a number", where);
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string join(const double* v, Index n) {
  std::string s;
  for (Index i = 0; i < n; ++i) s += (i ? ", " : "") + format_real(v[i]);
  return s;
}

std::string join(const VectorXd& v) { return join(v.data(), v.size()); }

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

VectorXd unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return to_vector(v);
}

Index locate(const VectorXd& grid, double x) {
  const double* b = grid.data();
  return std::lower_bound(b, b + grid.size(), x) - b;
}

void write_meta(const Config& c, const std::string& path, const char* where) {
  auto out = open_out(path + ".meta", where);
  out << c.to_text();
}

Config read_meta(const std::string& path) { return Config::load(path + ".meta"); }

int covariate_columns(const std::vector<std::string>& header, std::size_t first) {
  int p = 0;
  while (first + p < header.size() && header[first + p] == fmt::format("z_{}", p + 1)) ++p;
  return p;
}

}  // namespace

std::string path_stem(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

// ---- mean field ----

void write_mean_field(const MeanField& mean, const std::string& path) {
  const char* where = "cli.write_mean_field";
  auto out = open_out(path, where);
  const int p = mean.z_grid.dim();
  out << "t";
  for (int k = 0; k < p; ++k) out << ",z_" << k + 1;
  out << ",value\n";
  for (Index f = 0; f < mean.z_grid.size(); ++f) {
    const VectorXd z = mean.z_grid.point(f);
    std::string zs;
    for (int k = 0; k < p; ++k) zs += "," + format_real(z[k]);
    for (Index g = 0; g < mean.t_grid.size(); ++g)
      out << format_real(mean.t_grid[g]) << zs << ',' << format_real(mean.values(g, f)) << '\n';
  }
  Config meta;
  meta.set("kernel", to_string(mean.kernel.family));
  meta.set("degree", std::to_string(mean.degree));
  meta.set("h_t", format_real(mean.bandwidths.h_t));
  meta.set("h_z", join(mean.bandwidths.h_z));
  write_meta(meta, path, where);
}

MeanField read_mean_field(const std::string& path) {
  const char* where = "cli.read_mean_field";
  const Table t = read_table(path, where);
  const int p = covariate_columns(t.header, 1);
  if (t.header.empty() || t.header[0] != "t" || t.header.size() != static_cast<std::size_t>(p) + 2)
    throw Error(where, "'" + path + "' is not a mean field table");
  MeanField m;
  std::vector<double> ts;
  std::vector<std::vector<double>> zs(static_cast<std::size_t>(p));
  for (const auto& r : t.rows) {
    ts.push_back(r[0]);
    for (int k = 0; k < p; ++k) zs[static_cast<std::size_t>(k)].push_back(r[static_cast<std::size_t>(k) + 1]);
  }
  m.t_grid = unique_sorted(ts);
  for (auto& z : zs) m.z_grid.axes.push_back(unique_sorted(z));
  m.values = MatrixXd::Constant(m.t_grid.size(), m.z_grid.size(), std::nan(""));
  if (static_cast<Index>(t.rows.size()) != m.values.size())
    throw Error(where, "'" + path + "' is not a complete grid");
  for (const auto& r : t.rows) {
    Index flat = 0, stride = 1;
    for (int k = 0; k < p; ++k) {
      flat += stride * locate(m.z_grid.axes[static_cast<std::size_t>(k)], r[static_cast<std::size_t>(k) + 1]);
      stride *= m.z_grid.axes[static_cast<std::size_t>(k)].size();
    }
    m.values(locate(m.t_grid, r[0]), flat) = r.back();
  }
  const Config meta = read_meta(path);
  m.kernel.family = parse_kernel_family(meta.get_string("kernel", "epanechnikov"));
  m.degree = static_cast<int>(meta.get_int("degree", 1));
  m.bandwidths.h_t = meta.get_double("h_t", 0.0);
  m.bandwidths.h_z = to_vector(meta.get_list("h_z"));
  return m;
}

// ---- covariance surface ----

void write_cov_surface(const CovSurfaced& cov, const std::string& path) {
  const char* where = "cli.write_cov_surface";
  auto out = open_out(path, where);
  out << "s,t,value\n";
  for (Index i = 0; i < cov.size(); ++i)
    for (Index j = 0; j < cov.size(); ++j)
      out << format_real(cov.t_grid[i]) << ',' << format_real(cov.t_grid[j]) << ','
          << format_real(cov.values(i, j)) << '\n';
  Config meta;
  meta.set("h_gamma", format_real(cov.h_gamma));
  write_meta(meta, path, where);
}

CovSurfaced read_cov_surface(const std::string& path) {
  const char* where = "cli.read_cov_surface";
  const Table t = read_table(path, where);
  if (t.header != std::vector<std::string>{"s", "t", "value"})
    throw Error(where, "'" + path + "' is not a covariance table");
  std::vector<double> ss;
  for (const auto& r : t.rows) ss.push_back(r[0]);
  CovSurfaced c;
  c.t_grid = unique_sorted(ss);
  const Index m = c.t_grid.size();
  if (static_cast<Index>(t.rows.size()) != m * m) throw Error(where, "'" + path + "' is not a complete grid");
  c.values.resize(m, m);
  for (const auto& r : t.rows) c.values(locate(c.t_grid, r[0]), locate(c.t_grid, r[1])) = r[2];
  c.h_gamma = read_meta(path).get_double("h_gamma", 0.0);
  return c;
}

// ---- eigen basis ----

void write_eigen_basis(const EigenBasisd& basis, const std::string& path) {
  const char* where = "cli.write_eigen_basis";
  auto out = open_out(path, where);
  out << "t";
  for (Index k = 0; k < basis.components(); ++k) out << ",phi_" << k + 1;
  out << '\n';
  for (Index g = 0; g < basis.t_grid.size(); ++g) {
    out << format_real(basis.t_grid[g]);
    for (Index k = 0; k < basis.components(); ++k) out << ',' << format_real(basis.phi(g, k));
    out << '\n';
  }
  Config meta;
  meta.set("lambda_star", join(basis.lambda_star));
  meta.set("fve", join(basis.fve));
  write_meta(meta, path, where);
}

EigenBasisd read_eigen_basis(const std::string& path) {
  const char* where = "cli.read_eigen_basis";
  const Table t = read_table(path, where);
  if (t.header.size() < 2 || t.header[0] != "t") throw Error(where, "'" + path + "' is not a basis table");
  const Index m = static_cast<Index>(t.rows.size());
  const Index K = static_cast<Index>(t.header.size()) - 1;
  EigenBasisd b;
  b.t_grid.resize(m);
  b.phi.resize(m, K);
  for (Index g = 0; g < m; ++g) {
    b.t_grid[g] = t.rows[static_cast<std::size_t>(g)][0];
    for (Index k = 0; k < K; ++k) b.phi(g, k) = t.rows[static_cast<std::size_t>(g)][static_cast<std::size_t>(k) + 1];
  }
  b.quad_weights = trapezoid_weights(b.t_grid);
  const Config meta = read_meta(path);
  b.lambda_star = to_vector(meta.get_list("lambda_star"));
  b.fve = to_vector(meta.get_list("fve"));
  if (b.lambda_star.size() != K || b.fve.size() != K)
    throw DimensionError(where, "sidecar does not match the basis columns");
  return b;
}

// ---- eigenvalue field ----

std::string raw_field_path(const std::string& path) { return path_stem(path) + ".raw.csv"; }

void write_field(const EigenvalueField& field, const std::string& path) {
  const char* where = "cli.write_field";
  const Index n = static_cast<Index>(field.z_points.size());
  const Index L = field.lambda.cols();
  const Index p = n > 0 ? field.z_points.front().size() : 0;
  std::string zhead;
  for (Index k = 0; k < p; ++k) zhead += fmt::format("z_{},", k + 1);
  auto out = open_out(path, where);
  auto raw = open_out(raw_field_path(path), where);
  out << zhead;
  raw << zhead;
  for (Index k = 0; k < L; ++k) {
    out << "lambda_" << k + 1 << ',';
    raw << "raw_" << k + 1 << (k + 1 < L ? "," : "\n");
  }
  out << "clamped_mask\n";
  for (Index i = 0; i < n; ++i) {
    std::string zs;
    for (Index k = 0; k < p; ++k) zs += format_real(field.z_points[static_cast<std::size_t>(i)][k]) + ",";
    long mask = 0;
    out << zs;
    raw << zs;
    for (Index k = 0; k < L; ++k) {
      out << format_real(field.lambda(i, k)) << ',';
      raw << format_real(field.raw(i, k)) << (k + 1 < L ? "," : "\n");
      if (field.clamped.size() > 0 && field.clamped(i, k)) mask |= 1L << k;
    }
    out << mask << '\n';
  }
  Config meta;
  meta.set("method", to_string(field.method));
  meta.set("failures", std::to_string(field.failures.size()));
  for (std::size_t f = 0; f < field.failures.size(); ++f)
    meta.set(fmt::format("failure.{}", f), join(field.failures[f].z) + " | " + field.failures[f].message);
  meta.set("warnings", std::to_string(field.warnings.size()));
  for (std::size_t w = 0; w < field.warnings.size(); ++w)
    meta.set(fmt::format("warning.{}", w), field.warnings[w]);
  write_meta(meta, path, where);
}

EigenvalueField read_field(const std::string& path) {
  const char* where = "cli.read_field";
  const Table t = read_table(path, where);
  const int p = covariate_columns(t.header, 0);
  if (t.header.size() < static_cast<std::size_t>(p) + 2 || t.header.back() != "clamped_mask")
    throw Error(where, "'" + path + "' is not an eigenvalue field table");
  const Index L = static_cast<Index>(t.header.size()) - p - 1;
  const Index n = static_cast<Index>(t.rows.size());
  EigenvalueField f;
  f.lambda.resize(n, L);
  f.clamped.resize(n, L);
  for (Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    f.z_points.push_back(to_vector(std::vector<double>(r.begin(), r.begin() + p)));
    const long mask = static_cast<long>(r.back());
    for (Index k = 0; k < L; ++k) {
      f.lambda(i, k) = r[static_cast<std::size_t>(p + k)];
      f.clamped(i, k) = (mask >> k) & 1L;
    }
  }
  f.raw = f.lambda;
  std::ifstream probe(raw_field_path(path));
  if (probe) {
    const Table raw = read_table(raw_field_path(path), where);
    if (static_cast<Index>(raw.rows.size()) != n) throw DimensionError(where, "raw diagnostics do not match the field");
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < L; ++k) f.raw(i, k) = raw.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(p + k)];
  }
  std::ifstream meta_probe(path + ".meta");
  if (meta_probe) {
    const Config meta = read_meta(path);
    f.method = parse_field_method(meta.get_string("method", "wls"));
    for (long i = 0; i < meta.get_int("failures", 0); ++i) {
      const std::string entry = meta.get_string(fmt::format("failure.{}", i), "");
      const auto bar = entry.find(" | ");
      if (bar == std::string::npos) throw Error(where, "malformed failure entry in '" + path + ".meta'");
      f.failures.push_back({to_vector(parse_real_list(entry.substr(0, bar), "failure")), entry.substr(bar + 3)});
    }
    for (long i = 0; i < meta.get_int("warnings", 0); ++i)
      f.warnings.push_back(meta.get_string(fmt::format("warning.{}", i), ""));
  }
  return f;
}

// ---- clustering ----

void write_clustering(const std::vector<VectorXd>& z, const Clustering& c, const std::string& path) {
  const char* where = "cli.write_clustering";
  if (z.size() != c.labels.size()) throw DimensionError(where, "one label per covariate point required");
  auto out = open_out(path, where);
  const Index p = z.empty() ? 0 : z.front().size();
  for (Index k = 0; k < p; ++k) out << "z_" << k + 1 << ',';
  out << "label\n";
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (Index k = 0; k < p; ++k) out << format_real(z[i][k]) << ',';
    out << c.labels[i] << '\n';
  }
  std::vector<Index> sizes(static_cast<std::size_t>(c.k), 0);
  for (int l : c.labels) ++sizes[static_cast<std::size_t>(l)];
  json j;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["restarts"] = c.restarts;
  j["best_restart"] = c.best_restart;
  j["inertia"] = c.inertia;
  j["sizes"] = sizes;
  j["iterations"] = c.trace.size();
  json cents = json::array();
  for (Index r = 0; r < c.centroids.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(c.centroids.cols()));
    for (Index k = 0; k < c.centroids.cols(); ++k) row[static_cast<std::size_t>(k)] = c.centroids(r, k);
    cents.push_back(row);
  }
  j["centroids"] = cents;
  auto js = open_out(path_stem(path) + ".json", where);
  js << j.dump(2) << '\n';
}

LabelTable read_labels(const std::string& path) {
  const char* where = "cli.read_labels";
  const Table t = read_table(path, where);
  const int p = covariate_columns(t.header, 0);
  if (t.header.size() != static_cast<std::size_t>(p) + 1 || t.header.back() != "label")
    throw Error(where, "'" + path + "' is not a label table");
  LabelTable out;
  for (const auto& r : t.rows) {
    out.z.push_back(to_vector(std::vector<double>(r.begin(), r.begin() + p)));
    out.labels.push_back(static_cast<int>(r.back()));
  }
  return out;
}

// ---- truth ----

void write_truth(const Simulation& sim, const std::string& path) {
  const char* where = "cli.write_truth";
  const SimTruth& t = sim.truth;
  auto out = open_out(path, where);
  json head;
  head["kind"] = to_string(t.kind);
  head["variant"] = std::string(1, t.variant);
  head["seed"] = t.seed;
  head["n"] = t.n;
  head["q"] = t.q;
  head["scheme"] = to_string(t.scheme);
  head["sigma2"] = t.sigma2;
  head["time_domain"] = {t.time_domain.lo, t.time_domain.hi};
  json zd = json::array();
  for (const auto& iv : t.z_domain) zd.push_back({iv.lo, iv.hi});
  head["z_domain"] = zd;
  out << head.dump() << '\n';
  for (Index i = 0; i < static_cast<Index>(sim.data.size()); ++i) {
    const Subject& s = sim.data.subject(i);
    json j;
    j["id"] = s.id;
    j["z"] = std::vector<double>(s.z.data(), s.z.data() + s.z.size());
    j["lambda"] = {t.lambda(i, 0), t.lambda(i, 1)};
    j["scores"] = {t.scores(i, 0), t.scores(i, 1)};
    if (t.lattice()) {
      j["label"] = t.labels[static_cast<std::size_t>(i)];
      j["region"] = t.regions[static_cast<std::size_t>(i)];
    }
    out << j.dump() << '\n';
  }
}

TruthFile read_truth(const std::string& path) {
  const char* where = "cli.read_truth";
  std::ifstream in(path);
  if (!in) throw Error(where, "cannot read '" + path + "'");
  TruthFile f;
  std::string line;
  std::size_t no = 0;
  std::vector<json> rows;
  try {
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty truth file", where);
    ++no;
    const json head = json::parse(line);
    SimTruth& t = f.truth;
    t.kind = parse_sim_kind(head.at("kind").get<std::string>());
    t.variant = head.at("variant").get<std::string>().at(0);
    t.seed = head.at("seed").get<std::uint64_t>();
    t.n = head.at("n").get<int>();
    t.q = head.at("q").get<int>();
    t.scheme = head.at("scheme").get<std::string>() == "sparse" ? SchemeKind::Sparse : SchemeKind::Dense;
    t.sigma2 = head.at("sigma2").get<double>();
    t.time_domain = {head.at("time_domain").at(0).get<double>(), head.at("time_domain").at(1).get<double>()};
    for (const auto& iv : head.at("z_domain")) t.z_domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    while (std::getline(in, line)) {
      ++no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      rows.push_back(json::parse(line));
    }
  } catch (const json::exception& e) {
    throw ParseError(path, no, e.what(), where);
  }
  SimTruth& t = f.truth;
  const Index n = static_cast<Index>(rows.size());
  if (n != t.n) throw DimensionError(where, fmt::format("header declares {} subjects, file has {}", t.n, n));
  t.lambda.resize(n, 2);
  t.scores.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    const json& j = rows[static_cast<std::size_t>(i)];
    f.ids.push_back(j.at("id").get<std::string>());
    f.z.push_back(to_vector(j.at("z").get<std::vector<double>>()));
    for (int k = 0; k < 2; ++k) {
      t.lambda(i, k) = j.at("lambda").at(k).get<double>();
      t.scores(i, k) = j.at("scores").at(k).get<double>();
    }
    if (t.lattice()) {
      t.labels.push_back(j.at("label").get<int>());
      t.regions.push_back(j.at("region").get<int>());
    }
  }
  return f;
}

// ---- metrics ----

void write_metrics(const std::vector<Metric>& metrics, const std::string& csv_path,
                   const std::string& json_path) {
  const char* where = "cli.write_metrics";
  auto out = open_out(csv_path, where);
  out << "metric,mean,sd,runs\n";
  json arr = json::array();
  for (const auto& m : metrics) {
    out << m.name << ',' << format_real(m.mean) << ',' << format_real(m.sd) << ',' << m.runs << '\n';
    arr.push_back({{"metric", m.name}, {"mean", m.mean}, {"sd", m.sd}, {"runs", m.runs}});
  }
  auto js = open_out(json_path, where);
  js << json{{"metrics", arr}}.dump(2) << '\n';
}

std::vector<Metric> read_metrics(const std::string& csv_path) {
  const char* where = "cli.read_metrics";
  std::ifstream in(csv_path);
  if (!in) throw Error(where, "cannot read '" + csv_path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<Metric> out;
  while (std::getline(in, line)) {
    const auto c = split(line);
    if (c.size() != 4) continue;
    out.push_back({c[0], std::strtod(c[1].c_str(), nullptr), std::strtod(c[2].c_str(), nullptr),
                   std::atoi(c[3].c_str())});
  }
  return out;
}

// ---- svg ----

namespace {

std::string color(double u) {
  u = std::clamp(std::isfinite(u) ? u : 0.0, 0.0, 1.0);
  // Dark blue -> teal -> yellow.
  const double r = u < 0.5 ? 40 + 2 * u * (30 - 40) : 30 + (2 * u - 1) * (250 - 30);
  const double g = u < 0.5 ? 30 + 2 * u * (150 - 30) : 150 + (2 * u - 1) * (230 - 150);
  const double b = u < 0.5 ? 110 + 2 * u * (140 - 110) : 140 + (2 * u - 1) * (40 - 140);
  return fmt::format("#{:02x}{:02x}{:02x}", static_cast<int>(r), static_cast<int>(g), static_cast<int>(b));
}

}  // namespace

void write_svg_heatmap(const MatrixXd& cells, const std::string& title, const std::string& path) {
  const char* where = "cli.write_svg";
  const Index nx = cells.rows(), ny = cells.cols();
  const double cell = std::max(2.0, 512.0 / static_cast<double>(std::max(nx, ny)));
  const double lo = cells.minCoeff(), hi = cells.maxCoeff();
  auto out = open_out(path, where);
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" shape-rendering=\"crispEdges\">\n"
      "<text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">{2}</text>\n",
      nx * cell, ny * cell + 24, title);
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i) {
      const double u = hi > lo ? (cells(i, j) - lo) / (hi - lo) : 0.0;
      out << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", i * cell,
                         24 + (ny - 1 - j) * cell, cell, cell, color(u));
    }
  out << "</svg>\n";
}

void write_svg_lines(const VectorXd& x, const MatrixXd& y, const std::string& title,
                     const std::string& path) {
  const char* where = "cli.write_svg";
  if (x.size() != y.rows() || x.size() < 2) throw DimensionError(where, "x and y differ in length");
  const double w = 560, h = 320, pad = 40;
  const double x0 = x.minCoeff(), x1 = x.maxCoeff();
  double y0 = y.minCoeff(), y1 = y.maxCoeff();
  if (y1 <= y0) y1 = y0 + 1.0;
  auto px = [&](double v) { return pad + (v - x0) / (x1 - x0) * (w - 2 * pad); };
  auto py = [&](double v) { return h - pad - (v - y0) / (y1 - y0) * (h - 2 * pad); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto out = open_out(path, where);
  out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n", w, h);
  out << fmt::format("<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n", pad, title);
  out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#888\"/>\n", pad, py(std::clamp(0.0, y0, y1)), w - pad);
  for (Index c = 0; c < y.cols(); ++c) {
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << palette[c % 6] << "\" points=\"";
    for (Index i = 0; i < x.size(); ++i) out << fmt::format("{:.2f},{:.2f} ", px(x[i]), py(y(i, c)));
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace eafpca
