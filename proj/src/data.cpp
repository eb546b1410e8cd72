#include "eafpca/data.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace eafpca {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

FunctionalDataset read_csv(const std::string& path, std::istream& in,
                           std::optional<Interval> domain) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.size() < 4 || header.front() != "subject_id" ||
      header[header.size() - 2] != "t" || header.back() != "y") {
    throw ParseError(path, line_no,
                     "header must be 'subject_id,z_1,...,z_p,t,y'");
  }
  const int p = static_cast<int>(header.size()) - 3;

  std::vector<Subject> subjects;
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw ParseError(path, line_no,
                       fmt::format("expected {} fields, found {}", header.size(),
                                   fields.size()));
    }
    VectorXd z(p);
    for (int k = 0; k < p; ++k) {
      if (!parse_real(fields[1 + k], z[k]))
        throw ParseError(path, line_no,
                         fmt::format("non-numeric {} field '{}'", header[1 + k], fields[1 + k]));
    }
    double t, y;
    if (!parse_real(fields[p + 1], t))
      throw ParseError(path, line_no, fmt::format("non-numeric t field '{}'", fields[p + 1]));
    if (!parse_real(fields[p + 2], y))
      throw ParseError(path, line_no, fmt::format("non-numeric y field '{}'", fields[p + 2]));

    const std::string& id = fields[0];
    auto [it, inserted] = index.try_emplace(id, subjects.size());
    if (inserted) {
      subjects.push_back(Subject{id, z, {}});
    } else {
      const Subject& s = subjects[it->second];
      const bool same =
          ((s.z.array() == z.array()) || (s.z.array().isNaN() && z.array().isNaN())).all();
      if (!same)
        throw ParseError(path, line_no,
                         fmt::format("covariates of subject '{}' differ between rows", id));
    }
    subjects[it->second].obs.push_back({t, y});
  }
  return FunctionalDataset(std::move(subjects), p, domain);
}

FunctionalDataset read_ndjson(const std::string& path, std::istream& in,
                              std::optional<Interval> domain) {
  std::string line;
  std::size_t line_no = 0;
  int p = -1;
  std::vector<Subject> subjects;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    try {
      Subject s;
      s.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      auto z = j.at("z").get<std::vector<double>>();
      auto t = j.at("t").get<std::vector<double>>();
      auto y = j.at("y").get<std::vector<double>>();
      if (t.size() != y.size())
        throw ParseError(path, line_no, "arrays 't' and 'y' differ in length");
      if (p < 0) p = static_cast<int>(z.size());
      if (static_cast<int>(z.size()) != p)
        throw DimensionError("data.load_dataset",
                             fmt::format("subject '{}' has {} covariates, expected {}", s.id,
                                         z.size(), p));
      s.z = Eigen::Map<VectorXd>(z.data(), static_cast<Index>(z.size()));
      for (std::size_t i = 0; i < t.size(); ++i) s.obs.push_back({t[i], y[i]});
      subjects.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  if (p <= 0) throw ParseError(path, line_no, "no subjects with covariates found");
  return FunctionalDataset(std::move(subjects), p, domain);
}

}  // namespace

FunctionalDataset::FunctionalDataset(std::vector<Subject> subjects, int covariate_dim,
                                     std::optional<Interval> time_domain)
    : subjects_(std::move(subjects)), covariate_dim_(covariate_dim) {
  for (auto& s : subjects_) {
    std::stable_sort(s.obs.begin(), s.obs.end(),
                     [](const Observation& a, const Observation& b) { return a.t < b.t; });
  }
  if (time_domain) {
    time_domain_ = *time_domain;
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : subjects_)
      for (const auto& o : s.obs)
        if (std::isfinite(o.t)) {
          lo = std::min(lo, o.t);
          hi = std::max(hi, o.t);
        }
    time_domain_ = lo <= hi ? Interval{lo, hi} : Interval{0.0, 0.0};
  }
}

std::size_t FunctionalDataset::total_observations() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.obs.size();
  return n;
}

Interval FunctionalDataset::covariate_range(int k) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : subjects_) {
    if (k < s.z.size() && std::isfinite(s.z[k])) {
      lo = std::min(lo, s.z[k]);
      hi = std::max(hi, s.z[k]);
    }
  }
  return lo <= hi ? Interval{lo, hi} : Interval{0.0, 0.0};
}

std::string to_string(Rule r) {
  switch (r) {
    case Rule::CovariateDimension: return "covariate-dimension";
    case Rule::NonFiniteCovariate: return "non-finite-covariate";
    case Rule::NoObservations: return "no-observations";
    case Rule::TimeOutOfDomain: return "time-out-of-domain";
    case Rule::NonFiniteValue: return "non-finite";
    case Rule::UnsortedTimes: return "unsorted-times";
  }
  return "unknown";
}

ValidationReport validate(const FunctionalDataset& d) {
  ValidationReport report;
  const Interval dom = d.time_domain();
  for (const auto& s : d.subjects()) {
    if (s.z.size() != d.covariate_dim()) {
      report.push_back({s.id, Rule::CovariateDimension,
                        fmt::format("{} covariates, expected {}", s.z.size(), d.covariate_dim())});
    }
    if (!s.z.allFinite()) report.push_back({s.id, Rule::NonFiniteCovariate, "covariate not finite"});
    if (s.obs.empty()) report.push_back({s.id, Rule::NoObservations, "subject has no observations"});
    for (std::size_t j = 0; j < s.obs.size(); ++j) {
      const auto& o = s.obs[j];
      if (!std::isfinite(o.t) || !std::isfinite(o.y)) {
        report.push_back({s.id, Rule::NonFiniteValue,
                          fmt::format("observation {} is not finite", j)});
        continue;
      }
      if (!dom.contains(o.t)) {
        report.push_back({s.id, Rule::TimeOutOfDomain,
                          fmt::format("t = {} outside [{}, {}]", o.t, dom.lo, dom.hi)});
      }
      if (j > 0 && o.t < s.obs[j - 1].t) {
        report.push_back({s.id, Rule::UnsortedTimes, fmt::format("observation {} out of order", j)});
      }
    }
  }
  return report;
}

DataFormat parse_format(const std::string& s) {
  if (s == "csv") return DataFormat::Csv;
  if (s == "ndjson" || s == "jsonl") return DataFormat::Ndjson;
  throw Error("data.load_dataset", "unknown format '" + s + "'");
}

FunctionalDataset parse_dataset(const std::string& path, std::optional<DataFormat> format,
                                std::optional<Interval> time_domain) {
  std::ifstream in(path);
  if (!in) throw Error("data.load_dataset", "cannot open '" + path + "'");
  const DataFormat f = format.value_or(
      ends_with(path, ".ndjson") || ends_with(path, ".jsonl") ? DataFormat::Ndjson
                                                              : DataFormat::Csv);
  return f == DataFormat::Csv ? read_csv(path, in, time_domain)
                              : read_ndjson(path, in, time_domain);
}

FunctionalDataset load_dataset(const std::string& path, std::optional<DataFormat> format,
                               std::optional<Interval> time_domain) {
  auto d = parse_dataset(path, format, time_domain);
  auto report = validate(d);
  if (!report.empty()) {
    const auto& v = report.front();
    throw Error("data.load_dataset",
                fmt::format("{}: {} violation(s); first: subject '{}' {} ({})", path,
                            report.size(), v.subject_id, to_string(v.rule), v.detail));
  }
  return d;
}

std::string format_real(double x) { return fmt::format("{:.17g}", x); }

void save_dataset(const FunctionalDataset& d, const std::string& path, DataFormat format) {
  std::ofstream out(path);
  if (!out) throw Error("data.save_dataset", "cannot write '" + path + "'");
  const int p = d.covariate_dim();
  if (format == DataFormat::Csv) {
    out << "subject_id";
    for (int k = 1; k <= p; ++k) out << ",z_" << k;
    out << ",t,y\n";
    for (const auto& s : d.subjects()) {
      std::string zs;
      for (int k = 0; k < p; ++k) zs += "," + format_real(s.z[k]);
      for (const auto& o : s.obs)
        out << s.id << zs << ',' << format_real(o.t) << ',' << format_real(o.y) << '\n';
    }
  } else {
    for (const auto& s : d.subjects()) {
      // Written by hand so numbers keep 17 significant digits.
      out << "{\"id\":" << nlohmann::json(s.id).dump() << ",\"z\":[";
      for (int k = 0; k < p; ++k) out << (k ? "," : "") << format_real(s.z[k]);
      out << "],\"t\":[";
      for (std::size_t j = 0; j < s.obs.size(); ++j) out << (j ? "," : "") << format_real(s.obs[j].t);
      out << "],\"y\":[";
      for (std::size_t j = 0; j < s.obs.size(); ++j) out << (j ? "," : "") << format_real(s.obs[j].y);
      out << "]}\n";
    }
  }
  if (!out) throw Error("data.save_dataset", "write failed for '" + path + "'");
}

std::string to_string(SchemeKind k) { return k == SchemeKind::Dense ? "dense" : "sparse"; }

SamplingScheme classify_scheme(const FunctionalDataset& d, int dense_threshold) {
  if (d.empty()) throw Error("data.classify_scheme", "empty dataset");
  if (dense_threshold <= 0) throw Error("data.classify_scheme", "threshold must be positive");
  std::vector<int> counts;
  counts.reserve(d.size());
  for (const auto& s : d.subjects()) counts.push_back(s.n_obs());
  std::sort(counts.begin(), counts.end());
  const std::size_t m = counts.size();
  const double median = m % 2 ? counts[m / 2] : 0.5 * (counts[m / 2 - 1] + counts[m / 2]);
  return {median >= dense_threshold ? SchemeKind::Dense : SchemeKind::Sparse, counts.front(),
          median, counts.back()};
}

}  // namespace eafpca
