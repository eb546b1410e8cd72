#pragma once

#include "eafpca/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace eafpca {

struct Observation {
  double t;
  double y;
  bool operator==(const Observation&) const = default;
};

struct Subject {
  std::string id;
  VectorXd z;
  std::vector<Observation> obs;  // ascending in t

  int n_obs() const { return static_cast<int>(obs.size()); }
  bool covariance_eligible() const { return obs.size() >= 2; }
  bool operator==(const Subject& o) const {
    return id == o.id && z.size() == o.z.size() && z == o.z && obs == o.obs;
  }
};

struct Interval {
  double lo;
  double hi;
  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const Interval&) const = default;
};

// Per-subject irregular observations sharing one time domain and covariate
// dimension. Immutable once built.
class FunctionalDataset {
 public:
  FunctionalDataset() = default;
  // Observations are sorted by time; when `time_domain` is absent it is taken
  // as [min t, max t] over all subjects.
  FunctionalDataset(std::vector<Subject> subjects, int covariate_dim,
                    std::optional<Interval> time_domain = std::nullopt);

  const std::vector<Subject>& subjects() const { return subjects_; }
  const Subject& subject(std::size_t i) const { return subjects_[i]; }
  std::size_t size() const { return subjects_.size(); }
  bool empty() const { return subjects_.empty(); }
  int covariate_dim() const { return covariate_dim_; }
  const Interval& time_domain() const { return time_domain_; }
  std::size_t total_observations() const;
  // [min, max] of covariate axis k over subjects.
  Interval covariate_range(int k) const;

  bool operator==(const FunctionalDataset& o) const {
    return covariate_dim_ == o.covariate_dim_ && time_domain_ == o.time_domain_ &&
           subjects_ == o.subjects_;
  }

 private:
  std::vector<Subject> subjects_;
  int covariate_dim_ = 0;
  Interval time_domain_{0.0, 0.0};
};

enum class Rule {
  CovariateDimension,
  NonFiniteCovariate,
  NoObservations,
  TimeOutOfDomain,
  NonFiniteValue,
  UnsortedTimes,
};

std::string to_string(Rule r);

struct Violation {
  std::string subject_id;
  Rule rule;
  std::string detail;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const FunctionalDataset& d);

enum class DataFormat { Csv, Ndjson };

DataFormat parse_format(const std::string& s);

// Reads a dataset without running validate(). Only malformed text or a
// covariate-dimension mismatch raise. Format is inferred from the extension
// when not given (".ndjson"/".jsonl" select NDJSON, anything else CSV).
FunctionalDataset parse_dataset(const std::string& path,
                                std::optional<DataFormat> format = std::nullopt,
                                std::optional<Interval> time_domain = std::nullopt);

// parse_dataset followed by validate(); any violation raises.
FunctionalDataset load_dataset(const std::string& path,
                               std::optional<DataFormat> format = std::nullopt,
                               std::optional<Interval> time_domain = std::nullopt);

void save_dataset(const FunctionalDataset& d, const std::string& path,
                  DataFormat format = DataFormat::Csv);

enum class SchemeKind { Dense, Sparse };

std::string to_string(SchemeKind k);

struct SamplingScheme {
  SchemeKind kind;
  int min_obs;
  double median_obs;
  int max_obs;
};

inline constexpr int kDefaultDenseThreshold = 20;

SamplingScheme classify_scheme(const FunctionalDataset& d,
                               int dense_threshold = kDefaultDenseThreshold);

// Decimal text with 17 significant digits; parses back to the same double.
std::string format_real(double x);

}  // namespace eafpca
