#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace eafpca {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

// Base of every error raised by the library. The message is prefixed with
// "<module>.<operation>: " so the CLI can report where a failure came from.
class Error : public std::runtime_error {
 public:
  Error(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what,
             const std::string& where = "data.load_dataset")
      : Error(where,
              path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A local fit had fewer effective samples than parameters.
class InsufficientLocalData : public Error {
 public:
  InsufficientLocalData(const std::string& where, std::vector<double> query)
      : Error(where, "insufficient local data at " + format_point(query)),
        query_(std::move(query)) {}
  const std::vector<double>& query() const noexcept { return query_; }

  static std::string format_point(const std::vector<double>& q) {
    std::string s = "(";
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(q[i]);
    }
    return s + ")";
  }

 private:
  std::vector<double> query_;
};

// No subject carries positive kernel weight at a covariate query.
class EmptyNeighborhood : public Error {
 public:
  EmptyNeighborhood(const std::string& where, std::vector<double> z)
      : Error(where, "empty neighborhood at z = " +
                         InsufficientLocalData::format_point(z)),
        z_(std::move(z)) {}
  const std::vector<double>& z() const noexcept { return z_; }

 private:
  std::vector<double> z_;
};

// Ridge added to a singular normal-equations diagonal, relative to its trace.
inline constexpr double kRidgeFactor = 1e-10;

}  // namespace eafpca
