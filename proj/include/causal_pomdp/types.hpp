#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace causal_pomdp {

using Distribution = std::vector<double>;

/// Row-major dense table. Conditional probability tables store one
/// distribution per row.
class Table {
public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Table from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::vector<std::vector<double>> to_rows() const;

  bool operator==(const Table&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Observable prefix h_t = (o_0, a_0, ..., a_{t-1}, o_t).
struct History {
  std::vector<int> observations;
  std::vector<int> actions;

  std::size_t length() const { return actions.size(); }
  bool consistent() const { return observations.size() == actions.size() + 1; }
};

/// One trajectory tagged with its regime: 1 = interventional (standard
/// policy), 0 = observational (privileged policy).
struct Episode {
  std::vector<int> observations;
  std::vector<int> actions;
  int regime = 1;
  double weight = 1.0;

  std::size_t length() const { return actions.size(); }
  bool operator==(const Episode&) const = default;
};

using RegimeDataset = std::vector<Episode>;

class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a history has zero probability under the model being
/// filtered. `step` is the index of the observation that could not be
/// explained.
class ImpossibleHistory : public std::runtime_error {
public:
  ImpossibleHistory(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

inline constexpr double kRowTolerance = 1e-12;

/// Throws ValidationError unless every entry is in [0,1] and the row sums to
/// one within `tol`.
void check_distribution(std::span<const double> row, const std::string& what,
                        double tol = kRowTolerance);
void check_rows(const Table& table, const std::string& what, double tol = kRowTolerance);

void normalize(std::span<double> row);

} // namespace causal_pomdp
