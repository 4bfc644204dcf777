#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rocsurv {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Right-censored subject with a piecewise-constant covariate history.
///
/// Segment s covers (starts[s], stops[s]]; the first segment also covers
/// t = 0. Values are carried forward within a segment, and past `y` the last
/// segment is carried forward.
struct CovariatePath {
  std::string id;
  std::vector<double> starts;
  std::vector<double> stops;
  std::vector<double> values;  // num_segments() x dim(), row-major
  double y = 0.0;
  bool event = false;

  std::size_t num_segments() const { return starts.size(); }
  std::size_t dim() const { return starts.empty() ? 0 : values.size() / starts.size(); }
  std::size_t segment_index(double t) const;
  std::span<const double> segment_values(std::size_t s) const {
    return {values.data() + s * dim(), dim()};
  }
  std::span<const double> values_at(double t) const { return segment_values(segment_index(t)); }
  double value(double t, std::size_t coordinate) const { return values_at(t)[coordinate]; }

  /// Checks contiguity (first start 0, stop == next start, last stop == y).
  void validate() const;
};

struct Dataset {
  std::vector<CovariatePath> subjects;
  std::vector<std::string> covariate_names;
  std::size_t p = 0;
  double horizon = 0.0;  // s, the upper end of the analysis window

  std::size_t size() const { return subjects.size(); }
  std::size_t num_events() const;

  /// Validates and assembles a dataset. Without an explicit horizon, s is the
  /// 0.95 type-1 quantile of the uncensored times.
  static Dataset make(std::vector<CovariatePath> subjects, std::vector<std::string> covariate_names,
                      std::optional<double> horizon = std::nullopt);
};

/// One row of the long (counting-process) format.
struct LongRow {
  std::string id;
  double tstart = 0.0;
  double tstop = 0.0;
  int status = 0;
  std::vector<double> z;
};

struct LongTable {
  std::vector<std::string> covariate_names;
  std::vector<LongRow> rows;
};

/// Parses `id,tstart,tstop,status,z1,...` CSV with a header line.
LongTable read_long_table(std::istream& in);
LongTable read_long_table_file(const std::string& path);

/// Groups rows by id (first-appearance order of ids), sorts each subject's rows
/// by tstart, and validates the history.
std::vector<CovariatePath> paths_from_rows(const std::vector<LongRow>& rows, std::size_t p);

Dataset ingest_long_format(const LongTable& table, std::optional<double> horizon = std::nullopt);
Dataset read_dataset_file(const std::string& path, std::optional<double> horizon = std::nullopt);

/// Writes the dataset in long format with round-trip precision.
void write_long_format(std::ostream& out, const Dataset& data);

/// Left-continuous inverse empirical quantile: the ceil(n*prob)-th order
/// statistic of `sorted` (1-based, clamped to [1, n]).
double type1_quantile(std::span<const double> sorted, double prob);

std::vector<double> sorted_uncensored_times(const Dataset& data);

struct TimeGrid {
  std::vector<double> times;
  std::vector<double> weights;

  std::size_t size() const { return times.size(); }
  /// Index of the grid time nearest to t; midpoints resolve to the lower index.
  std::size_t nearest(double t) const;
  void validate() const;
};

/// Grid of the k/(q+1) type-1 quantiles (k = 1..q) of the uncensored times,
/// clamped to (0, s], duplicates collapsed, uniform weights.
TimeGrid uncensored_quantile_grid(const Dataset& data, std::size_t q);

/// Fraction of subjects at risk at t (Y >= t) whose coordinate value at t is <= z.
double at_risk_ecdf(const Dataset& data, double t, std::size_t coordinate, double z);

/// Frozen at-risk ECDFs: anchor 0 is the baseline (t = 0+, everyone at risk),
/// anchor k (1..q) is grid time k-1. New covariate values at any time u are
/// mapped through the anchor of the grid time nearest u.
class EcdfTable {
 public:
  EcdfTable() = default;
  EcdfTable(const Dataset& data, const TimeGrid& grid);

  std::size_t num_anchors() const { return sorted_.size(); }
  std::size_t dim() const { return p_; }
  double transform(std::size_t anchor, std::size_t coordinate, double z) const;
  void transform(std::size_t anchor, std::span<const double> raw, std::span<double> out) const;
  /// Anchor used for time u (>= 1, i.e. a grid anchor).
  std::size_t anchor_for_time(double u) const { return grid_.nearest(u) + 1; }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& sorted_values(std::size_t anchor, std::size_t coordinate) const {
    return sorted_[anchor][coordinate];
  }

  static EcdfTable from_parts(TimeGrid grid, std::size_t p,
                              std::vector<std::vector<std::vector<double>>> sorted);

 private:
  TimeGrid grid_;
  std::size_t p_ = 0;
  std::vector<std::vector<std::vector<double>>> sorted_;  // [anchor][coordinate] -> sorted values
};

/// Transformed covariate path: piece j covers (stops[j-1], stops[j]] (stops[-1] = 0)
/// and carries a constant transformed vector.
struct TransformedPath {
  std::vector<double> stops;
  std::vector<double> values;  // pieces x p

  std::size_t num_pieces() const { return stops.size(); }
  std::size_t piece_index(double u) const;
  std::span<const double> piece(std::size_t j) const {
    const std::size_t p = values.size() / stops.size();
    return {values.data() + j * p, p};
  }
};

/// Transforms the path on (0, until] through `ecdf`. Pieces break at segment
/// boundaries and at midpoints between consecutive grid times.
TransformedPath transform_path(const CovariatePath& path, const EcdfTable& ecdf, double until);

/// Dataset with covariates mapped to [0,1]^p by the at-risk ECDF.
struct TransformedDataset {
  std::shared_ptr<const Dataset> source;
  TimeGrid grid;
  EcdfTable ecdf;
  Matrix baseline;   // n x p, transform at t = 0+
  Matrix at_event;   // n x p, transform at the subject's own Y
  std::vector<std::vector<std::size_t>> at_risk;  // per grid time: subject indices with Y >= t_k
  std::vector<Matrix> grid_values;                // per grid time: |R_k| x p
  std::vector<TransformedPath> paths;             // per subject, over (0, Y]

  std::size_t size() const { return source->size(); }
  std::size_t dim() const { return source->p; }
};

TransformedDataset transform(std::shared_ptr<const Dataset> data, const TimeGrid& grid);

/// Marginal Kaplan-Meier survival evaluated at `times`.
std::vector<double> kaplan_meier(const Dataset& data, std::span<const double> times);

}  // namespace rocsurv
