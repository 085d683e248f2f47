#pragma once

// Domain data model: datasets, query functions, workloads and accuracy
// metrics shared by every other part of the engine.

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurodb/error.hpp"

namespace neurodb {

struct AttributeDomain {
  double min = 0.0;
  double max = 0.0;
  double span() const { return max - min; }
};

/// Dense row-major numeric table with per-attribute domain bounds.
class Dataset {
 public:
  Dataset() = default;

  /// Takes ownership of `values` (n*d, row-major); domains are the observed
  /// per-attribute min/max.
  Dataset(std::vector<double> values, std::size_t d,
          std::vector<std::string> names = {});

  /// Same as above but with caller-declared domains, which must contain
  /// every value.
  Dataset(std::vector<double> values, std::size_t d,
          std::vector<AttributeDomain> domains,
          std::vector<std::string> names);

  static Dataset from_rows(const std::vector<std::vector<double>>& rows,
                           std::vector<std::string> names = {});

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * d_, d_};
  }
  double at(std::size_t i, std::size_t j) const { return values_[i * d_ + j]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<AttributeDomain>& domains() const { return domains_; }
  const AttributeDomain& domain(std::size_t j) const { return domains_[j]; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  void validate() const;

  std::vector<double> values_;
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<AttributeDomain> domains_;
  std::vector<std::string> names_;
};

/// A query instance: the real vector parameterizing one query.
using QueryInstance = std::vector<double>;
using QueryView = std::span<const double>;

enum class AggKind { Count, Sum, Avg, Std, Median };

struct Aggregation {
  AggKind kind = AggKind::Count;
  std::size_t measure = 0;  // ignored for Count
};

enum class PredicateKind { AxisRange, HalfSpace, RotatedRectangle };

/// Parameterized predicate family P(q, x).
///
/// Query layouts:
///  - AxisRange over attributes a_1..a_r: (lo_1..lo_r, hi_1..hi_r), matching
///    lo_i <= x[a_i] < hi_i.
///  - HalfSpace over (a1, a2): (slope, intercept), matching
///    x[a2] > x[a1] * slope + intercept.
///  - RotatedRectangle over (ax, ay): (p1x, p1y, p2x, p2y, phi). p1, p2 are
///    opposite corners of an axis-aligned rectangle which is then rotated by
///    phi radians about its center. Edges are inclusive.
struct PredicateSpec {
  PredicateKind kind = PredicateKind::AxisRange;
  std::vector<std::size_t> attributes;

  static PredicateSpec axis_range(std::vector<std::size_t> active);
  static PredicateSpec half_space(std::size_t a1, std::size_t a2);
  static PredicateSpec rotated_rectangle(std::size_t ax, std::size_t ay);

  std::size_t d_pred() const;
  void validate(std::size_t d) const;
};

/// Restricts the matching set to rows whose `attribute` equals `value`.
struct GroupBy {
  std::size_t attribute = 0;
  double value = 0.0;
};

enum class QueryKind { Raq, KnnDistance, KnnPoint };

/// Declares one query function f_D over a dataset of dimension `data_dim`.
struct QueryFunctionSpec {
  QueryKind kind = QueryKind::Raq;
  PredicateSpec predicate;
  Aggregation aggregation;
  std::size_t k = 1;
  std::size_t data_dim = 0;
  std::optional<GroupBy> group_by;

  static QueryFunctionSpec raq(PredicateSpec predicate, Aggregation agg,
                               std::size_t data_dim,
                               std::optional<GroupBy> group_by = std::nullopt);
  static QueryFunctionSpec knn_distance(std::size_t k, std::size_t data_dim);
  static QueryFunctionSpec knn_point(std::size_t k, std::size_t data_dim);

  std::size_t d_pred() const;
  std::size_t output_dim() const;
  void validate() const;
  void validate(const Dataset& dataset) const;
};

/// Sampled query set, optionally with ground-truth answers.
struct Workload {
  QueryFunctionSpec spec;
  std::vector<QueryInstance> queries;
  std::vector<std::vector<double>> labels;  // empty when unlabeled

  bool labeled() const { return !labels.empty() || queries.empty(); }
  std::size_t size() const { return queries.size(); }
  void validate() const;
};

struct ErrorReport {
  double mean_normalized_abs_error = 0.0;
  double mean_relative_error = 0.0;
  std::vector<double> per_query_errors;
  std::chrono::duration<double, std::micro> mean_query_time{0};
  std::size_t count = 0;
};

bool evaluate_predicate(const PredicateSpec& spec, QueryView q,
                        std::span<const double> row);

/// Predicate plus the optional group-by equality test.
bool matches(const QueryFunctionSpec& spec, QueryView q,
             std::span<const double> row);

/// Mean over i of |truth_i - predicted_i| / mean_j |truth_j|.
double normalized_abs_error(std::span<const double> truth,
                            std::span<const double> predicted);

/// Per-query terms of normalized_abs_error.
std::vector<double> normalized_abs_errors(std::span<const double> truth,
                                          std::span<const double> predicted);

/// |pred - truth| / truth for truth > 0.
double relative_error(double true_dist, double pred_dist);

const char* to_string(AggKind kind);
const char* to_string(PredicateKind kind);
const char* to_string(QueryKind kind);
AggKind parse_agg_kind(const std::string& text);
PredicateKind parse_predicate_kind(const std::string& text);
QueryKind parse_query_kind(const std::string& text);

}  // namespace neurodb
