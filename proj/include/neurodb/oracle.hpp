#pragma once

// Exact query-function evaluation (ground truth) and the TREE-AGG sampling
// baseline.

#include <cstdint>
#include <optional>
#include <vector>

#include "neurodb/core.hpp"

namespace neurodb::oracle {

/// Output vector of length output_dim, or nullopt when the matching set is
/// empty and the aggregation is undefined on it (AVG, STD, MEDIAN).
using OracleResult = std::optional<std::vector<double>>;

/// Reduces `values` with `kind`. COUNT and SUM of nothing are 0. STD is the
/// population standard deviation; MEDIAN of an even count averages the two
/// middle values. `values` may be reordered.
std::optional<double> aggregate(AggKind kind, std::vector<double>& values);

OracleResult exact_raq(const Dataset& dataset, const QueryFunctionSpec& spec,
                       QueryView q);

/// Distance from q to its k-th nearest row (Euclidean, duplicates kept).
double exact_knn_distance(const Dataset& dataset, std::size_t k, QueryView q);

/// Index of the row attaining the k-th smallest distance; ties go to the
/// lower row index.
std::size_t exact_knn_index(const Dataset& dataset, std::size_t k, QueryView q);
std::vector<double> exact_knn_point(const Dataset& dataset, std::size_t k,
                                    QueryView q);

/// Dispatches on spec.kind.
OracleResult exact_answer(const Dataset& dataset, const QueryFunctionSpec& spec,
                          QueryView q);

/// Bounding-volume tree over a set of points, bulk loaded with
/// sort-tile-recursive packing.
class SpatialIndex {
 public:
  static constexpr std::size_t kFanout = 16;

  struct Node {
    bool leaf = true;
    std::uint32_t begin = 0;  // into entries (leaf) or children (internal)
    std::uint32_t end = 0;
  };

  SpatialIndex() = default;
  /// `points` is row-major with dimension d; entry i refers to point i.
  SpatialIndex(std::vector<double> points, std::size_t d);

  std::size_t size() const { return d_ ? points_.size() / d_ : 0; }
  std::size_t d() const { return d_; }
  std::size_t root() const { return nodes_.size() - 1; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * d_, d_};
  }
  std::span<const double> node_min(std::size_t node) const {
    return {lo_.data() + node * d_, d_};
  }
  std::span<const double> node_max(std::size_t node) const {
    return {hi_.data() + node * d_, d_};
  }
  std::span<const std::uint32_t> node_entries(std::size_t node) const;
  std::span<const std::uint32_t> node_children(std::size_t node) const;

  /// Calls visit(entry) for every point in a leaf whose box may intersect
  /// the predicate region; a superset of the matching points.
  template <typename Visit>
  void for_each_candidate(const QueryFunctionSpec& spec, QueryView q,
                          Visit&& visit) const;

  std::size_t storage_bytes() const;

 private:
  bool may_match(const QueryFunctionSpec& spec, QueryView q,
                 std::size_t node) const;

  std::vector<double> points_;
  std::size_t d_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> entries_;
  std::vector<std::uint32_t> children_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Uniform sample of the dataset with a spatial index over it.
class TreeAgg {
 public:
  /// Samples ceil(fraction * n) rows without replacement.
  static TreeAgg build(const Dataset& dataset, double sample_fraction,
                       std::uint64_t seed);

  /// Aggregates over matching sampled rows. COUNT and SUM are scaled by
  /// n / sample_size; AVG, STD and MEDIAN are the sample statistics.
  OracleResult query(const QueryFunctionSpec& spec, QueryView q) const;

  /// Candidate rows (original dataset indices) visited by the index for q.
  std::vector<std::size_t> candidates(const QueryFunctionSpec& spec, QueryView q) const;

  std::size_t sample_size() const { return sample_rows_.size(); }
  std::size_t population() const { return population_; }
  double scale() const { return scale_; }
  const std::vector<std::size_t>& sample_rows() const { return sample_rows_; }
  const SpatialIndex& index() const { return index_; }
  std::size_t storage_bytes() const;

 private:
  SpatialIndex index_;
  std::vector<std::size_t> sample_rows_;  // sorted ascending
  std::size_t population_ = 0;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------

template <typename Visit>
void SpatialIndex::for_each_candidate(const QueryFunctionSpec& spec,
                                      QueryView q, Visit&& visit) const {
  if (nodes_.empty()) return;
  std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(root())};
  while (!stack.empty()) {
    const std::uint32_t node = stack.back();
    stack.pop_back();
    if (!may_match(spec, q, node)) continue;
    const Node& n = nodes_[node];
    if (n.leaf) {
      for (std::uint32_t e = n.begin; e < n.end; ++e) visit(entries_[e]);
    } else {
      for (std::uint32_t c = n.end; c > n.begin; --c) stack.push_back(children_[c - 1]);
    }
  }
}

}  // namespace neurodb::oracle
