#include "neurodb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace neurodb::oracle {

namespace {

double squared_distance(QueryView q, std::span<const double> row) {
  double sum = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double diff = q[j] - row[j];
    sum += diff * diff;
  }
  return sum;
}

void check_knn(const Dataset& dataset, std::size_t k, QueryView q) {
  require(k >= 1, "k must be positive");
  require(k <= dataset.n(), "k exceeds the number of rows");
  require(q.size() == dataset.d(), "k-NN query length must equal d");
}

void check_raq(const QueryFunctionSpec& spec, QueryView q, std::size_t d) {
  require(spec.kind == QueryKind::Raq, "expected a range aggregate query function");
  require(spec.data_dim == d, "query function dimension does not match data");
  require(q.size() == spec.d_pred(), "query length does not match d_pred");
}

}  // namespace

std::optional<double> aggregate(AggKind kind, std::vector<double>& values) {
  const auto count = static_cast<double>(values.size());
  switch (kind) {
    case AggKind::Count:
      return count;
    case AggKind::Sum: {
      double sum = 0.0;
      for (double v : values) sum += v;
      return sum;
    }
    case AggKind::Avg: {
      if (values.empty()) return std::nullopt;
      double sum = 0.0;
      for (double v : values) sum += v;
      return sum / count;
    }
    case AggKind::Std: {
      if (values.empty()) return std::nullopt;
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / count;
      double sq = 0.0;
      for (double v : values) sq += (v - mean) * (v - mean);
      return std::sqrt(sq / count);
    }
    case AggKind::Median: {
      if (values.empty()) return std::nullopt;
      const std::size_t m = values.size();
      const auto upper = values.begin() + static_cast<std::ptrdiff_t>(m / 2);
      std::nth_element(values.begin(), upper, values.end());
      const double hi = *upper;
      if (m % 2 == 1) return hi;
      const double lo = *std::max_element(values.begin(), upper);
      return 0.5 * (lo + hi);
    }
  }
  return std::nullopt;
}

OracleResult exact_raq(const Dataset& dataset, const QueryFunctionSpec& spec,
                       QueryView q) {
  check_raq(spec, q, dataset.d());
  const bool need_values = spec.aggregation.kind != AggKind::Count;
  const std::size_t m = spec.aggregation.measure;
  std::vector<double> values;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto row = dataset.row(i);
    if (!matches(spec, q, row)) continue;
    ++count;
    if (need_values) values.push_back(row[m]);
  }
  if (!need_values) return std::vector<double>{static_cast<double>(count)};
  const auto result = aggregate(spec.aggregation.kind, values);
  if (!result) return std::nullopt;
  return std::vector<double>{*result};
}

double exact_knn_distance(const Dataset& dataset, std::size_t k, QueryView q) {
  check_knn(dataset, k, q);
  std::vector<double> distances(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    distances[i] = squared_distance(q, dataset.row(i));
  }
  const auto kth = distances.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(distances.begin(), kth, distances.end());
  return std::sqrt(*kth);
}

std::size_t exact_knn_index(const Dataset& dataset, std::size_t k, QueryView q) {
  check_knn(dataset, k, q);
  std::vector<std::pair<double, std::size_t>> ranked(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    ranked[i] = {squared_distance(q, dataset.row(i)), i};
  }
  const auto kth = ranked.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(ranked.begin(), kth, ranked.end());
  return kth->second;
}

std::vector<double> exact_knn_point(const Dataset& dataset, std::size_t k,
                                    QueryView q) {
  const auto row = dataset.row(exact_knn_index(dataset, k, q));
  return {row.begin(), row.end()};
}

OracleResult exact_answer(const Dataset& dataset, const QueryFunctionSpec& spec,
                          QueryView q) {
  switch (spec.kind) {
    case QueryKind::Raq:
      return exact_raq(dataset, spec, q);
    case QueryKind::KnnDistance:
      return std::vector<double>{exact_knn_distance(dataset, spec.k, q)};
    case QueryKind::KnnPoint:
      return exact_knn_point(dataset, spec.k, q);
  }
  return std::nullopt;
}

// --- SpatialIndex -----------------------------------------------------------

namespace {

/// Orders `items` so that consecutive chunks of `capacity` form STR tiles.
/// key(item, dim) gives the sort coordinate.
template <typename Key>
void str_order(std::span<std::uint32_t> items, std::size_t dim, std::size_t d,
               std::size_t capacity, const Key& key) {
  auto by_dim = [&](std::uint32_t a, std::uint32_t b) {
    const double ka = key(a, dim);
    const double kb = key(b, dim);
    return ka < kb || (ka == kb && a < b);
  };
  std::sort(items.begin(), items.end(), by_dim);
  if (dim + 1 >= d || items.size() <= capacity) return;
  const std::size_t pages = (items.size() + capacity - 1) / capacity;
  const auto slabs = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(pages), 1.0 / static_cast<double>(d - dim))));
  const std::size_t slab_items = capacity * ((pages + slabs - 1) / slabs);
  for (std::size_t start = 0; start < items.size(); start += slab_items) {
    const std::size_t len = std::min(slab_items, items.size() - start);
    str_order(items.subspan(start, len), dim + 1, d, capacity, key);
  }
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<double> points, std::size_t d)
    : points_(std::move(points)), d_(d) {
  require(d_ >= 1, "spatial index needs d >= 1");
  require(points_.size() % d_ == 0 && !points_.empty(), "spatial index needs points");
  const std::size_t n = points_.size() / d_;
  require(n < std::numeric_limits<std::uint32_t>::max(), "too many points");

  entries_.resize(n);
  std::iota(entries_.begin(), entries_.end(), 0u);
  str_order(std::span(entries_), 0, d_, kFanout,
            [&](std::uint32_t i, std::size_t dim) { return points_[i * d_ + dim]; });

  auto add_node = [&](Node node) {
    nodes_.push_back(node);
    lo_.resize(nodes_.size() * d_, std::numeric_limits<double>::infinity());
    hi_.resize(nodes_.size() * d_, -std::numeric_limits<double>::infinity());
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  };

  std::vector<std::uint32_t> level;
  for (std::size_t start = 0; start < n; start += kFanout) {
    const auto end = static_cast<std::uint32_t>(std::min(n, start + kFanout));
    const auto id = add_node({true, static_cast<std::uint32_t>(start), end});
    for (std::uint32_t e = static_cast<std::uint32_t>(start); e < end; ++e) {
      for (std::size_t j = 0; j < d_; ++j) {
        const double v = points_[entries_[e] * d_ + j];
        lo_[id * d_ + j] = std::min(lo_[id * d_ + j], v);
        hi_[id * d_ + j] = std::max(hi_[id * d_ + j], v);
      }
    }
    level.push_back(id);
  }

  while (level.size() > 1) {
    str_order(std::span(level), 0, d_, kFanout, [&](std::uint32_t node, std::size_t dim) {
      return 0.5 * (lo_[node * d_ + dim] + hi_[node * d_ + dim]);
    });
    std::vector<std::uint32_t> next;
    for (std::size_t start = 0; start < level.size(); start += kFanout) {
      const std::size_t end = std::min(level.size(), start + kFanout);
      const auto begin = static_cast<std::uint32_t>(children_.size());
      children_.insert(children_.end(), level.begin() + static_cast<std::ptrdiff_t>(start),
                       level.begin() + static_cast<std::ptrdiff_t>(end));
      const auto id = add_node({false, begin, static_cast<std::uint32_t>(children_.size())});
      for (std::size_t c = start; c < end; ++c) {
        for (std::size_t j = 0; j < d_; ++j) {
          lo_[id * d_ + j] = std::min(lo_[id * d_ + j], lo_[level[c] * d_ + j]);
          hi_[id * d_ + j] = std::max(hi_[id * d_ + j], hi_[level[c] * d_ + j]);
        }
      }
      next.push_back(id);
    }
    level = std::move(next);
  }
}

std::span<const std::uint32_t> SpatialIndex::node_entries(std::size_t node) const {
  const Node& n = nodes_[node];
  if (!n.leaf) return {};
  return {entries_.data() + n.begin, n.end - n.begin};
}

std::span<const std::uint32_t> SpatialIndex::node_children(std::size_t node) const {
  const Node& n = nodes_[node];
  if (n.leaf) return {};
  return {children_.data() + n.begin, n.end - n.begin};
}

bool SpatialIndex::may_match(const QueryFunctionSpec& spec, QueryView q,
                             std::size_t node) const {
  const double* lo = lo_.data() + node * d_;
  const double* hi = hi_.data() + node * d_;
  if (spec.group_by) {
    const auto g = spec.group_by->attribute;
    if (spec.group_by->value < lo[g] || spec.group_by->value > hi[g]) return false;
  }
  const auto& attrs = spec.predicate.attributes;
  switch (spec.predicate.kind) {
    case PredicateKind::AxisRange: {
      const std::size_t r = attrs.size();
      for (std::size_t i = 0; i < r; ++i) {
        if (hi[attrs[i]] < q[i] || lo[attrs[i]] >= q[r + i]) return false;
      }
      return true;
    }
    case PredicateKind::HalfSpace: {
      // x * slope + intercept is monotone in x, so its minimum over the box
      // sits at one end of the x extent.
      const double x = q[0] >= 0.0 ? lo[attrs[0]] : hi[attrs[0]];
      return hi[attrs[1]] > x * q[0] + q[1];
    }
    case PredicateKind::RotatedRectangle: {
      const double cx = 0.5 * (q[0] + q[2]);
      const double cy = 0.5 * (q[1] + q[3]);
      const double hx = 0.5 * std::abs(q[2] - q[0]);
      const double hy = 0.5 * std::abs(q[3] - q[1]);
      const double c = std::abs(std::cos(q[4]));
      const double s = std::abs(std::sin(q[4]));
      const double slack = 1e-9 * (1.0 + std::abs(cx) + std::abs(cy) + hx + hy);
      const double ex = c * hx + s * hy + slack;
      const double ey = s * hx + c * hy + slack;
      return !(hi[attrs[0]] < cx - ex || lo[attrs[0]] > cx + ex ||
               hi[attrs[1]] < cy - ey || lo[attrs[1]] > cy + ey);
    }
  }
  return true;
}

std::size_t SpatialIndex::storage_bytes() const {
  return points_.size() * sizeof(double) + nodes_.size() * sizeof(Node) +
         (entries_.size() + children_.size()) * sizeof(std::uint32_t) +
         (lo_.size() + hi_.size()) * sizeof(double);
}

// --- TreeAgg ----------------------------------------------------------------

TreeAgg TreeAgg::build(const Dataset& dataset, double sample_fraction,
                       std::uint64_t seed) {
  require(sample_fraction > 0.0 && sample_fraction <= 1.0,
          "sample fraction must lie in (0, 1]");
  const std::size_t n = dataset.n();
  const auto m = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(sample_fraction * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (m < n) {
    // partial Fisher-Yates: the first m slots become the sample
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(m);
    std::sort(order.begin(), order.end());
  }

  std::vector<double> points;
  points.reserve(m * dataset.d());
  for (auto r : order) {
    const auto row = dataset.row(r);
    points.insert(points.end(), row.begin(), row.end());
  }

  TreeAgg agg;
  agg.index_ = SpatialIndex(std::move(points), dataset.d());
  agg.sample_rows_ = std::move(order);
  agg.population_ = n;
  agg.scale_ = static_cast<double>(n) / static_cast<double>(m);
  return agg;
}

std::vector<std::size_t> TreeAgg::candidates(const QueryFunctionSpec& spec,
                                             QueryView q) const {
  check_raq(spec, q, index_.d());
  std::vector<std::size_t> out;
  index_.for_each_candidate(spec, q, [&](std::uint32_t e) { out.push_back(sample_rows_[e]); });
  std::sort(out.begin(), out.end());
  return out;
}

OracleResult TreeAgg::query(const QueryFunctionSpec& spec, QueryView q) const {
  check_raq(spec, q, index_.d());
  // Sample points are stored in ascending row order, so sorting matched
  // entries reproduces the exact scan's summation order.
  std::vector<std::uint32_t> hits;
  index_.for_each_candidate(spec, q, [&](std::uint32_t e) {
    if (matches(spec, q, index_.point(e))) hits.push_back(e);
  });
  std::sort(hits.begin(), hits.end());

  const AggKind kind = spec.aggregation.kind;
  std::vector<double> values;
  if (kind != AggKind::Count) {
    values.reserve(hits.size());
    for (auto e : hits) values.push_back(index_.point(e)[spec.aggregation.measure]);
  } else {
    values.resize(hits.size());
  }
  auto result = aggregate(kind, values);
  if (!result) return std::nullopt;
  if (kind == AggKind::Count || kind == AggKind::Sum) *result *= scale_;
  return std::vector<double>{*result};
}

std::size_t TreeAgg::storage_bytes() const {
  return index_.storage_bytes() + sample_rows_.size() * sizeof(std::size_t);
}

}  // namespace neurodb::oracle
