#include "neurodb/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace neurodb {

namespace {

std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

}  // namespace

Dataset::Dataset(std::vector<double> values, std::size_t d,
                 std::vector<std::string> names)
    : values_(std::move(values)), d_(d), names_(std::move(names)) {
  require(d_ >= 1, "dataset needs at least one attribute");
  require(values_.size() % d_ == 0, "dataset value count is not a multiple of d");
  n_ = values_.size() / d_;
  require(n_ >= 1, "dataset needs at least one row");
  domains_.resize(d_);
  for (std::size_t j = 0; j < d_; ++j) {
    domains_[j] = {values_[j], values_[j]};
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < d_; ++j) {
      const double v = values_[i * d_ + j];
      domains_[j].min = std::min(domains_[j].min, v);
      domains_[j].max = std::max(domains_[j].max, v);
    }
  }
  if (names_.empty()) names_ = default_names(d_);
  validate();
}

Dataset::Dataset(std::vector<double> values, std::size_t d,
                 std::vector<AttributeDomain> domains,
                 std::vector<std::string> names)
    : values_(std::move(values)),
      d_(d),
      domains_(std::move(domains)),
      names_(std::move(names)) {
  require(d_ >= 1, "dataset needs at least one attribute");
  require(values_.size() % d_ == 0, "dataset value count is not a multiple of d");
  n_ = values_.size() / d_;
  if (names_.empty()) names_ = default_names(d_);
  validate();
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows,
                           std::vector<std::string> names) {
  require(!rows.empty(), "dataset needs at least one row");
  const std::size_t d = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * d);
  for (const auto& r : rows) {
    require(r.size() == d, "ragged dataset rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Dataset(std::move(values), d, std::move(names));
}

void Dataset::validate() const {
  require(n_ >= 1, "dataset needs at least one row");
  require(domains_.size() == d_, "domain count must equal d");
  require(names_.size() == d_, "attribute name count must equal d");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < d_; ++j) {
      const double v = values_[i * d_ + j];
      require(std::isfinite(v), "dataset contains a non-finite value");
      require(domains_[j].min <= v && v <= domains_[j].max,
              "dataset value outside its attribute domain");
    }
  }
}

PredicateSpec PredicateSpec::axis_range(std::vector<std::size_t> active) {
  return {PredicateKind::AxisRange, std::move(active)};
}

PredicateSpec PredicateSpec::half_space(std::size_t a1, std::size_t a2) {
  return {PredicateKind::HalfSpace, {a1, a2}};
}

PredicateSpec PredicateSpec::rotated_rectangle(std::size_t ax, std::size_t ay) {
  return {PredicateKind::RotatedRectangle, {ax, ay}};
}

std::size_t PredicateSpec::d_pred() const {
  switch (kind) {
    case PredicateKind::AxisRange: return 2 * attributes.size();
    case PredicateKind::HalfSpace: return 2;
    case PredicateKind::RotatedRectangle: return 5;
  }
  return 0;
}

void PredicateSpec::validate(std::size_t d) const {
  for (auto a : attributes) require(a < d, "predicate attribute out of range");
  std::set<std::size_t> distinct(attributes.begin(), attributes.end());
  require(distinct.size() == attributes.size(), "predicate attributes must be distinct");
  switch (kind) {
    case PredicateKind::AxisRange:
      require(!attributes.empty(), "axis range needs at least one active attribute");
      break;
    case PredicateKind::HalfSpace:
    case PredicateKind::RotatedRectangle:
      require(attributes.size() == 2, "predicate binds exactly two attributes");
      break;
  }
}

QueryFunctionSpec QueryFunctionSpec::raq(PredicateSpec predicate,
                                         Aggregation agg, std::size_t data_dim,
                                         std::optional<GroupBy> group_by) {
  QueryFunctionSpec spec;
  spec.kind = QueryKind::Raq;
  spec.predicate = std::move(predicate);
  spec.aggregation = agg;
  spec.data_dim = data_dim;
  spec.group_by = group_by;
  spec.validate();
  return spec;
}

QueryFunctionSpec QueryFunctionSpec::knn_distance(std::size_t k,
                                                  std::size_t data_dim) {
  QueryFunctionSpec spec;
  spec.kind = QueryKind::KnnDistance;
  spec.k = k;
  spec.data_dim = data_dim;
  spec.validate();
  return spec;
}

QueryFunctionSpec QueryFunctionSpec::knn_point(std::size_t k,
                                               std::size_t data_dim) {
  QueryFunctionSpec spec;
  spec.kind = QueryKind::KnnPoint;
  spec.k = k;
  spec.data_dim = data_dim;
  spec.validate();
  return spec;
}

std::size_t QueryFunctionSpec::d_pred() const {
  return kind == QueryKind::Raq ? predicate.d_pred() : data_dim;
}

std::size_t QueryFunctionSpec::output_dim() const {
  return kind == QueryKind::KnnPoint ? data_dim : 1;
}

void QueryFunctionSpec::validate() const {
  require(data_dim >= 1, "query function needs data_dim >= 1");
  if (kind == QueryKind::Raq) {
    predicate.validate(data_dim);
    require(aggregation.kind == AggKind::Count || aggregation.measure < data_dim,
            "measure attribute out of range");
    if (group_by) require(group_by->attribute < data_dim, "group-by attribute out of range");
  } else {
    require(k >= 1, "k must be positive");
  }
}

void QueryFunctionSpec::validate(const Dataset& dataset) const {
  validate();
  require(data_dim == dataset.d(), "query function dimension does not match dataset");
}

void Workload::validate() const {
  spec.validate();
  const std::size_t d_pred = spec.d_pred();
  for (const auto& q : queries) {
    require(q.size() == d_pred, "query length does not match d_pred");
    for (double v : q) require(std::isfinite(v), "query contains a non-finite value");
  }
  if (!labels.empty()) {
    require(labels.size() == queries.size(), "label count must equal query count");
    for (const auto& y : labels) {
      require(y.size() == spec.output_dim(), "label width does not match output_dim");
      for (double v : y) require(std::isfinite(v), "label contains a non-finite value");
    }
  }
}

bool evaluate_predicate(const PredicateSpec& spec, QueryView q,
                        std::span<const double> row) {
  require(q.size() == spec.d_pred(), "query length does not match predicate d_pred");
  const auto& attrs = spec.attributes;
  for (auto a : attrs) require(a < row.size(), "row shorter than predicate attribute");
  switch (spec.kind) {
    case PredicateKind::AxisRange: {
      const std::size_t r = attrs.size();
      for (std::size_t i = 0; i < r; ++i) {
        const double x = row[attrs[i]];
        if (!(q[i] <= x && x < q[r + i])) return false;
      }
      return true;
    }
    case PredicateKind::HalfSpace:
      return row[attrs[1]] > row[attrs[0]] * q[0] + q[1];
    case PredicateKind::RotatedRectangle: {
      const double cx = 0.5 * (q[0] + q[2]);
      const double cy = 0.5 * (q[1] + q[3]);
      const double hx = 0.5 * std::abs(q[2] - q[0]);
      const double hy = 0.5 * std::abs(q[3] - q[1]);
      const double c = std::cos(q[4]);
      const double s = std::sin(q[4]);
      const double dx = row[attrs[0]] - cx;
      const double dy = row[attrs[1]] - cy;
      // rotate the offset by -phi into the rectangle's own frame
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      return std::abs(u) <= hx && std::abs(v) <= hy;
    }
  }
  return false;
}

bool matches(const QueryFunctionSpec& spec, QueryView q,
             std::span<const double> row) {
  if (spec.group_by && row[spec.group_by->attribute] != spec.group_by->value) {
    return false;
  }
  return evaluate_predicate(spec.predicate, q, row);
}

std::vector<double> normalized_abs_errors(std::span<const double> truth,
                                          std::span<const double> predicted) {
  require(truth.size() == predicted.size(), "truth and prediction lengths differ");
  require(!truth.empty(), "normalized error needs at least one value");
  double scale = 0.0;
  for (double t : truth) scale += std::abs(t);
  scale /= static_cast<double>(truth.size());
  if (!(scale > 0.0)) {
    throw UndefinedMetricError("normalized absolute error undefined: all truth values are zero");
  }
  std::vector<double> errors(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    errors[i] = std::abs(truth[i] - predicted[i]) / scale;
  }
  return errors;
}

double normalized_abs_error(std::span<const double> truth,
                            std::span<const double> predicted) {
  const auto errors = normalized_abs_errors(truth, predicted);
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

double relative_error(double true_dist, double pred_dist) {
  if (!(true_dist > 0.0)) {
    throw UndefinedMetricError("relative error undefined for zero true distance");
  }
  return std::abs(pred_dist - true_dist) / true_dist;
}

const char* to_string(AggKind kind) {
  switch (kind) {
    case AggKind::Count: return "count";
    case AggKind::Sum: return "sum";
    case AggKind::Avg: return "avg";
    case AggKind::Std: return "std";
    case AggKind::Median: return "median";
  }
  return "?";
}

const char* to_string(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::AxisRange: return "axis-range";
    case PredicateKind::HalfSpace: return "half-space";
    case PredicateKind::RotatedRectangle: return "rotated-rectangle";
  }
  return "?";
}

const char* to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::Raq: return "raq";
    case QueryKind::KnnDistance: return "knn-distance";
    case QueryKind::KnnPoint: return "knn-point";
  }
  return "?";
}

AggKind parse_agg_kind(const std::string& text) {
  const auto t = lower(text);
  if (t == "count") return AggKind::Count;
  if (t == "sum") return AggKind::Sum;
  if (t == "avg" || t == "mean") return AggKind::Avg;
  if (t == "std") return AggKind::Std;
  if (t == "median") return AggKind::Median;
  throw InputError("unknown aggregation: " + text);
}

PredicateKind parse_predicate_kind(const std::string& text) {
  const auto t = lower(text);
  if (t == "axis-range" || t == "range") return PredicateKind::AxisRange;
  if (t == "half-space") return PredicateKind::HalfSpace;
  if (t == "rotated-rectangle" || t == "rectangle") return PredicateKind::RotatedRectangle;
  throw InputError("unknown predicate: " + text);
}

QueryKind parse_query_kind(const std::string& text) {
  const auto t = lower(text);
  if (t == "raq") return QueryKind::Raq;
  if (t == "knn-distance") return QueryKind::KnnDistance;
  if (t == "knn-point") return QueryKind::KnnPoint;
  throw InputError("unknown query kind: " + text);
}

}  // namespace neurodb
