#pragma once

// Experiment harness: synthetic data, query workloads, exact labels,
// accuracy/latency evaluation, grid search and CSV reports.

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "neurodb/core.hpp"
#include "neurodb/engine.hpp"
#include "neurodb/io.hpp"
#include "neurodb/oracle.hpp"

namespace neurodb::bench {

/// Gaussian mixture over the unit hypercube. Component means are uniform in
/// [0,1]^d; each component has a diagonal covariance whose per-dimension
/// standard deviations are uniform in [sigma_min, sigma_max]. Points are
/// clamped to [0,1]^d.
struct GmmSpec {
  std::size_t n_components = 100;
  std::size_t d = 5;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  double sigma_min = 0.01;
  double sigma_max = 0.1;
};

/// Component parameters, row-major n_components x d.
struct GmmModel {
  std::vector<double> means;
  std::vector<double> sigmas;
};

/// The mixture gen_gmm(spec) samples from.
GmmModel gmm_model(const GmmSpec& spec);
Dataset gen_gmm(const GmmSpec& spec);

struct WorkloadSpec {
  QueryKind query = QueryKind::Raq;
  PredicateKind predicate = PredicateKind::AxisRange;
  std::size_t active = 1;                  // r, for axis ranges
  std::vector<std::size_t> attributes;     // explicit predicate attributes
  AggKind agg = AggKind::Avg;
  std::optional<std::size_t> measure;      // defaults to the last attribute
  std::size_t k = 1;
  double range_pct = 10.0;                 // range width, % of each domain span
  std::size_t n_queries = 1000;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;

  void validate(std::size_t d) const;
};

/// Query function for a workload spec. When no attributes are given, r
/// active attributes (or two location attributes) are drawn uniformly
/// without replacement from the seed.
QueryFunctionSpec make_query_function(const Dataset& dataset, const WorkloadSpec& spec);

/// Unlabeled queries. Axis ranges: width range_pct% of each active domain
/// span, lower bound uniform so the range fits inside the domain; a range
/// reaching the domain maximum has its upper bound moved one ulp past it so
/// the maximum row still matches. Rotated rectangles: corners uniform over
/// the location domain, angle uniform in [0, pi/2). Half-spaces: a line with
/// slope uniform in [-1, 1] (scaled by the domain aspect) through a uniform
/// point. k-NN: distinct dataset rows.
Workload gen_workload(const Dataset& dataset, const QueryFunctionSpec& function,
                      const WorkloadSpec& spec);

struct Labeled {
  Workload workload;
  std::size_t dropped = 0;  // queries whose exact answer was empty
};

/// Attaches exact answers, dropping queries whose answer is empty.
Labeled label_workload(const Dataset& dataset, const Workload& workload,
                       std::size_t threads = 1);

/// Seeded permutation split; the first round(fraction * size) permuted
/// queries train, the rest test.
std::pair<Workload, Workload> split_workload(const Workload& workload,
                                             double train_fraction,
                                             std::uint64_t seed);

/// Writes the answer for q into out; returns false for an empty answer.
using Answerer = std::function<bool(QueryView q, std::span<double> out)>;

struct TimingStats {
  double mean_us = 0.0;
  double median_us = 0.0;
  double p99_us = 0.0;
  std::size_t timed = 0;
};

/// Single-threaded per-query wall clock after `warmup` untimed calls. The
/// query list is cycled until at least `min_timed` calls were timed.
TimingStats time_answers(const std::vector<QueryInstance>& queries, const Answerer& answer,
                         std::size_t warmup = 100, std::size_t min_timed = 1000);

struct MethodReport {
  std::string method;
  ErrorReport errors;
  TimingStats timing;
  std::size_t storage_bytes = 0;
  std::size_t empty_answers = 0;  // empty predictions, scored as 0
  std::size_t zero_truth = 0;     // k-NN queries excluded from relative error
  std::string status = "ok";
};

/// Accuracy and latency of `answer` on a labeled test workload. RAQ: per
/// query normalized absolute error. k-NN distance/point: per query relative
/// error of the distance (queries with zero true distance only count toward
/// the normalized absolute error).
MethodReport evaluate(const std::string& method, const Answerer& answer,
                      const Workload& test, std::size_t storage_bytes);

Answerer engine_answerer(const engine::NeuroEngine& engine);
Answerer exact_answerer(const Dataset& dataset, const QueryFunctionSpec& spec);
Answerer tree_agg_answerer(const oracle::TreeAgg& baseline, const QueryFunctionSpec& spec);

struct GridPoint {
  std::size_t height = 4;
  std::size_t n_layers = 5;
  std::size_t first_width = 60;
  std::size_t rest_width = 30;
};

struct GridCeilings {
  double max_query_us = std::numeric_limits<double>::infinity();
  std::size_t max_parameters = std::numeric_limits<std::size_t>::max();
};

struct GridRow {
  GridPoint point;
  std::size_t selected_leaf = 0;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  double validation_error = 0.0;
  double query_us = 0.0;
  std::size_t parameters = 0;
  bool feasible = false;
};

struct GridResult {
  GridPoint best;
  std::vector<GridRow> rows;
};

/// For each candidate, partitions the training queries, trains only the
/// most populated partition and scores it on the validation queries routed
/// there (all validation queries if none are). Returns the feasible
/// candidate with the lowest validation error, ties to fewer parameters.
GridResult grid_search(const Workload& train, const Workload& validation,
                       const std::vector<GridPoint>& grid, const GridCeilings& ceilings,
                       const mlp::TrainConfig& config);

/// Every experiment setting, with defaults. See docs/formats.md for keys.
struct ExperimentConfig {
  std::string dataset = "gmm";
  GmmSpec gmm;
  WorkloadSpec workload;
  std::vector<std::string> methods{"neurodb", "tree-agg", "exact"};
  engine::BuildOptions build;
  double sample_fraction = 0.01;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::string output;

  static ExperimentConfig from_key_values(const io::KeyValues& kv);
  io::KeyValues to_key_values() const;
};

struct BenchReport {
  ExperimentConfig config;
  std::size_t train_queries = 0;
  std::size_t test_queries = 0;
  std::size_t dropped = 0;
  std::vector<MethodReport> methods;
};

std::string csv_header();
std::string csv_row(const BenchReport& report, const MethodReport& method);

/// gen -> label -> split -> train -> evaluate. One CSV row per method goes
/// to `csv` as soon as it completes; a failing method writes a row with a
/// "failed" status before the error propagates.
BenchReport run_experiment(const ExperimentConfig& config, std::ostream& csv,
                           std::ostream* log = nullptr);

}  // namespace neurodb::bench
