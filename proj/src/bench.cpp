#include "neurodb/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace neurodb::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                    std::size_t count,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

double euclidean(QueryView a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(sum);
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(count, (t + 1) * chunk);
        for (std::size_t i = t * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string sanitize(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

namespace {

GmmModel draw_model(const GmmSpec& spec, std::mt19937_64& rng) {
  require(spec.n_components >= 1, "GMM needs at least one component");
  require(spec.d >= 1 && spec.n >= 1, "GMM needs d >= 1 and n >= 1");
  require(0.0 < spec.sigma_min && spec.sigma_min <= spec.sigma_max,
          "GMM sigma range must satisfy 0 < sigma_min <= sigma_max");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sigma(spec.sigma_min, spec.sigma_max);
  GmmModel model;
  model.means.resize(spec.n_components * spec.d);
  model.sigmas.resize(spec.n_components * spec.d);
  for (auto& m : model.means) m = unit(rng);
  for (auto& s : model.sigmas) s = sigma(rng);
  return model;
}

}  // namespace

GmmModel gmm_model(const GmmSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return draw_model(spec, rng);
}

Dataset gen_gmm(const GmmSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const auto model = draw_model(spec, rng);
  const std::size_t d = spec.d;
  std::uniform_int_distribution<std::size_t> component(0, spec.n_components - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(spec.n * d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = component(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const double x = model.means[c * d + j] + model.sigmas[c * d + j] * normal(rng);
      values[i * d + j] = std::clamp(x, 0.0, 1.0);
    }
  }
  return Dataset(std::move(values), d);
}

void WorkloadSpec::validate(std::size_t d) const {
  require(n_queries >= 1, "workload needs at least one query");
  require(train_fraction > 0.0 && train_fraction <= 1.0, "train fraction must lie in (0, 1]");
  if (query != QueryKind::Raq) {
    require(k >= 1, "k must be positive");
    return;
  }
  require(range_pct > 0.0 && range_pct <= 100.0, "range width must lie in (0, 100] percent");
  if (predicate == PredicateKind::AxisRange && attributes.empty()) {
    require(active >= 1 && active <= d, "active attribute count must lie in [1, d]");
  }
  if (predicate != PredicateKind::AxisRange && attributes.empty()) {
    require(d >= 2, "two-attribute predicates need d >= 2");
  }
}

QueryFunctionSpec make_query_function(const Dataset& dataset, const WorkloadSpec& spec) {
  const std::size_t d = dataset.d();
  spec.validate(d);
  if (spec.query == QueryKind::KnnDistance) return QueryFunctionSpec::knn_distance(spec.k, d);
  if (spec.query == QueryKind::KnnPoint) return QueryFunctionSpec::knn_point(spec.k, d);

  std::vector<std::size_t> attrs = spec.attributes;
  if (attrs.empty()) {
    // separate stream so attribute choice does not shift the query ranges
    std::mt19937_64 rng(spec.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    const std::size_t count = spec.predicate == PredicateKind::AxisRange ? spec.active : 2;
    attrs = sample_without_replacement(d, count, rng);
    if (spec.predicate == PredicateKind::AxisRange) std::sort(attrs.begin(), attrs.end());
  }
  PredicateSpec pred{spec.predicate, attrs};
  Aggregation agg{spec.agg, spec.measure.value_or(d - 1)};
  return QueryFunctionSpec::raq(pred, agg, d);
}

Workload gen_workload(const Dataset& dataset, const QueryFunctionSpec& function,
                      const WorkloadSpec& spec) {
  function.validate(dataset);
  spec.validate(dataset.d());
  Workload w;
  w.spec = function;
  w.queries.reserve(spec.n_queries);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (function.kind != QueryKind::Raq) {
    require(spec.n_queries <= dataset.n(), "k-NN workloads draw distinct rows; too many queries");
    for (auto r : sample_without_replacement(dataset.n(), spec.n_queries, rng)) {
      const auto row = dataset.row(r);
      w.queries.emplace_back(row.begin(), row.end());
    }
    return w;
  }

  const auto& attrs = function.predicate.attributes;
  auto uniform_in = [&](const AttributeDomain& dom) { return dom.min + unit(rng) * dom.span(); };
  for (std::size_t i = 0; i < spec.n_queries; ++i) {
    QueryInstance q(function.d_pred());
    switch (function.predicate.kind) {
      case PredicateKind::AxisRange: {
        const std::size_t r = attrs.size();
        for (std::size_t a = 0; a < r; ++a) {
          const auto& dom = dataset.domain(attrs[a]);
          const double width = spec.range_pct / 100.0 * dom.span();
          double lower = dom.min + unit(rng) * (dom.span() - width);
          double upper = lower + width;
          if (spec.range_pct >= 100.0) {
            lower = dom.min;
            upper = dom.max;
          }
          if (upper >= dom.max) upper = std::nextafter(dom.max, std::numeric_limits<double>::infinity());
          q[a] = lower;
          q[r + a] = upper;
        }
        break;
      }
      case PredicateKind::HalfSpace: {
        const auto& dx = dataset.domain(attrs[0]);
        const auto& dy = dataset.domain(attrs[1]);
        const double aspect = dx.span() > 0.0 ? dy.span() / dx.span() : 1.0;
        const double slope = (2.0 * unit(rng) - 1.0) * aspect;
        const double x0 = uniform_in(dx);
        const double y0 = uniform_in(dy);
        q[0] = slope;
        q[1] = y0 - slope * x0;
        break;
      }
      case PredicateKind::RotatedRectangle: {
        const auto& dx = dataset.domain(attrs[0]);
        const auto& dy = dataset.domain(attrs[1]);
        q[0] = uniform_in(dx);
        q[1] = uniform_in(dy);
        q[2] = uniform_in(dx);
        q[3] = uniform_in(dy);
        q[4] = unit(rng) * (std::numbers::pi / 2.0);
        break;
      }
    }
    w.queries.push_back(std::move(q));
  }
  return w;
}

Labeled label_workload(const Dataset& dataset, const Workload& workload, std::size_t threads) {
  workload.validate();
  workload.spec.validate(dataset);
  std::vector<oracle::OracleResult> answers(workload.size());
  parallel_for(workload.size(), threads, [&](std::size_t i) {
    answers[i] = oracle::exact_answer(dataset, workload.spec, workload.queries[i]);
  });
  Labeled out;
  out.workload.spec = workload.spec;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (!answers[i]) {
      ++out.dropped;
      continue;
    }
    out.workload.queries.push_back(workload.queries[i]);
    out.workload.labels.push_back(std::move(*answers[i]));
  }
  return out;
}

std::pair<Workload, Workload> split_workload(const Workload& workload, double train_fraction,
                                             std::uint64_t seed) {
  require(train_fraction >= 0.0 && train_fraction <= 1.0, "train fraction must lie in [0, 1]");
  std::vector<std::size_t> order(workload.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(order.size())));
  std::pair<Workload, Workload> parts;
  parts.first.spec = workload.spec;
  parts.second.spec = workload.spec;
  const bool labeled = !workload.labels.empty();
  for (std::size_t i = 0; i < order.size(); ++i) {
    Workload& dst = i < n_train ? parts.first : parts.second;
    dst.queries.push_back(workload.queries[order[i]]);
    if (labeled) dst.labels.push_back(workload.labels[order[i]]);
  }
  return parts;
}

TimingStats time_answers(const std::vector<QueryInstance>& queries, const Answerer& answer,
                         std::size_t warmup, std::size_t min_timed) {
  require(!queries.empty(), "timing needs at least one query");
  std::size_t width = 1;
  for (const auto& q : queries) width = std::max(width, q.size());
  std::vector<double> out(width);
  double sink = 0.0;
  for (std::size_t i = 0; i < warmup; ++i) {
    answer(queries[i % queries.size()], out);
    sink += out[0];
  }
  const std::size_t total = std::max(min_timed, queries.size());
  std::vector<double> micros(total);
  for (std::size_t i = 0; i < total; ++i) {
    const auto& q = queries[i % queries.size()];
    const auto start = Clock::now();
    answer(q, out);
    const auto stop = Clock::now();
    sink += out[0];
    micros[i] = std::chrono::duration<double, std::micro>(stop - start).count();
  }
  // keep the answers observable so the calls cannot be elided
  volatile double keep = sink;
  (void)keep;

  TimingStats stats;
  stats.timed = total;
  stats.mean_us = std::accumulate(micros.begin(), micros.end(), 0.0) / static_cast<double>(total);
  auto mid = micros.begin() + static_cast<std::ptrdiff_t>(total / 2);
  std::nth_element(micros.begin(), mid, micros.end());
  stats.median_us = *mid;
  auto p99 = micros.begin() + static_cast<std::ptrdiff_t>(std::min(total - 1, total * 99 / 100));
  std::nth_element(micros.begin(), p99, micros.end());
  stats.p99_us = *p99;
  return stats;
}

MethodReport evaluate(const std::string& method, const Answerer& answer, const Workload& test,
                      std::size_t storage_bytes) {
  require(!test.queries.empty(), "evaluation needs a non-empty test set");
  require(test.labels.size() == test.queries.size(), "evaluation needs a labeled test set");
  const auto& spec = test.spec;
  MethodReport report;
  report.method = method;
  report.storage_bytes = storage_bytes;

  const std::size_t n = test.size();
  std::vector<double> truth(n);
  std::vector<double> predicted(n);
  std::vector<double> out(spec.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = test.queries[i];
    const bool present = answer(q, out);
    if (!present) {
      ++report.empty_answers;
      std::fill(out.begin(), out.end(), 0.0);
    }
    if (spec.kind == QueryKind::KnnPoint) {
      truth[i] = euclidean(q, test.labels[i]);
      predicted[i] = present ? euclidean(q, out) : 0.0;
    } else {
      truth[i] = test.labels[i][0];
      predicted[i] = out[0];
    }
  }

  auto& errors = report.errors;
  const auto normalized = normalized_abs_errors(truth, predicted);
  errors.mean_normalized_abs_error =
      std::accumulate(normalized.begin(), normalized.end(), 0.0) / static_cast<double>(n);
  if (spec.kind == QueryKind::Raq) {
    errors.per_query_errors = normalized;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (truth[i] > 0.0) {
        errors.per_query_errors.push_back(relative_error(truth[i], predicted[i]));
      } else {
        ++report.zero_truth;
      }
    }
    if (!errors.per_query_errors.empty()) {
      errors.mean_relative_error =
          std::accumulate(errors.per_query_errors.begin(), errors.per_query_errors.end(), 0.0) /
          static_cast<double>(errors.per_query_errors.size());
    }
  }
  errors.count = errors.per_query_errors.size();

  report.timing = time_answers(test.queries, answer);
  errors.mean_query_time = std::chrono::duration<double, std::micro>(report.timing.mean_us);
  return report;
}

Answerer engine_answerer(const engine::NeuroEngine& engine) {
  return [&engine](QueryView q, std::span<double> out) {
    engine.answer_into(q, out.first(engine.spec().output_dim()));
    return true;
  };
}

Answerer exact_answerer(const Dataset& dataset, const QueryFunctionSpec& spec) {
  return [&dataset, spec](QueryView q, std::span<double> out) {
    const auto result = oracle::exact_answer(dataset, spec, q);
    if (!result) return false;
    std::copy(result->begin(), result->end(), out.begin());
    return true;
  };
}

Answerer tree_agg_answerer(const oracle::TreeAgg& baseline, const QueryFunctionSpec& spec) {
  return [&baseline, spec](QueryView q, std::span<double> out) {
    const auto result = baseline.query(spec, q);
    if (!result) return false;
    out[0] = (*result)[0];
    return true;
  };
}

GridResult grid_search(const Workload& train, const Workload& validation,
                       const std::vector<GridPoint>& grid, const GridCeilings& ceilings,
                       const mlp::TrainConfig& config) {
  if (grid.empty()) throw InputError("grid search needs at least one candidate");
  require(!train.labels.empty() && !validation.labels.empty(),
          "grid search needs labeled training and validation sets");
  const auto& spec = train.spec;
  GridResult result;
  const GridRow* best = nullptr;
  for (const auto& point : grid) {
    GridRow row;
    row.point = point;
    mlp::Architecture arch{spec.d_pred(), point.n_layers, point.first_width, point.rest_width,
                           spec.output_dim()};
    const auto built = index::build_index(train.queries, point.height);
    const auto& members = built.leaf_members;
    row.selected_leaf = static_cast<std::size_t>(
        std::max_element(members.begin(), members.end(),
                         [](const auto& a, const auto& b) { return a.size() < b.size(); }) -
        members.begin());
    std::vector<QueryInstance> xs;
    std::vector<std::vector<double>> ys;
    for (auto m : members[row.selected_leaf]) {
      xs.push_back(train.queries[m]);
      ys.push_back(train.labels[m]);
    }
    row.train_samples = xs.size();
    const auto model = mlp::train(arch, config, xs, ys).model;

    Workload scored;
    scored.spec = spec;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      if (built.index.locate(validation.queries[i]) == row.selected_leaf) {
        scored.queries.push_back(validation.queries[i]);
        scored.labels.push_back(validation.labels[i]);
      }
    }
    if (scored.queries.empty()) scored = validation;
    row.validation_samples = scored.size();

    const auto& idx = built.index;
    Answerer answer = [&](QueryView q, std::span<double> out) {
      (void)idx.locate(q);
      model.forward_into(q, out.first(model.output_dim()));
      return true;
    };
    const auto report = evaluate("grid", answer, scored, 0);
    row.validation_error = spec.kind == QueryKind::Raq || report.errors.count == 0
                               ? report.errors.mean_normalized_abs_error
                               : report.errors.mean_relative_error;
    row.query_us = report.timing.mean_us;
    row.parameters = idx.leaf_count() * model.parameter_count();
    row.feasible = row.query_us <= ceilings.max_query_us && row.parameters <= ceilings.max_parameters;
    result.rows.push_back(row);
  }
  for (const auto& row : result.rows) {
    if (!row.feasible) continue;
    if (!best || row.validation_error < best->validation_error ||
        (row.validation_error == best->validation_error && row.parameters < best->parameters)) {
      best = &row;
    }
  }
  if (!best) {
    throw InfeasibleError("no grid candidate satisfies the time/space ceilings");
  }
  result.best = best->point;
  return result;
}

// --- experiment configuration ----------------------------------------------

namespace {

const std::set<std::string> kConfigKeys = {
    "dataset", "n", "d", "components", "sigma_min", "sigma_max", "seed",
    "query", "predicate", "active", "attributes", "agg", "measure", "k",
    "range_pct", "n_queries", "train_fraction", "methods", "height", "layers",
    "first_width", "rest_width", "epochs", "batch", "lr", "threads",
    "sample_fraction", "output"};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t positive(long long v, const char* key) {
  if (v < 0) throw InputError(std::string("config key '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_key_values(const io::KeyValues& kv) {
  for (const auto& [key, value] : kv.entries()) {
    if (!kConfigKeys.count(key)) throw InputError("unknown config key: " + key);
  }
  ExperimentConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  c.dataset = kv.get_or("dataset", c.dataset);
  c.gmm.n = positive(kv.get_int("n", static_cast<long long>(c.gmm.n)), "n");
  c.gmm.d = positive(kv.get_int("d", static_cast<long long>(c.gmm.d)), "d");
  c.gmm.n_components =
      positive(kv.get_int("components", static_cast<long long>(c.gmm.n_components)), "components");
  c.gmm.sigma_min = kv.get_double("sigma_min", c.gmm.sigma_min);
  c.gmm.sigma_max = kv.get_double("sigma_max", c.gmm.sigma_max);
  c.gmm.seed = c.seed;

  auto& w = c.workload;
  w.query = parse_query_kind(kv.get_or("query", "raq"));
  w.predicate = parse_predicate_kind(kv.get_or("predicate", "axis-range"));
  w.active = positive(kv.get_int("active", 1), "active");
  w.attributes = io::parse_index_list(kv.get_or("attributes", ""));
  w.agg = parse_agg_kind(kv.get_or("agg", "avg"));
  if (kv.has("measure")) w.measure = positive(kv.get_int("measure", 0), "measure");
  w.k = positive(kv.get_int("k", 1), "k");
  w.range_pct = kv.get_double("range_pct", w.range_pct);
  w.n_queries = positive(kv.get_int("n_queries", static_cast<long long>(w.n_queries)), "n_queries");
  w.train_fraction = kv.get_double("train_fraction", w.train_fraction);
  w.seed = c.seed + 1;

  if (kv.has("methods")) c.methods = split_list(kv.get("methods"));
  auto& b = c.build;
  b.height = positive(kv.get_int("height", static_cast<long long>(b.height)), "height");
  b.architecture.n_layers =
      positive(kv.get_int("layers", static_cast<long long>(b.architecture.n_layers)), "layers");
  b.architecture.first_width = positive(
      kv.get_int("first_width", static_cast<long long>(b.architecture.first_width)), "first_width");
  b.architecture.rest_width = positive(
      kv.get_int("rest_width", static_cast<long long>(b.architecture.rest_width)), "rest_width");
  b.train.epochs = positive(kv.get_int("epochs", static_cast<long long>(b.train.epochs)), "epochs");
  b.train.batch_size =
      positive(kv.get_int("batch", static_cast<long long>(b.train.batch_size)), "batch");
  b.train.learning_rate = kv.get_double("lr", b.train.learning_rate);
  b.train.seed = c.seed + 3;
  c.threads = positive(kv.get_int("threads", 1), "threads");
  b.threads = c.threads;
  c.sample_fraction = kv.get_double("sample_fraction", c.sample_fraction);
  c.output = kv.get_or("output", "");
  return c;
}

io::KeyValues ExperimentConfig::to_key_values() const {
  io::KeyValues kv;
  auto num = [](auto v) { return std::to_string(v); };
  kv.set("dataset", dataset);
  kv.set("n", num(gmm.n));
  kv.set("d", num(gmm.d));
  kv.set("components", num(gmm.n_components));
  kv.set("sigma_min", io::format_double(gmm.sigma_min));
  kv.set("sigma_max", io::format_double(gmm.sigma_max));
  kv.set("seed", num(seed));
  kv.set("query", to_string(workload.query));
  kv.set("predicate", to_string(workload.predicate));
  kv.set("active", num(workload.active));
  if (!workload.attributes.empty()) kv.set("attributes", io::format_index_list(workload.attributes));
  kv.set("agg", to_string(workload.agg));
  if (workload.measure) kv.set("measure", num(*workload.measure));
  kv.set("k", num(workload.k));
  kv.set("range_pct", io::format_double(workload.range_pct));
  kv.set("n_queries", num(workload.n_queries));
  kv.set("train_fraction", io::format_double(workload.train_fraction));
  std::string m;
  for (const auto& method : methods) m += (m.empty() ? "" : ",") + method;
  kv.set("methods", m);
  kv.set("height", num(build.height));
  kv.set("layers", num(build.architecture.n_layers));
  kv.set("first_width", num(build.architecture.first_width));
  kv.set("rest_width", num(build.architecture.rest_width));
  kv.set("epochs", num(build.train.epochs));
  kv.set("batch", num(build.train.batch_size));
  kv.set("lr", io::format_double(build.train.learning_rate));
  kv.set("threads", num(threads));
  kv.set("sample_fraction", io::format_double(sample_fraction));
  if (!output.empty()) kv.set("output", output);
  return kv;
}

std::string csv_header() {
  return "method,query,predicate,agg,k,n,d,n_train,n_test,dropped,height,layers,"
         "first_width,rest_width,epochs,batch,sample_fraction,seed,norm_mae,rel_err,"
         "storage_bytes,status,mean_us,median_us,p99_us";
}

std::string csv_row(const BenchReport& report, const MethodReport& method) {
  const auto& c = report.config;
  const auto& w = c.workload;
  std::ostringstream row;
  row << method.method << ',' << to_string(w.query) << ',' << to_string(w.predicate) << ','
      << to_string(w.agg) << ',' << w.k << ',' << c.gmm.n << ',' << c.gmm.d << ','
      << report.train_queries << ',' << report.test_queries << ',' << report.dropped << ','
      << c.build.height << ',' << c.build.architecture.n_layers << ','
      << c.build.architecture.first_width << ',' << c.build.architecture.rest_width << ','
      << c.build.train.epochs << ',' << c.build.train.batch_size << ','
      << io::format_double(c.sample_fraction) << ',' << c.seed << ','
      << io::format_double(method.errors.mean_normalized_abs_error) << ','
      << io::format_double(method.errors.mean_relative_error) << ',' << method.storage_bytes
      << ',' << sanitize(method.status) << ',' << io::format_double(method.timing.mean_us) << ','
      << io::format_double(method.timing.median_us) << ','
      << io::format_double(method.timing.p99_us);
  return row.str();
}

BenchReport run_experiment(const ExperimentConfig& config, std::ostream& csv, std::ostream* log) {
  BenchReport report;
  report.config = config;
  auto note = [&](const std::string& text) {
    if (log) *log << text << std::endl;
  };
  note("seed=" + std::to_string(config.seed));

  Dataset dataset = config.dataset == "gmm" ? gen_gmm(config.gmm) : io::read_dataset_csv(config.dataset);
  report.config.gmm.n = dataset.n();
  report.config.gmm.d = dataset.d();
  const auto function = make_query_function(dataset, config.workload);
  note("query function: " + std::string(to_string(function.kind)) + " d_pred=" +
       std::to_string(function.d_pred()));
  const auto raw = gen_workload(dataset, function, config.workload);
  auto labeled = label_workload(dataset, raw, config.threads);
  report.dropped = labeled.dropped;
  auto [train, test] = split_workload(labeled.workload, config.workload.train_fraction,
                                      config.seed + 2);
  report.train_queries = train.size();
  report.test_queries = test.size();
  note("labeled " + std::to_string(labeled.workload.size()) + " queries (" +
       std::to_string(labeled.dropped) + " empty dropped); train=" +
       std::to_string(train.size()) + " test=" + std::to_string(test.size()));

  csv << csv_header() << '\n' << std::flush;
  for (const auto& method : config.methods) {
    MethodReport result;
    result.method = method;
    try {
      if (method == "neurodb") {
        const auto engine = engine::build(train, config.build);
        result = evaluate(method, engine_answerer(engine), test, engine.to_bytes().size());
      } else if (method == "tree-agg") {
        if (function.kind != QueryKind::Raq) {
          result.status = "unsupported for k-NN";
        } else {
          const auto baseline = oracle::TreeAgg::build(dataset, config.sample_fraction, config.seed + 4);
          result = evaluate(method, tree_agg_answerer(baseline, function), test,
                            baseline.storage_bytes());
        }
      } else if (method == "exact") {
        result = evaluate(method, exact_answerer(dataset, function), test,
                          dataset.values().size() * sizeof(double));
      } else {
        throw InputError("unknown method: " + method);
      }
    } catch (const std::exception& e) {
      result.status = std::string("failed: ") + e.what();
      report.methods.push_back(result);
      csv << csv_row(report, result) << '\n' << std::flush;
      throw;
    }
    report.methods.push_back(result);
    csv << csv_row(report, result) << '\n' << std::flush;
    note(method + ": norm_mae=" + io::format_double(result.errors.mean_normalized_abs_error) +
         " rel_err=" + io::format_double(result.errors.mean_relative_error) +
         " mean_us=" + io::format_double(result.timing.mean_us));
  }
  return report;
}

}  // namespace neurodb::bench
