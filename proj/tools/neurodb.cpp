// neurodb command line: data/workload generation, labeling, training,
// answering, evaluation, experiments and grid search.
//
// Exit codes: 0 success, 1 unexpected failure, 2 input error, 3 contract
// violation, 4 infeasible grid, 5 unreadable engine/model file, 6 build
// error (empty partition).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "neurodb/bench.hpp"
#include "neurodb/engine.hpp"
#include "neurodb/index.hpp"
#include "neurodb/io.hpp"
#include "neurodb/oracle.hpp"

namespace {

using namespace neurodb;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kInput = 2,
  kContract = 3,
  kInfeasible = 4,
  kLoad = 5,
  kBuild = 6,
};

std::string sidecar(const std::string& workload_path) { return workload_path + ".spec"; }

QueryFunctionSpec load_spec(const std::string& spec_path, const std::string& workload_path) {
  const std::string path = spec_path.empty() ? sidecar(workload_path) : spec_path;
  if (!std::filesystem::exists(path)) {
    throw InputError("query function descriptor not found: " + path);
  }
  return io::spec_from_key_values(io::KeyValues::load(path));
}

void announce_seed(std::uint64_t seed) { std::cerr << "seed=" << seed << '\n'; }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

struct TrainFlags {
  std::size_t height = 4;
  std::size_t capacity = 0;
  std::size_t layers = 5;
  std::size_t first_width = 60;
  std::size_t rest_width = 30;
  std::size_t epochs = 1000;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--height", height, "kd-tree height h")->capture_default_str();
    cmd->add_option("--capacity", capacity,
                    "derive h = ceil(log2(n / capacity)) instead of --height");
    cmd->add_option("--layers", layers, "layer count n_l")->capture_default_str();
    cmd->add_option("--first-width", first_width, "first hidden layer width")->capture_default_str();
    cmd->add_option("--rest-width", rest_width, "remaining hidden layer width")->capture_default_str();
    cmd->add_option("--epochs", epochs)->capture_default_str();
    cmd->add_option("--batch", batch)->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--seed", seed)->capture_default_str();
    cmd->add_option("--threads", threads, "leaves trained concurrently")->capture_default_str();
  }

  engine::BuildOptions options() const {
    engine::BuildOptions o;
    o.height = height;
    o.architecture.n_layers = layers;
    o.architecture.first_width = first_width;
    o.architecture.rest_width = rest_width;
    o.train.epochs = epochs;
    o.train.batch_size = batch;
    o.train.learning_rate = lr;
    o.train.seed = seed;
    o.threads = threads;
    return o;
  }
};

void write_report_csv(std::ostream& out, const std::vector<bench::MethodReport>& reports) {
  out << "method,n_test,count,norm_mae,rel_err,empty_answers,zero_truth,storage_bytes,"
         "mean_us,median_us,p99_us\n";
  for (const auto& r : reports) {
    out << r.method << ',' << r.errors.per_query_errors.size() + r.zero_truth << ','
        << r.errors.count << ',' << io::format_double(r.errors.mean_normalized_abs_error) << ','
        << io::format_double(r.errors.mean_relative_error) << ',' << r.empty_answers << ','
        << r.zero_truth << ',' << r.storage_bytes << ',' << io::format_double(r.timing.mean_us)
        << ',' << io::format_double(r.timing.median_us) << ','
        << io::format_double(r.timing.p99_us) << '\n';
  }
}

std::vector<std::size_t> parse_sizes(const std::string& text) { return io::parse_index_list(text); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neurodb: learned range-aggregate and k-NN distance query engine"};
  app.require_subcommand(1);

  // gen-data
  bench::GmmSpec gmm;
  std::string data_out;
  auto* gen_data = app.add_subcommand("gen-data", "Sample a Gaussian-mixture dataset to CSV");
  gen_data->add_option("--n", gmm.n, "row count")->capture_default_str();
  gen_data->add_option("--d", gmm.d, "attribute count")->capture_default_str();
  gen_data->add_option("--components", gmm.n_components)->capture_default_str();
  gen_data->add_option("--sigma-min", gmm.sigma_min)->capture_default_str();
  gen_data->add_option("--sigma-max", gmm.sigma_max)->capture_default_str();
  gen_data->add_option("--seed", gmm.seed)->capture_default_str();
  gen_data->add_option("--out", data_out, "output CSV")->required();

  // gen-queries
  bench::WorkloadSpec wspec;
  std::string data_path, queries_out, spec_out, query_kind = "raq", predicate = "axis-range",
                                                 agg = "avg", attributes;
  long long measure = -1;
  auto* gen_q = app.add_subcommand("gen-queries", "Generate a query workload CSV");
  gen_q->add_option("--data", data_path, "dataset CSV")->required();
  gen_q->add_option("--query", query_kind, "raq | knn-distance | knn-point")->capture_default_str();
  gen_q->add_option("--predicate", predicate, "axis-range | half-space | rotated-rectangle")
      ->capture_default_str();
  gen_q->add_option("--active", wspec.active, "active attribute count r")->capture_default_str();
  gen_q->add_option("--attributes", attributes, "explicit predicate attributes, e.g. 0,2");
  gen_q->add_option("--agg", agg, "count | sum | avg | std | median")->capture_default_str();
  gen_q->add_option("--measure", measure, "measure attribute (default: last)");
  gen_q->add_option("--k", wspec.k)->capture_default_str();
  gen_q->add_option("--range-pct", wspec.range_pct, "range width, % of domain")->capture_default_str();
  gen_q->add_option("--count", wspec.n_queries)->capture_default_str();
  gen_q->add_option("--seed", wspec.seed)->capture_default_str();
  gen_q->add_option("--out", queries_out, "output workload CSV")->required();
  gen_q->add_option("--spec-out", spec_out, "descriptor path (default: <out>.spec)");

  // label
  std::string label_data, label_in, label_spec, label_out, test_out;
  double train_fraction = 1.0;
  std::uint64_t split_seed = 0;
  std::size_t label_threads = 1;
  auto* label = app.add_subcommand("label", "Attach exact answers to a workload");
  label->add_option("--data", label_data, "dataset CSV")->required();
  label->add_option("--queries", label_in, "workload CSV")->required();
  label->add_option("--spec", label_spec, "descriptor (default: <queries>.spec)");
  label->add_option("--out", label_out, "labeled (training) workload CSV")->required();
  label->add_option("--test-out", test_out, "also split off a held-out test CSV");
  label->add_option("--train-fraction", train_fraction)->capture_default_str();
  label->add_option("--seed", split_seed, "split seed")->capture_default_str();
  label->add_option("--threads", label_threads)->capture_default_str();

  // train
  TrainFlags tf;
  std::string train_in, train_spec, engine_out, capacity_data;
  auto* train = app.add_subcommand("train", "Build and train an engine file");
  train->add_option("--queries", train_in, "labeled workload CSV")->required();
  train->add_option("--spec", train_spec, "descriptor (default: <queries>.spec)");
  train->add_option("--data", capacity_data, "dataset CSV supplying n for --capacity");
  train->add_option("--out", engine_out, "engine file")->required();
  tf.add(train);

  // query
  std::string query_engine, query_in, query_out, refine_data;
  auto* query = app.add_subcommand("query", "Answer a workload with an engine");
  query->add_option("--engine", query_engine)->required();
  query->add_option("--queries", query_in, "workload CSV")->required();
  query->add_option("--out", query_out, "answers CSV (default: stdout)");
  query->add_option("--refine-data", refine_data,
                    "k-NN point engines: snap answers to the nearest row of this dataset");

  // eval
  std::string eval_engine, eval_test, eval_spec, eval_data, eval_out, eval_method = "neurodb";
  double eval_fraction = 0.01;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Accuracy and latency on a labeled test workload");
  eval->add_option("--method", eval_method, "neurodb | tree-agg | exact")->capture_default_str();
  eval->add_option("--engine", eval_engine, "engine file (neurodb)");
  eval->add_option("--data", eval_data, "dataset CSV (tree-agg, exact)");
  eval->add_option("--test", eval_test, "labeled test workload CSV")->required();
  eval->add_option("--spec", eval_spec, "descriptor (default: <test>.spec or the engine's)");
  eval->add_option("--sample-fraction", eval_fraction)->capture_default_str();
  eval->add_option("--seed", eval_seed, "tree-agg sampling seed")->capture_default_str();
  eval->add_option("--out", eval_out, "report CSV (default: stdout)");

  // bench
  std::string bench_config, bench_out;
  std::vector<std::string> overrides;
  auto* bench_cmd = app.add_subcommand("bench", "Run a configured experiment end to end");
  bench_cmd->add_option("--config", bench_config, "key=value config file");
  bench_cmd->add_option("--set", overrides, "override a config key (key=value)");
  bench_cmd->add_option("--out", bench_out, "result CSV (overrides 'output')");

  // grid-search
  std::string gs_train, gs_valid, gs_spec, gs_out, gs_heights = "4", gs_layers = "5",
                                                    gs_first = "60", gs_rest = "30";
  double gs_max_us = std::numeric_limits<double>::infinity();
  std::size_t gs_max_params = std::numeric_limits<std::size_t>::max();
  mlp::TrainConfig gs_train_cfg;
  auto* grid = app.add_subcommand("grid-search", "Pick (h, n_l, l_first, l_rest) under ceilings");
  grid->add_option("--train", gs_train, "labeled training CSV")->required();
  grid->add_option("--validation", gs_valid, "labeled validation CSV")->required();
  grid->add_option("--spec", gs_spec, "descriptor (default: <train>.spec)");
  grid->add_option("--heights", gs_heights)->capture_default_str();
  grid->add_option("--layers", gs_layers)->capture_default_str();
  grid->add_option("--first-widths", gs_first)->capture_default_str();
  grid->add_option("--rest-widths", gs_rest)->capture_default_str();
  grid->add_option("--max-query-us", gs_max_us, "time ceiling per query");
  grid->add_option("--max-params", gs_max_params, "space ceiling in parameters");
  grid->add_option("--epochs", gs_train_cfg.epochs)->capture_default_str();
  grid->add_option("--batch", gs_train_cfg.batch_size)->capture_default_str();
  grid->add_option("--lr", gs_train_cfg.learning_rate)->capture_default_str();
  grid->add_option("--seed", gs_train_cfg.seed)->capture_default_str();
  grid->add_option("--out", gs_out, "grid CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*gen_data) {
      announce_seed(gmm.seed);
      io::write_dataset_csv(data_out, bench::gen_gmm(gmm));
      std::cerr << "wrote " << gmm.n << " rows to " << data_out << '\n';
    } else if (*gen_q) {
      announce_seed(wspec.seed);
      const auto dataset = io::read_dataset_csv(data_path);
      wspec.query = parse_query_kind(query_kind);
      wspec.predicate = parse_predicate_kind(predicate);
      wspec.agg = parse_agg_kind(agg);
      wspec.attributes = io::parse_index_list(attributes);
      if (measure >= 0) wspec.measure = static_cast<std::size_t>(measure);
      const auto function = bench::make_query_function(dataset, wspec);
      const auto workload = bench::gen_workload(dataset, function, wspec);
      io::write_workload_csv(queries_out, workload);
      io::to_key_values(function).save(spec_out.empty() ? sidecar(queries_out) : spec_out);
      std::cerr << "wrote " << workload.size() << " queries (d_pred=" << function.d_pred()
                << ") to " << queries_out << '\n';
    } else if (*label) {
      announce_seed(split_seed);
      const auto dataset = io::read_dataset_csv(label_data);
      const auto spec = load_spec(label_spec, label_in);
      const auto workload = io::read_workload_csv(label_in, spec);
      const auto labeled = bench::label_workload(dataset, workload, label_threads);
      std::cerr << "labeled " << labeled.workload.size() << " queries, dropped "
                << labeled.dropped << " with empty answers\n";
      if (test_out.empty()) {
        io::write_workload_csv(label_out, labeled.workload);
      } else {
        const auto [train_part, test_part] =
            bench::split_workload(labeled.workload, train_fraction, split_seed);
        io::write_workload_csv(label_out, train_part);
        io::write_workload_csv(test_out, test_part);
        io::to_key_values(spec).save(sidecar(test_out));
      }
      io::to_key_values(spec).save(sidecar(label_out));
    } else if (*train) {
      announce_seed(tf.seed);
      const auto spec = load_spec(train_spec, train_in);
      const auto workload = io::read_workload_csv(train_in, spec);
      auto options = tf.options();
      if (tf.capacity > 0) {
        const std::size_t n = capacity_data.empty() ? workload.size()
                                                    : io::read_dataset_csv(capacity_data).n();
        options.height = index::choose_height(n, tf.capacity);
        std::cerr << "height " << options.height << " from n=" << n << " c=" << tf.capacity << '\n';
      }
      const auto engine = engine::build(workload, options);
      engine.save(engine_out);
      std::cerr << "trained " << engine.models().size() << " leaf models ("
                << engine.parameter_count() << " parameters) -> " << engine_out << '\n';
    } else if (*query) {
      announce_seed(0);
      const auto engine = engine::NeuroEngine::load(query_engine);
      const auto workload = io::read_workload_csv(query_in, engine.spec());
      std::unique_ptr<Dataset> refine;
      if (!refine_data.empty()) refine = std::make_unique<Dataset>(io::read_dataset_csv(refine_data));
      Workload answers;
      answers.spec = engine.spec();
      answers.queries = workload.queries;
      for (const auto& q : workload.queries) {
        answers.labels.push_back(refine ? engine::knn_point_refine(engine, *refine, q)
                                        : engine.answer(q));
      }
      if (query_out.empty()) {
        io::write_workload_csv(std::cout, answers);
      } else {
        io::write_workload_csv(query_out, answers);
      }
    } else if (*eval) {
      announce_seed(eval_seed);
      std::vector<bench::MethodReport> reports;
      if (eval_method == "neurodb") {
        if (eval_engine.empty()) throw InputError("--engine is required for method neurodb");
        const auto engine = engine::NeuroEngine::load(eval_engine);
        const auto test = io::read_workload_csv(eval_test, engine.spec());
        reports.push_back(bench::evaluate("neurodb", bench::engine_answerer(engine), test,
                                          engine.to_bytes().size()));
      } else {
        if (eval_data.empty()) throw InputError("--data is required for method " + eval_method);
        const auto dataset = io::read_dataset_csv(eval_data);
        const auto spec = load_spec(eval_spec, eval_test);
        const auto test = io::read_workload_csv(eval_test, spec);
        if (eval_method == "exact") {
          reports.push_back(bench::evaluate("exact", bench::exact_answerer(dataset, spec), test,
                                            dataset.values().size() * sizeof(double)));
        } else if (eval_method == "tree-agg") {
          const auto baseline = oracle::TreeAgg::build(dataset, eval_fraction, eval_seed);
          reports.push_back(bench::evaluate("tree-agg", bench::tree_agg_answerer(baseline, spec),
                                            test, baseline.storage_bytes()));
        } else {
          throw InputError("unknown method: " + eval_method);
        }
      }
      if (eval_out.empty()) {
        write_report_csv(std::cout, reports);
      } else {
        auto out = open_output(eval_out);
        write_report_csv(out, reports);
      }
    } else if (*bench_cmd) {
      io::KeyValues kv = bench_config.empty() ? io::KeyValues{} : io::KeyValues::load(bench_config);
      for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got " + item);
        kv.set(item.substr(0, eq), item.substr(eq + 1));
      }
      auto config = bench::ExperimentConfig::from_key_values(kv);
      if (!bench_out.empty()) config.output = bench_out;
      std::cerr << "# config\n";
      config.to_key_values().write(std::cerr);
      if (config.output.empty()) {
        bench::run_experiment(config, std::cout, &std::cerr);
      } else {
        auto out = open_output(config.output);
        bench::run_experiment(config, out, &std::cerr);
      }
    } else if (*grid) {
      announce_seed(gs_train_cfg.seed);
      const auto spec = load_spec(gs_spec, gs_train);
      const auto train_set = io::read_workload_csv(gs_train, spec);
      const auto valid_set = io::read_workload_csv(gs_valid, spec);
      std::vector<bench::GridPoint> points;
      for (auto h : parse_sizes(gs_heights))
        for (auto l : parse_sizes(gs_layers))
          for (auto f : parse_sizes(gs_first))
            for (auto r : parse_sizes(gs_rest)) points.push_back({h, l, f, r});
      bench::GridCeilings ceilings{gs_max_us, gs_max_params};
      std::unique_ptr<std::ofstream> file;
      std::ostream* out = &std::cout;
      if (!gs_out.empty()) {
        file = std::make_unique<std::ofstream>(open_output(gs_out));
        out = file.get();
      }
      try {
        const auto result = bench::grid_search(train_set, valid_set, points, ceilings, gs_train_cfg);
        *out << "height,layers,first_width,rest_width,parameters,validation_error,query_us,"
                "feasible,best\n";
        for (const auto& row : result.rows) {
          const auto& p = row.point;
          const bool is_best = p.height == result.best.height && p.n_layers == result.best.n_layers &&
                               p.first_width == result.best.first_width &&
                               p.rest_width == result.best.rest_width;
          *out << p.height << ',' << p.n_layers << ',' << p.first_width << ',' << p.rest_width
               << ',' << row.parameters << ',' << io::format_double(row.validation_error) << ','
               << io::format_double(row.query_us) << ',' << (row.feasible ? 1 : 0) << ','
               << (is_best ? 1 : 0) << '\n';
        }
      } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
      }
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return kContract;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return kLoad;
  } catch (const BuildError& e) {
    std::cerr << "build error: " << e.what() << '\n';
    return kBuild;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
