#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neurodb/bench.hpp"
#include "neurodb/engine.hpp"
#include "neurodb/oracle.hpp"

namespace py = pybind11;
using namespace neurodb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<QueryInstance> rows_of(const Array& a, std::size_t width, const char* what) {
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(1)) != width) {
    throw ContractError(std::string(what) + " must be a 2-D array with " + std::to_string(width) +
                        " columns");
  }
  std::vector<QueryInstance> out(static_cast<std::size_t>(a.shape(0)));
  const double* p = a.data();
  for (auto& r : out) {
    r.assign(p, p + width);
    p += width;
  }
  return out;
}

Array to_array(const std::vector<std::vector<double>>& rows, std::size_t width) {
  Array out({rows.size(), width});
  double* p = out.mutable_data();
  for (const auto& r : rows) p = std::copy(r.begin(), r.end(), p);
  return out;
}

Dataset dataset_from_array(const Array& a) {
  if (a.ndim() != 2) throw ContractError("dataset must be a 2-D array");
  std::vector<double> values(a.data(), a.data() + a.size());
  return Dataset(std::move(values), static_cast<std::size_t>(a.shape(1)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned query answering: exact oracles, per-partition networks and benchmarks.";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<BuildError>(m, "BuildError", PyExc_RuntimeError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ArithmeticError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_array), py::arg("values"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("d", &Dataset::d)
      .def_property_readonly("names", &Dataset::names)
      .def("to_numpy", [](const Dataset& ds) {
        Array out({ds.n(), ds.d()});
        std::copy(ds.values().begin(), ds.values().end(), out.mutable_data());
        return out;
      });

  py::class_<QueryFunctionSpec>(m, "QuerySpec")
      .def_static(
          "raq",
          [](const std::string& predicate, std::vector<std::size_t> attributes,
             const std::string& agg, std::size_t measure, std::size_t data_dim) {
            auto s = QueryFunctionSpec::raq(
                PredicateSpec{parse_predicate_kind(predicate), std::move(attributes)},
                Aggregation{parse_agg_kind(agg), measure}, data_dim);
            s.validate();
            return s;
          },
          py::arg("predicate"), py::arg("attributes"), py::arg("agg"), py::arg("measure"),
          py::arg("data_dim"))
      .def_static("knn_distance", &QueryFunctionSpec::knn_distance, py::arg("k"),
                  py::arg("data_dim"))
      .def_static("knn_point", &QueryFunctionSpec::knn_point, py::arg("k"), py::arg("data_dim"))
      .def_property_readonly("kind", [](const QueryFunctionSpec& s) { return to_string(s.kind); })
      .def_property_readonly("d_pred", &QueryFunctionSpec::d_pred)
      .def_property_readonly("output_dim", &QueryFunctionSpec::output_dim);

  m.def(
      "gen_gmm",
      [](std::size_t n, std::size_t d, std::size_t components, std::uint64_t seed,
         double sigma_min, double sigma_max) {
        return bench::gen_gmm({components, d, n, seed, sigma_min, sigma_max});
      },
      py::arg("n"), py::arg("d"), py::arg("components") = 100, py::arg("seed") = 0,
      py::arg("sigma_min") = 0.01, py::arg("sigma_max") = 0.1);

  m.def(
      "gen_queries",
      [](const Dataset& ds, const std::string& query, const std::string& predicate,
         std::size_t active, const std::string& agg, std::size_t k, double range_pct,
         std::size_t n_queries, std::uint64_t seed) {
        bench::WorkloadSpec w;
        w.query = parse_query_kind(query);
        w.predicate = parse_predicate_kind(predicate);
        w.active = active;
        w.agg = parse_agg_kind(agg);
        w.k = k;
        w.range_pct = range_pct;
        w.n_queries = n_queries;
        w.seed = seed;
        const auto spec = bench::make_query_function(ds, w);
        const auto work = bench::gen_workload(ds, spec, w);
        return py::make_tuple(spec, to_array(work.queries, spec.d_pred()));
      },
      py::arg("dataset"), py::arg("query") = "raq", py::arg("predicate") = "axis-range",
      py::arg("active") = 1, py::arg("agg") = "avg", py::arg("k") = 1,
      py::arg("range_pct") = 10.0, py::arg("n_queries") = 1000, py::arg("seed") = 0,
      "Returns (spec, queries).");

  m.def(
      "exact_answer",
      [](const Dataset& ds, const QueryFunctionSpec& spec,
         std::vector<double> q) -> std::optional<std::vector<double>> {
        return oracle::exact_answer(ds, spec, q);
      },
      py::arg("dataset"), py::arg("spec"), py::arg("query"));

  m.def(
      "label",
      [](const Dataset& ds, const QueryFunctionSpec& spec, const Array& queries,
         std::size_t threads) {
        Workload w;
        w.spec = spec;
        w.queries = rows_of(queries, spec.d_pred(), "queries");
        const auto l = bench::label_workload(ds, w, threads);
        return py::make_tuple(to_array(l.workload.queries, spec.d_pred()),
                              to_array(l.workload.labels, spec.output_dim()), l.dropped);
      },
      py::arg("dataset"), py::arg("spec"), py::arg("queries"), py::arg("threads") = 1,
      "Returns (queries, labels, dropped) with empty-answer queries removed.");

  m.def(
      "normalized_abs_error",
      [](std::vector<double> t, std::vector<double> p) { return normalized_abs_error(t, p); },
      py::arg("truth"), py::arg("predicted"));
  m.def("relative_error", &relative_error, py::arg("true_dist"), py::arg("pred_dist"));

  py::class_<engine::NeuroEngine>(m, "Engine")
      .def_static(
          "build",
          [](const QueryFunctionSpec& spec, const Array& queries, const Array& labels,
             std::size_t height, std::size_t layers, std::size_t first_width,
             std::size_t rest_width, std::size_t epochs, std::size_t batch, double lr,
             std::uint64_t seed, std::size_t threads) {
            Workload w;
            w.spec = spec;
            w.queries = rows_of(queries, spec.d_pred(), "queries");
            w.labels = rows_of(labels, spec.output_dim(), "labels");
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
            py::gil_scoped_release release;
            return engine::build(w, o);
          },
          py::arg("spec"), py::arg("queries"), py::arg("labels"), py::arg("height") = 4,
          py::arg("layers") = 5, py::arg("first_width") = 60, py::arg("rest_width") = 30,
          py::arg("epochs") = 1000, py::arg("batch") = 256, py::arg("lr") = 1e-3,
          py::arg("seed") = 0, py::arg("threads") = 1)
      .def_static("load", &engine::NeuroEngine::load, py::arg("path"))
      .def("save", &engine::NeuroEngine::save, py::arg("path"))
      .def("answer", &engine::NeuroEngine::answer, py::arg("query"))
      .def(
          "answer_batch",
          [](const engine::NeuroEngine& e, const Array& queries) {
            const auto qs = rows_of(queries, e.spec().d_pred(), "queries");
            Array out({qs.size(), e.spec().output_dim()});
            double* p = out.mutable_data();
            for (const auto& q : qs) {
              e.answer_into(q, {p, e.spec().output_dim()});
              p += e.spec().output_dim();
            }
            return out;
          },
          py::arg("queries"))
      .def_property_readonly("spec", &engine::NeuroEngine::spec)
      .def_property_readonly("height", [](const engine::NeuroEngine& e) { return e.index().height(); })
      .def_property_readonly("leaf_count",
                             [](const engine::NeuroEngine& e) { return e.index().leaf_count(); })
      .def_property_readonly("parameter_count", &engine::NeuroEngine::parameter_count)
      .def_property_readonly("leaf_training_sizes", [](const engine::NeuroEngine& e) {
        return e.metadata().leaf_training_sizes;
      })
      .def("locate", [](const engine::NeuroEngine& e, std::vector<double> q) {
        require(q.size() == e.spec().d_pred(), "query length does not match d_pred");
        return e.index().locate(q);
      });
}
