#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "neurodb/engine.hpp"
#include "neurodb/oracle.hpp"

using namespace neurodb;
using namespace neurodb::engine;

namespace {

BuildOptions small_options(std::size_t height, std::size_t epochs = 5) {
  BuildOptions o;
  o.height = height;
  o.architecture.n_layers = 3;
  o.architecture.first_width = 8;
  o.architecture.rest_width = 8;
  o.train.epochs = epochs;
  o.train.batch_size = 32;
  o.train.seed = 11;
  return o;
}

Workload labeled_count_workload(std::size_t n_queries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(2 * 300);
  for (auto& v : values) v = u(rng);
  const Dataset ds(values, 2);
  Workload w;
  w.spec = QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {AggKind::Count, 0}, 2);
  for (std::size_t i = 0; i < n_queries; ++i) {
    const double lo = u(rng) * 0.8;
    w.queries.push_back({lo, lo + 0.2});
    w.labels.push_back(*oracle::exact_answer(ds, w.spec, w.queries.back()));
  }
  return w;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("height zero trains one model identical to a direct train") {
  const auto w = labeled_count_workload(200, 1);
  const auto opts = small_options(0);
  const auto e = build(w, opts);
  REQUIRE(e.models().size() == 1);
  mlp::Architecture a = opts.architecture;
  a.input_dim = 2;
  a.output_dim = 1;
  mlp::TrainConfig c = opts.train;
  c.seed = opts.train.seed + 0;
  CHECK(e.models()[0] == mlp::train(a, c, w.queries, w.labels).model);
  CHECK(e.models()[0] == train_leaf(w.spec, opts, w.queries, w.labels, opts.train.seed));
}

TEST_CASE("every leaf fits a constant function") {
  Workload w;
  w.spec = QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {AggKind::Avg, 1}, 2);
  for (int i = 0; i < 256; ++i) {
    w.queries.push_back({i / 256.0, i / 256.0 + 0.1});
    w.labels.push_back({5.0});
  }
  const auto e = build(w, small_options(2, 3000));
  for (int i = 0; i < 100; ++i) {
    const double lo = i / 100.0;
    CHECK(std::abs(e.answer_scalar(std::vector<double>{lo, lo + 0.1}) - 5.0) <= 1e-3);
  }
}

TEST_CASE("leaf sizes and seeds are recorded") {
  const auto w = labeled_count_workload(4096, 2);
  auto opts = small_options(2, 1);
  opts.threads = 3;
  const auto e = build(w, opts);
  REQUIRE(e.models().size() == 4);
  for (std::size_t leaf = 0; leaf < 4; ++leaf) {
    CHECK(e.metadata().leaf_training_sizes[leaf] == 1024);
    CHECK(e.metadata().leaf_seeds[leaf] == opts.train.seed + leaf);
  }
  CHECK(e.parameter_count() == 4 * e.models()[0].parameter_count());
}

TEST_CASE("threaded and serial builds agree") {
  const auto w = labeled_count_workload(400, 3);
  auto a = small_options(3);
  auto b = a;
  b.threads = 4;
  CHECK(build(w, a).to_bytes() == build(w, b).to_bytes());
}

TEST_CASE("answers do not need the dataset and are deterministic") {
  const auto w = labeled_count_workload(300, 4);  // dataset is gone after this call
  const auto e = build(w, small_options(2));
  for (const auto& q : w.queries) {
    const auto a = e.answer(q);
    CHECK(a == e.answer(q));
    mlp::OpCounter c;
    CHECK(e.answer_counted(q, c)[0] == doctest::Approx(a[0]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(e.answer(std::vector<double>{0.5}), ContractError);
}

TEST_CASE("property: answer cost is h comparisons plus one forward pass") {
  for (std::size_t h : {0u, 1u, 3u}) {
    const auto w = labeled_count_workload(64, 5 + h);
    const auto e = build(w, small_options(h, 1));
    mlp::OpCounter c;
    e.answer_counted(w.queries[0], c);
    CHECK(c.comparisons == h);
    CHECK(c.macs == e.models()[0].mac_count());
  }
}

TEST_CASE("replacing one leaf leaves the other leaves untouched") {
  const auto w = labeled_count_workload(400, 6);
  auto e = build(w, small_options(2));
  std::vector<std::vector<double>> before;
  for (const auto& q : w.queries) before.push_back(e.answer(q));
  mlp::Mlp replacement(e.models()[0].widths());
  replacement.normalization() = e.models()[0].normalization();
  e.replace_model(0, replacement);
  bool leaf0_changed = false;
  for (std::size_t i = 0; i < w.queries.size(); ++i) {
    if (e.index().locate(w.queries[i]) == 0) {
      leaf0_changed |= e.answer(w.queries[i]) != before[i];
    } else {
      CHECK(e.answer(w.queries[i]) == before[i]);
    }
  }
  CHECK(leaf0_changed);
  CHECK_THROWS_AS(e.replace_model(9, replacement), ContractError);
}

TEST_CASE("model size does not depend on k") {
  Workload w1, w500;
  w1.spec = QueryFunctionSpec::knn_distance(1, 2);
  w500.spec = QueryFunctionSpec::knn_distance(500, 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 64; ++i) {
    w1.queries.push_back({u(rng), u(rng)});
    w1.labels.push_back({u(rng)});
  }
  w500.queries = w1.queries;
  w500.labels = w1.labels;
  const auto a = build(w1, small_options(2, 1));
  const auto b = build(w500, small_options(2, 1));
  CHECK(a.parameter_count() == b.parameter_count());
  mlp::OpCounter ca, cb;
  a.answer_counted(w1.queries[0], ca);
  b.answer_counted(w1.queries[0], cb);
  CHECK(ca.macs == cb.macs);
  CHECK(ca.comparisons == cb.comparisons);
}

TEST_CASE("k-NN point refinement snaps to the nearest row") {
  const Dataset line = Dataset::from_rows({{1}, {2}, {3}, {5}, {6}});
  const auto spec = QueryFunctionSpec::knn_point(1, 1);
  mlp::Mlp constant({1, 1});
  constant.layers()[0].bias(0) = 4.2;
  auto idx = index::build_index({{0.0}}, 0).index;
  const NeuroEngine e(spec, idx, {constant}, BuildMetadata{});
  CHECK(e.answer(std::vector<double>{4.0})[0] == doctest::Approx(4.2));
  CHECK(knn_point_refine(e, line, std::vector<double>{4.0}) == std::vector<double>{5.0});
}

TEST_CASE("engines with mismatched parts are rejected") {
  const auto spec = QueryFunctionSpec::knn_distance(1, 2);
  auto idx = index::build_index({{0.0, 0.0}, {1.0, 1.0}}, 1).index;
  CHECK_THROWS_AS(NeuroEngine(spec, idx, {mlp::Mlp({2, 1})}, BuildMetadata{}), ContractError);
  CHECK_THROWS_AS(NeuroEngine(spec, idx, {mlp::Mlp({2, 1}), mlp::Mlp({3, 1})}, BuildMetadata{}),
                  ContractError);
}

TEST_CASE("build errors name the empty leaf") {
  Workload w;
  w.spec = QueryFunctionSpec::knn_distance(1, 1);
  for (int i = 0; i < 8; ++i) {
    w.queries.push_back({1.0});
    w.labels.push_back({1.0});
  }
  CHECK_THROWS_AS(build(w, small_options(2)), BuildError);
  Workload unlabeled = w;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(build(unlabeled, small_options(0)), ContractError);
}

TEST_CASE("engine files round trip bit-exactly and reject damage") {
  const auto w = labeled_count_workload(300, 7);
  const auto e = build(w, small_options(2));
  const auto path = temp_path("neurodb_test_engine.bin");
  e.save(path);
  const auto back = NeuroEngine::load(path);
  CHECK(back.to_bytes() == e.to_bytes());
  for (const auto& q : w.queries) REQUIRE(back.answer(q) == e.answer(q));
  CHECK(back.metadata().leaf_training_sizes == e.metadata().leaf_training_sizes);

  const auto bytes = e.to_bytes();
  auto expect_kind = [](std::vector<std::uint8_t> b, LoadError::Kind kind) {
    try {
      NeuroEngine::from_bytes(b);
      FAIL("damaged engine loaded");
    } catch (const LoadError& err) {
      CHECK(err.kind() == kind);
    }
  };
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  expect_kind(flipped, LoadError::Kind::Checksum);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  expect_kind(truncated, LoadError::Kind::Truncated);
  auto magic = bytes;
  magic[1] = 'X';
  expect_kind(magic, LoadError::Kind::BadMagic);
  auto version = bytes;
  version[8] = NeuroEngine::kFormatVersion + 1;
  expect_kind(version, LoadError::Kind::Version);
  CHECK_THROWS_AS(NeuroEngine::load(temp_path("neurodb_no_such_file.bin")), LoadError);
  std::filesystem::remove(path);
}
