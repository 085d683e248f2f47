#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "neurodb/oracle.hpp"

using namespace neurodb;
using oracle::exact_raq;

namespace {

// Brute-force reference written without the library's helpers.
std::optional<double> reference_raq(const Dataset& ds, const QueryFunctionSpec& s, QueryView q,
                                    const std::vector<std::size_t>& rows, double scale = 1.0) {
  std::vector<double> v;
  for (auto i : rows) {
    if (matches(s, q, ds.row(i))) v.push_back(ds.at(i, s.aggregation.measure));
  }
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  switch (s.aggregation.kind) {
    case AggKind::Count: return n * scale;
    case AggKind::Sum: return sum * scale;
    default: break;
  }
  if (v.empty()) return std::nullopt;
  const double mean = sum / n;
  if (s.aggregation.kind == AggKind::Avg) return mean;
  if (s.aggregation.kind == AggKind::Std) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
  }
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> r(ds.n());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
  return r;
}

Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * d);
  for (auto& x : v) x = u(rng);
  return Dataset(std::move(v), d);
}

QueryInstance random_query(const QueryFunctionSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QueryInstance q(s.d_pred());
  switch (s.predicate.kind) {
    case PredicateKind::AxisRange: {
      const std::size_t r = s.predicate.attributes.size();
      for (std::size_t a = 0; a < r; ++a) {
        q[a] = u(rng) * 0.7;
        q[r + a] = q[a] + 0.3;
      }
      break;
    }
    case PredicateKind::HalfSpace:
      q = {2.0 * u(rng) - 1.0, u(rng)};
      break;
    case PredicateKind::RotatedRectangle:
      q = {u(rng), u(rng), u(rng), u(rng), u(rng) * 1.5};
      break;
  }
  return q;
}

const Dataset kSmall = Dataset::from_rows({{1, 4}, {2, 7}, {3, 6}});
const Dataset kLine = Dataset::from_rows({{1}, {2}, {3}, {5}, {6}});

QueryFunctionSpec on_x(AggKind k) {
  return QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {k, 1}, 2);
}

}  // namespace

TEST_CASE("exact RAQ examples") {
  const std::vector<double> q03{0.0, 3.0};
  CHECK((*exact_raq(kSmall, on_x(AggKind::Avg), q03))[0] == 5.5);
  CHECK((*exact_raq(kSmall, on_x(AggKind::Median), std::vector<double>{0.0, 4.0}))[0] == 6.0);
  CHECK((*exact_raq(kSmall, on_x(AggKind::Count), std::vector<double>{0.0, 4.0}))[0] == 3.0);
  CHECK((*exact_raq(kSmall, on_x(AggKind::Sum), q03))[0] == 11.0);
  CHECK_FALSE(exact_raq(kSmall, on_x(AggKind::Avg), std::vector<double>{10.0, 11.0}).has_value());
  CHECK((*exact_raq(kSmall, on_x(AggKind::Count), std::vector<double>{10.0, 11.0}))[0] == 0.0);
  CHECK((*exact_raq(kSmall, on_x(AggKind::Sum), std::vector<double>{10.0, 11.0}))[0] == 0.0);
  // Population std of {4,7,6}.
  const double mean = 17.0 / 3.0;
  const double std_ref = std::sqrt(((4 - mean) * (4 - mean) + (7 - mean) * (7 - mean) +
                                    (6 - mean) * (6 - mean)) / 3.0);
  CHECK((*exact_raq(kSmall, on_x(AggKind::Std), std::vector<double>{0.0, 4.0}))[0] ==
        doctest::Approx(std_ref).epsilon(1e-12));
  // Even count median averages the middle pair: {4,7} -> 5.5.
  CHECK((*exact_raq(kSmall, on_x(AggKind::Median), q03))[0] == 5.5);
}

TEST_CASE("property: exact RAQ agrees with a brute-force reference") {
  const Dataset ds = random_dataset(300, 3, 5);
  std::mt19937_64 rng(9);
  const std::vector<PredicateSpec> preds{PredicateSpec::axis_range({0, 1}),
                                         PredicateSpec::half_space(0, 1),
                                         PredicateSpec::rotated_rectangle(1, 0)};
  for (const auto& p : preds) {
    for (auto k : {AggKind::Count, AggKind::Sum, AggKind::Avg, AggKind::Std, AggKind::Median}) {
      const auto s = QueryFunctionSpec::raq(p, {k, 2}, 3);
      for (int t = 0; t < 30; ++t) {
        const auto q = random_query(s, rng);
        const auto got = exact_raq(ds, s, q);
        const auto want = reference_raq(ds, s, q, all_rows(ds));
        REQUIRE(got.has_value() == want.has_value());
        if (want) CHECK((*got)[0] == doctest::Approx(*want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("property: full-domain COUNT equals n") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = random_dataset(50 + seed * 13, 2, seed);
    const auto s = QueryFunctionSpec::raq(PredicateSpec::axis_range({0, 1}), {AggKind::Count, 0}, 2);
    const std::vector<double> q{0.0, 0.0, 1.0, 1.0};
    CHECK((*exact_raq(ds, s, q))[0] == static_cast<double>(ds.n()));
  }
}

TEST_CASE("k-NN examples") {
  const std::vector<double> q4{4.0};
  CHECK(oracle::exact_knn_distance(kLine, 1, q4) == 1.0);
  CHECK(oracle::exact_knn_distance(kLine, 3, q4) == 2.0);
  // Rows 3 and 5 tie at distance 1; the lower index (value 3) wins.
  CHECK(oracle::exact_knn_point(kLine, 1, q4) == std::vector<double>{3.0});
  CHECK(oracle::exact_knn_point(kLine, 2, q4) == std::vector<double>{5.0});
  CHECK(oracle::exact_knn_point(kLine, 2, std::vector<double>{4.6}) == std::vector<double>{6.0});
  CHECK_THROWS_AS(oracle::exact_knn_distance(kLine, 6, q4), ContractError);
  CHECK_THROWS_AS(oracle::exact_knn_distance(kLine, 1, std::vector<double>{1.0, 2.0}), ContractError);
}

TEST_CASE("property: k-NN distance is monotone in k and 1-Lipschitz in q") {
  const Dataset ds = random_dataset(200, 3, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    double prev = 0.0;
    for (std::size_t k = 1; k <= 20; ++k) {
      const double dk = oracle::exact_knn_distance(ds, k, a);
      CHECK(dk >= prev);
      prev = dk;
    }
    double ab = 0.0;
    for (int j = 0; j < 3; ++j) ab += (a[j] - b[j]) * (a[j] - b[j]);
    ab = std::sqrt(ab);
    CHECK(std::abs(oracle::exact_knn_distance(ds, 1, a) - oracle::exact_knn_distance(ds, 1, b)) <=
          ab + 1e-12);
  }
}

TEST_CASE("property: k-NN point is a dataset row at the k-th distance") {
  const Dataset ds = random_dataset(100, 2, 8);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> q{u(rng), u(rng)};
    const std::size_t k = 1 + t % 10;
    const auto idx = oracle::exact_knn_index(ds, k, q);
    const auto row = ds.row(idx);
    const double dist = std::hypot(row[0] - q[0], row[1] - q[1]);
    CHECK(dist == doctest::Approx(oracle::exact_knn_distance(ds, k, q)).epsilon(1e-12));
  }
}

TEST_CASE("TREE-AGG sample sizes and seeding") {
  const Dataset ds = random_dataset(100, 2, 2);
  CHECK(oracle::TreeAgg::build(ds, 1.0, 0).sample_size() == 100);
  CHECK(oracle::TreeAgg::build(ds, 0.5, 0).sample_size() == 50);
  CHECK(oracle::TreeAgg::build(ds, 0.013, 0).sample_size() == 2);
  CHECK(oracle::TreeAgg::build(ds, 0.5, 3).sample_rows() ==
        oracle::TreeAgg::build(ds, 0.5, 3).sample_rows());
  CHECK(oracle::TreeAgg::build(ds, 0.5, 3).sample_rows() !=
        oracle::TreeAgg::build(ds, 0.5, 4).sample_rows());
  CHECK_THROWS_AS(oracle::TreeAgg::build(ds, 0.0, 0), ContractError);
  CHECK_THROWS_AS(oracle::TreeAgg::build(ds, 1.5, 0), ContractError);
}

TEST_CASE("TREE-AGG scales COUNT by n over the sample size") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({double(i), double(i % 7)});
  const Dataset ds = Dataset::from_rows(rows);
  const auto ta = oracle::TreeAgg::build(ds, 0.5, 12);
  const auto& sample = ta.sample_rows();
  const auto count = QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {AggKind::Count, 0}, 2);
  // Range covering exactly the first ten sampled rows.
  const std::vector<double> q{double(sample[0]), double(sample[9]) + 0.5};
  CHECK((*ta.query(count, q))[0] == 20.0);
  const auto avg = QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {AggKind::Avg, 1}, 2);
  double mean = 0.0;
  for (int i = 0; i < 10; ++i) mean += ds.at(sample[i], 1);
  CHECK((*ta.query(avg, q))[0] == doctest::Approx(mean / 10.0).epsilon(1e-12));
}

TEST_CASE("property: TREE-AGG with fraction one equals the exact answer") {
  const Dataset ds = random_dataset(1500, 3, 17);
  const auto ta = oracle::TreeAgg::build(ds, 1.0, 0);
  std::mt19937_64 rng(2);
  for (auto k : {AggKind::Count, AggKind::Sum, AggKind::Avg, AggKind::Std, AggKind::Median}) {
    for (const auto& p : {PredicateSpec::axis_range({0, 2}), PredicateSpec::half_space(2, 1),
                          PredicateSpec::rotated_rectangle(0, 1)}) {
      const auto s = QueryFunctionSpec::raq(p, {k, 1}, 3);
      for (int t = 0; t < 40; ++t) {
        const auto q = random_query(s, rng);
        const auto a = ta.query(s, q);
        const auto b = exact_raq(ds, s, q);
        REQUIRE(a.has_value() == b.has_value());
        if (b) REQUIRE((*a)[0] == (*b)[0]);
      }
    }
  }
}

TEST_CASE("property: TREE-AGG matches a brute-force scan of its sample") {
  const Dataset ds = random_dataset(2000, 3, 23);
  const auto ta = oracle::TreeAgg::build(ds, 0.3, 5);
  std::mt19937_64 rng(6);
  for (auto k : {AggKind::Count, AggKind::Sum, AggKind::Avg, AggKind::Median}) {
    for (const auto& p : {PredicateSpec::axis_range({1}), PredicateSpec::half_space(0, 2),
                          PredicateSpec::rotated_rectangle(2, 0)}) {
      const auto s = QueryFunctionSpec::raq(p, {k, 1}, 3);
      for (int t = 0; t < 20; ++t) {
        const auto q = random_query(s, rng);
        const auto got = ta.query(s, q);
        const auto want = reference_raq(ds, s, q, ta.sample_rows(), ta.scale());
        REQUIRE(got.has_value() == want.has_value());
        if (want) CHECK((*got)[0] == doctest::Approx(*want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("property: index candidates are a superset of the matches") {
  std::vector<std::vector<double>> rows;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 800; ++i) rows.push_back({u(rng), u(rng), double(i % 4)});
  const Dataset ds = Dataset::from_rows(rows);
  const auto ta = oracle::TreeAgg::build(ds, 1.0, 0);
  std::vector<QueryFunctionSpec> specs{
      QueryFunctionSpec::raq(PredicateSpec::axis_range({0, 1}), {AggKind::Count, 0}, 3),
      QueryFunctionSpec::raq(PredicateSpec::half_space(0, 1), {AggKind::Count, 0}, 3),
      QueryFunctionSpec::raq(PredicateSpec::rotated_rectangle(0, 1), {AggKind::Count, 0}, 3),
      QueryFunctionSpec::raq(PredicateSpec::axis_range({0}), {AggKind::Count, 0}, 3, GroupBy{2, 1.0})};
  std::size_t pruned = 0;
  for (const auto& s : specs) {
    for (int t = 0; t < 50; ++t) {
      const auto q = random_query(s, rng);
      const auto cand = ta.candidates(s, q);
      const std::set<std::size_t> c(cand.begin(), cand.end());
      REQUIRE(c.size() == cand.size());
      for (std::size_t i = 0; i < ds.n(); ++i) {
        if (matches(s, q, ds.row(i))) REQUIRE(c.count(i) == 1);
      }
      pruned += ds.n() - cand.size();
    }
  }
  CHECK(pruned > 0);
}

TEST_CASE("spatial index structure") {
  const Dataset ds = random_dataset(1000, 2, 31);
  const oracle::SpatialIndex idx(ds.values(), 2);
  std::vector<int> seen(idx.size(), 0);
  std::vector<std::size_t> stack{idx.root()};
  while (!stack.empty()) {
    const auto node = stack.back();
    stack.pop_back();
    const auto lo = idx.node_min(node), hi = idx.node_max(node);
    if (idx.nodes()[node].leaf) {
      CHECK(idx.node_entries(node).size() <= oracle::SpatialIndex::kFanout);
      for (auto e : idx.node_entries(node)) {
        ++seen[e];
        for (int j = 0; j < 2; ++j) CHECK((lo[j] <= idx.point(e)[j] && idx.point(e)[j] <= hi[j]));
      }
    } else {
      CHECK(idx.node_children(node).size() <= oracle::SpatialIndex::kFanout);
      for (auto c : idx.node_children(node)) {
        for (int j = 0; j < 2; ++j) {
          CHECK(lo[j] <= idx.node_min(c)[j]);
          CHECK(idx.node_max(c)[j] <= hi[j]);
        }
        stack.push_back(c);
      }
    }
  }
  for (int s : seen) REQUIRE(s == 1);
}
