#include <doctest.h>

#include <algorithm>
#include <random>

#include "neurodb/index.hpp"

using namespace neurodb;
using namespace neurodb::index;

namespace {

std::vector<QueryInstance> distinct_queries(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<QueryInstance> q(n, QueryInstance(d));
  for (auto& x : q)
    for (auto& v : x) v = u(rng);
  return q;
}

}  // namespace

TEST_CASE("height zero is a single leaf") {
  const auto r = build_index({{0.3}, {0.1}}, 0);
  CHECK(r.index.leaf_count() == 1);
  CHECK(r.index.locate(std::vector<double>{123.0}) == 0);
  CHECK(r.leaf_members[0] == std::vector<std::size_t>{0, 1});
}

TEST_CASE("lower median split with ties going left") {
  const auto r = build_index({{3.0}, {1.0}, {4.0}, {2.0}}, 1);
  REQUIRE(r.index.splits().size() == 1);
  CHECK(r.index.splits()[0].dim == 0);
  CHECK(r.index.splits()[0].value == 2.0);
  CHECK(r.leaf_members[0] == std::vector<std::size_t>{1, 3});
  CHECK(r.leaf_members[1] == std::vector<std::size_t>{0, 2});
  CHECK(r.index.locate(std::vector<double>{2.0}) == 0);
  CHECK(r.index.locate(std::vector<double>{2.4}) == 1);
}

TEST_CASE("split dimension cycles from zero") {
  const auto q = distinct_queries(64, 3, 1);
  const auto r = build_index(q, 4);
  const auto& s = r.index.splits();
  REQUIRE(s.size() == 15);
  CHECK(s[0].dim == 0);
  for (std::size_t i = 1; i <= 2; ++i) CHECK(s[i].dim == 1);
  for (std::size_t i = 3; i <= 6; ++i) CHECK(s[i].dim == 2);
  for (std::size_t i = 7; i <= 14; ++i) CHECK(s[i].dim == 0);
}

TEST_CASE("too few queries or an empty leaf is a build error") {
  CHECK_THROWS_AS(build_index(distinct_queries(7, 2, 2), 3), BuildError);
  const std::vector<QueryInstance> same(16, QueryInstance{0.5, 0.5});
  try {
    build_index(same, 2);
    FAIL("duplicate queries built");
  } catch (const BuildError& e) {
    CHECK(e.leaf() >= 0);
  }
}

TEST_CASE("choose height") {
  CHECK(choose_height(1000, 100) == 4);
  CHECK(choose_height(1024, 64) == 4);
  CHECK(choose_height(50, 100) == 0);
  CHECK(choose_height(101, 100) == 1);
  CHECK_THROWS_AS(choose_height(10, 0), ContractError);
}

TEST_CASE("property: distinct coordinates give perfectly balanced leaves") {
  for (std::size_t h = 0; h <= 6; ++h) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const std::size_t per = 3 + seed;
      const auto q = distinct_queries(per << h, 1 + seed % 3, seed * 31 + h);
      const auto r = build_index(q, h);
      REQUIRE(r.leaf_members.size() == (std::size_t{1} << h));
      for (const auto& m : r.leaf_members) CHECK(m.size() == per);
    }
  }
}

TEST_CASE("property: unequal sizes still give every leaf at least floor(|Q|/2^h)") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t h = seed % 5;
    const std::size_t n = (std::size_t{1} << h) + 17 * seed + 3;
    const auto q = distinct_queries(n, 2, seed);
    const auto r = build_index(q, h);
    std::size_t total = 0;
    for (const auto& m : r.leaf_members) {
      CHECK(m.size() >= n >> h);
      total += m.size();
    }
    CHECK(total == n);
  }
}

TEST_CASE("property: routing reproduces the construction partition") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto q = distinct_queries(500, 3, seed + 100);
    const auto r = build_index(q, 1 + seed % 5);
    std::vector<std::size_t> seen(q.size(), 0);
    for (std::size_t leaf = 0; leaf < r.leaf_members.size(); ++leaf) {
      for (auto i : r.leaf_members[leaf]) {
        REQUIRE(r.index.locate(q[i]) == leaf);
        ++seen[i];
      }
    }
    for (auto s : seen) CHECK(s == 1);
  }
}

TEST_CASE("property: construction is deterministic and serializes losslessly") {
  const auto q = distinct_queries(300, 4, 77);
  const auto a = build_index(q, 5);
  const auto b = build_index(q, 5);
  CHECK(a.index == b.index);
  CHECK(a.leaf_members == b.leaf_members);
  binary::Writer w;
  a.index.serialize(w);
  binary::Reader rd(w.bytes());
  CHECK(PartitionIndex::deserialize(rd) == a.index);
  CHECK(rd.remaining() == 0);
  auto cut = w.bytes();
  cut.pop_back();
  binary::Reader short_reader(cut);
  CHECK_THROWS_AS(PartitionIndex::deserialize(short_reader), LoadError);
}

TEST_CASE("counted descent makes h comparisons") {
  const auto q = distinct_queries(256, 2, 5);
  for (std::size_t h = 0; h <= 6; ++h) {
    const auto r = build_index(q, h);
    std::size_t comparisons = 0;
    const auto leaf = r.index.locate_counted(q[0], comparisons);
    CHECK(leaf == r.index.locate(q[0]));
    CHECK(comparisons == h);
  }
}
