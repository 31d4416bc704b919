#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <vector>

#include "qtrig/field.hpp"
#include "qtrig/rng.hpp"

using namespace qtrig;

TEST_CASE("eager snapshots validate their values", "[field]") {
  CHECK_THROWS_AS(FieldSnapshot::eager(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(
      FieldSnapshot::eager(0, {1.0, std::numeric_limits<double>::quiet_NaN()}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      FieldSnapshot::eager(0, {std::numeric_limits<double>::infinity()}),
      std::invalid_argument);
  const auto snap = FieldSnapshot::eager(3, {5.0, 6.0, 7.0});
  CHECK(snap.step() == 3);
  CHECK(snap.size() == 3);
  CHECK_FALSE(snap.is_lazy());
  CHECK(snap.eval_count() == 0);
}

TEST_CASE("lazy and eager views agree on every index", "[field]") {
  std::vector<double> data(257);
  Rng rng(11);
  for (auto& v : data) v = rng.next_u01();
  const auto eager = FieldSnapshot::eager(0, data);
  const auto lazy =
      FieldSnapshot::lazy(0, data.size(), [data](Index i) { return data[i]; });
  for (Index i = 0; i < eager.size(); ++i) REQUIRE(eager.at(i) == lazy.at(i));
  CHECK(lazy.eval_count() == eager.size());
  CHECK(lazy.materialize() == data);
}

TEST_CASE("out-of-range access is rejected", "[field]") {
  const auto snap = FieldSnapshot::eager(0, {1.0, 2.0});
  CHECK_THROWS_AS(snap.at(2), std::out_of_range);
  const std::vector<Index> bad = {0, 5};
  CHECK_THROWS_AS(gather_values(snap, bad), std::out_of_range);
}

TEST_CASE("global_index_sample basic contracts", "[field]") {
  SECTION("single-point field always yields index 0") {
    const auto idx = global_index_sample(1, 5, 123);
    CHECK(idx == std::vector<Index>{0, 0, 0, 0, 0});
  }
  SECTION("range membership") {
    for (const Index i : global_index_sample(10, 4, 7)) CHECK(i < 10);
  }
  SECTION("invalid arguments") {
    CHECK_THROWS_AS(global_index_sample(0, 4, 7), std::invalid_argument);
    CHECK_THROWS_AS(global_index_sample(10, 0, 7), std::invalid_argument);
  }
  SECTION("deterministic per seed") {
    CHECK(global_index_sample(1000, 100, 9) == global_index_sample(1000, 100, 9));
    CHECK(global_index_sample(1000, 100, 9) != global_index_sample(1000, 100, 10));
  }
}

TEST_CASE("global_index_sample empirical mean matches a uniform draw",
          "[field]") {
  const Index n = 451584, k = 48000;
  const auto idx = global_index_sample(n, k, 1);
  double mean = 0.0;
  for (const Index i : idx) mean += static_cast<double>(i);
  mean /= static_cast<double>(k);
  // Mean of k iid uniforms over [0, n): expectation (n-1)/2, sd n/sqrt(12k).
  const double expected = (static_cast<double>(n) - 1.0) / 2.0;
  const double sigma = static_cast<double>(n) / std::sqrt(12.0 * k);
  CHECK(std::abs(mean - expected) < 3.0 * sigma);
}

TEST_CASE("even partitions cover the index space in balanced extents",
          "[field]") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + rng.next_below(10000);
    const Index ranks = 1 + rng.next_below(n < 64 ? n : 64);
    const auto part = PartitionedField::even(n, ranks);
    REQUIRE(part.ranks() == ranks);
    Index covered = 0;
    Index lo = n, hi = 0;
    for (Index r = 0; r < ranks; ++r) {
      const auto& e = part.extent(r);
      REQUIRE(e.begin == covered);  // contiguous, disjoint
      covered = e.end;
      lo = std::min(lo, e.size());
      hi = std::max(hi, e.size());
    }
    REQUIRE(covered == n);
    REQUIRE(hi - lo <= 1);
    REQUIRE(part.balanced());
  }
  CHECK_THROWS_AS(PartitionedField::even(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(PartitionedField::even(0, 1), std::invalid_argument);
}

TEST_CASE("per_rank_sample gathers exactly s draws per rank", "[field]") {
  SECTION("784 ranks at 20 samples each gives a 15680-sample pool") {
    const auto part = PartitionedField::even(451584, 784);
    const auto samples = per_rank_sample(part, 20, 5);
    CHECK(samples.size() == 15680);
  }
  SECTION("single rank matches the size of a global draw") {
    const auto part = PartitionedField::even(1000, 1);
    const auto samples = per_rank_sample(part, 64, 5);
    const auto global = global_index_sample(1000, 64, 5);
    CHECK(samples.size() == global.size());
    for (const auto& s : samples) CHECK(s.rank == 0);
  }
  SECTION("local indices stay inside their rank extent") {
    const auto part = PartitionedField::even(8, 4);
    const auto samples = per_rank_sample(part, 2, 3);
    REQUIRE(samples.size() == 8);
    for (const auto& s : samples)
      CHECK(s.local < part.extent(s.rank).size());
    const auto global = to_global_indices(part, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& e = part.extent(samples[i].rank);
      CHECK(global[i] >= e.begin);
      CHECK(global[i] < e.end);
    }
  }
  SECTION("empty rank is an invalid partition") {
    auto part = PartitionedField::from_extents(
        {RankExtent{0, 4}, RankExtent{4, 4}, RankExtent{4, 8}});
    CHECK_THROWS_AS(per_rank_sample(part, 2, 3), std::invalid_argument);
  }
  SECTION("unbalanced custom extents still sample, with a stderr note") {
    auto part = PartitionedField::from_extents(
        {RankExtent{0, 6}, RankExtent{6, 8}});
    CHECK_FALSE(part.balanced());
    const auto samples = per_rank_sample(part, 3, 1);
    CHECK(samples.size() == 6);
  }
  SECTION("deterministic per (seed, rank), merged in rank order") {
    const auto part = PartitionedField::even(1000, 10);
    const auto a = per_rank_sample(part, 5, 77);
    const auto b = per_rank_sample(part, 5, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].rank == b[i].rank);
      CHECK(a[i].local == b[i].local);
    }
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].rank <= a[i].rank);
  }
}

TEST_CASE("per-rank draws are uniform within each extent", "[field]") {
  const auto part = PartitionedField::even(10000, 4);
  const auto samples = per_rank_sample(part, 20000, 13);
  std::vector<double> mean(4, 0.0);
  std::vector<int> count(4, 0);
  for (const auto& s : samples) {
    mean[s.rank] += static_cast<double>(s.local);
    ++count[s.rank];
  }
  for (Index r = 0; r < 4; ++r) {
    REQUIRE(count[r] == 20000);
    mean[r] /= count[r];
    const double extent = static_cast<double>(part.extent(r).size());
    const double expected = (extent - 1.0) / 2.0;
    const double sigma = extent / std::sqrt(12.0 * 20000);
    CHECK(std::abs(mean[r] - expected) < 4.0 * sigma);
  }
}

TEST_CASE("concurrent gathers share one atomic eval counter", "[field]") {
  const Index n = 50000;
  const auto lazy = FieldSnapshot::lazy(
      0, n, [](Index i) { return u01_from_bits(derive_seed(5, i)); });
  std::vector<std::thread> workers;
  std::vector<std::vector<double>> results(4);
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&, t] {
      const auto idx = global_index_sample(n, 10000, 100 + t);
      results[t] = gather_values(lazy, idx);
    });
  }
  for (auto& w : workers) w.join();
  CHECK(lazy.eval_count() == 4 * 10000);
  for (int t = 0; t < 4; ++t) {
    const auto idx = global_index_sample(n, 10000, 100 + t);
    REQUIRE(results[t] == gather_values(lazy, idx));
  }
}

TEST_CASE("gather_values returns values in index order and counts evals",
          "[field]") {
  const auto eager = FieldSnapshot::eager(0, {5.0, 6.0, 7.0});
  const std::vector<Index> order = {2, 0};
  CHECK(gather_values(eager, order) == std::vector<double>{7.0, 5.0});

  const Index n = 100000;
  const auto lazy = FieldSnapshot::lazy(
      0, n, [](Index i) { return static_cast<double>(i) * 0.5; });
  const auto idx = global_index_sample(n, 48000, 2);
  const auto before = lazy.eval_count();
  const auto values = gather_values(lazy, idx);
  CHECK(lazy.eval_count() - before == 48000);
  const auto again = gather_values(lazy, idx);
  CHECK(values == again);  // same snapshot, same indices: identical values
}
