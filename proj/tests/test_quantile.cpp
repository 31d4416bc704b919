#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qtrig/field.hpp"
#include "qtrig/quantile.hpp"
#include "qtrig/rng.hpp"

using namespace qtrig;

namespace {

// Independent oracle: full sort, then the ceil(alpha*n)-th smallest
// (1-based), clamped to [1, n].
double brute_force_percentile(std::vector<double> values, double alpha) {
  std::sort(values.begin(), values.end());
  const double raw = std::ceil(alpha * static_cast<double>(values.size()));
  std::size_t pos = raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
  if (pos > values.size()) pos = values.size();
  return values[pos - 1];
}

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_in(-50.0, 50.0);
  return v;
}

}  // namespace

TEST_CASE("samples_needed evaluates the concentration-bound formula",
          "[quantile]") {
  SECTION("three-read indicator bound at 1% error, 99.9% confidence") {
    const auto k = samples_needed(0.01, 0.001, BoundKind::p_indicator);
    const auto oracle = static_cast<std::uint64_t>(
        std::ceil(std::log(12.0 / 0.001) / (2.0 * 0.01 * 0.01)));
    CHECK(k == oracle);
    CHECK(k == 46964);
  }
  SECTION("single percentile at 0.1% error needs about four million samples") {
    const auto k = samples_needed(0.001, 0.001, BoundKind::single_percentile);
    const auto oracle = static_cast<std::uint64_t>(
        std::ceil(std::log(4000.0) / (2.0 * 0.001 * 0.001)));
    CHECK(k == oracle);
    CHECK(k >= 4100000);
    CHECK(k <= 4200000);
  }
  SECTION("floor of the calculus") {
    const auto k = samples_needed(0.5, 0.999999, BoundKind::single_percentile);
    CHECK(k >= 1);
    CHECK(k < 10);
  }
  SECTION("parameters outside (0,1) are rejected") {
    CHECK_THROWS_AS(samples_needed(0.0, 0.5, BoundKind::p_indicator),
                    std::invalid_argument);
    CHECK_THROWS_AS(samples_needed(1.5, 0.5, BoundKind::p_indicator),
                    std::invalid_argument);
    CHECK_THROWS_AS(samples_needed(0.1, 0.0, BoundKind::p_indicator),
                    std::invalid_argument);
    CHECK_THROWS_AS(samples_needed(0.1, 1.0, BoundKind::p_indicator),
                    std::invalid_argument);
  }
  SECTION("budget factories") {
    const auto b = SampleBudget::from_error(0.01, 0.001, BoundKind::p_indicator);
    CHECK(b.k == 46964);
    CHECK(b.epsilon.value() == 0.01);
    CHECK(b.delta.value() == 0.001);
    CHECK(SampleBudget::from_samples(15680).k == 15680);
    CHECK_THROWS_AS(SampleBudget::from_samples(0), std::invalid_argument);
  }
}

TEST_CASE("exact_percentile selects the 1-based order statistic",
          "[quantile]") {
  const std::vector<double> deciles = {10, 20, 30, 40, 50,
                                       60, 70, 80, 90, 100};
  CHECK(exact_percentile(deciles, 0.5) == 50.0);
  CHECK(exact_percentile(deciles, 1.0) == 100.0);
  CHECK(exact_percentile(deciles, 0.05) == 10.0);

  // Permutation of 1..1000: the 0.94 percentile is 940.
  std::vector<double> perm(1000);
  std::iota(perm.begin(), perm.end(), 1.0);
  Rng rng(17);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  CHECK(exact_percentile(perm, 0.94) == 940.0);
  CHECK(exact_percentile(perm, 0.94) == brute_force_percentile(perm, 0.94));
}

TEST_CASE("exact_percentile input validation", "[quantile]") {
  CHECK_THROWS_AS(exact_percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(exact_percentile(std::vector<double>{1.0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(exact_percentile(std::vector<double>{1.0}, 1.5),
                  std::invalid_argument);
  const std::vector<double> with_nan = {1.0,
                                        std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(exact_percentile(with_nan, 0.5), std::invalid_argument);
}

TEST_CASE("exact_percentile matches the brute-force oracle on random arrays",
          "[quantile]") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto values = random_values(rng, 1 + rng.next_below(1000));
    for (int g = 1; g <= 100; ++g) {
      const double alpha = 0.01 * g;
      REQUIRE(exact_percentile(values, alpha) ==
              brute_force_percentile(values, alpha));
    }
  }
}

TEST_CASE("percentile_rank counts weakly-dominated entries", "[quantile]") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(percentile_rank(v, 2.0) == 0.5);
  CHECK(percentile_rank(v, 0.5) == 0.0);
  CHECK(percentile_rank(v, 4.0) == 1.0);

  std::vector<double> perm(1000);
  std::iota(perm.begin(), perm.end(), 1.0);
  CHECK(percentile_rank(perm, 940.0) == 0.94);

  // rank(exact_percentile(alpha)) >= alpha, for any array and level.
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const auto values = random_values(rng, 1 + rng.next_below(500));
    const double alpha = 0.01 + 0.99 * rng.next_u01();
    REQUIRE(percentile_rank(values, exact_percentile(values, alpha)) >=
            alpha);
  }
}

TEST_CASE("estimate_percentiles reads all levels off one shared sample",
          "[quantile]") {
  SECTION("constant field estimates the constant") {
    const auto field =
        FieldSnapshot::eager(0, std::vector<double>(5000, 3.14));
    const auto budget = SampleBudget::from_samples(500);
    const std::vector<double> levels = {0.01, 0.5, 0.94, 0.98};
    for (const auto& est : estimate_percentiles(field, levels, budget, 3))
      CHECK(est.value == 3.14);
  }
  SECTION("estimates are elements of the field and monotone across levels") {
    Rng rng(41);
    const auto values = random_values(rng, 20000);
    const auto field = FieldSnapshot::eager(0, values);
    const auto budget = SampleBudget::from_samples(2000);
    const std::vector<double> levels = {0.01, 0.25, 0.5, 0.94, 0.98};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto ests = estimate_percentiles(field, levels, budget, seed);
      for (std::size_t i = 1; i < ests.size(); ++i)
        REQUIRE(ests[i - 1].value <= ests[i].value);
      for (const auto& e : ests)
        REQUIRE(std::count(values.begin(), values.end(), e.value) > 0);
    }
  }
  SECTION("exhaustive mode reproduces the exact percentile bit for bit") {
    Rng rng(43);
    const auto values = random_values(rng, 3000);
    const auto field = FieldSnapshot::eager(0, values);
    const auto budget = SampleBudget::from_samples(10);
    for (const double alpha : {0.01, 0.33, 0.94, 0.98, 1.0}) {
      const auto est = estimate_percentiles(field, {&alpha, 1}, budget, 0,
                                            SampleMode::exhaustive);
      REQUIRE(est.front().value == exact_percentile(values, alpha));
      REQUIRE(est.front().k_used == field.size());
    }
  }
  SECTION("lazy fields are evaluated exactly k times, independent of N") {
    const auto budget = SampleBudget::from_samples(4096);
    const std::vector<double> levels = {0.01, 0.94, 0.98};
    for (const Index n : {Index{10000}, Index{1000000}}) {
      const auto lazy = FieldSnapshot::lazy(0, n, [n](Index i) {
        return static_cast<double>(i) / static_cast<double>(n);
      });
      const auto before = lazy.eval_count();
      estimate_percentiles(lazy, levels, budget, 9);
      REQUIRE(lazy.eval_count() - before == budget.k);
    }
  }
}

TEST_CASE("sampled percentile of a smooth field lands near its level",
          "[quantile]") {
  const Index n = 451584;
  std::vector<double> values(n);
  for (Index i = 0; i < n; ++i)
    values[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  const auto field = FieldSnapshot::eager(0, values);
  const auto budget = SampleBudget::from_samples(48000);
  const double level = 0.94;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto est = estimate_percentiles(field, {&level, 1}, budget, seed);
    if (std::abs(est.front().value - 0.94) <= 0.01) ++within;
  }
  CHECK(within >= 99);
}

TEST_CASE("quantile_error_study reports rank-error spread", "[quantile]") {
  SECTION("constant field: every estimate realizes rank 1.0") {
    const auto field = FieldSnapshot::eager(0, std::vector<double>(2000, 7.5));
    const auto stats = quantile_error_study(
        field, 0.94, SampleBudget::from_samples(200), 20, 5);
    for (const double e : stats.errors) {
      REQUIRE(e >= 0.0);
      REQUIRE(e == Catch::Approx(1.0 - 0.94));
    }
    CHECK(stats.mean_abs == Catch::Approx(0.06));
  }
  SECTION("mean absolute error shrinks as the sample count grows") {
    Rng rng(47);
    const auto values = random_values(rng, 100000);
    const auto field = FieldSnapshot::eager(0, values);
    const auto small = quantile_error_study(
        field, 0.94, SampleBudget::from_samples(12000), 30, 11);
    const auto large = quantile_error_study(
        field, 0.94, SampleBudget::from_samples(48000), 30, 11);
    CHECK(large.mean_abs < small.mean_abs);
  }
  SECTION("deterministic per seed; run r derives from seed + r") {
    Rng rng(53);
    const auto field = FieldSnapshot::eager(0, random_values(rng, 5000));
    const auto a = quantile_error_study(field, 0.5,
                                        SampleBudget::from_samples(100), 10, 21);
    const auto b = quantile_error_study(field, 0.5,
                                        SampleBudget::from_samples(100), 10, 21);
    CHECK(a.errors == b.errors);
  }
}

TEST_CASE("empirical violation rate respects the budget's confidence",
          "[quantile]") {
  // Budget sized for eps = 0.02 at 95% confidence; over many runs the
  // fraction of estimates missing the level by more than eps must stay
  // within delta plus binomial slack.
  Rng rng(59);
  std::vector<double> values(50000);
  for (auto& v : values) v = rng.next_u01();
  const auto field = FieldSnapshot::eager(0, values);
  const double eps = 0.02, delta = 0.05;
  const auto budget =
      SampleBudget::from_error(eps, delta, BoundKind::single_percentile);
  const std::uint64_t runs = 150;
  const auto stats = quantile_error_study(field, 0.94, budget, runs, 61);
  std::uint64_t violations = 0;
  for (const double e : stats.errors)
    if (std::abs(e) > eps) ++violations;
  const double fraction =
      static_cast<double>(violations) / static_cast<double>(runs);
  const double slack = 2.58 * std::sqrt(delta * (1 - delta) /
                                        static_cast<double>(runs));
  CHECK(fraction <= delta + slack);
}
