#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrig/field.hpp"
#include "qtrig/rng.hpp"

namespace qtrig {

/// Which concentration bound a sample budget is sized for: a single
/// percentile read, or the three shared-sample reads of the P-indicator.
enum class BoundKind { single_percentile, p_indicator };

/// Samples required to pin a percentile level within +/- epsilon with
/// probability at least 1 - delta:
///
///   single_percentile:  k = ceil( ln(4/delta)  / (2 epsilon^2) )
///   p_indicator:        k = ceil( ln(12/delta) / (2 epsilon^2) )
///
/// Natural logarithm. The count depends only on (epsilon, delta), never on
/// the field size - that is what makes the estimator sublinear.
inline std::uint64_t samples_needed(double epsilon, double delta,
                                    BoundKind kind) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("samples_needed: epsilon must be in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("samples_needed: delta must be in (0, 1)");
  const double c = (kind == BoundKind::single_percentile) ? 4.0 : 12.0;
  const double raw = std::log(c / delta) / (2.0 * epsilon * epsilon);
  if (!(raw < 9.0e18))
    throw std::invalid_argument("samples_needed: sample count overflows");
  const auto k = static_cast<std::uint64_t>(std::ceil(raw));
  return k < 1 ? 1 : k;
}

/// Error/confidence budget and the sample count it implies.
struct SampleBudget {
  std::uint64_t k = 1;
  BoundKind kind = BoundKind::p_indicator;
  // Set when the budget was derived from an (epsilon, delta) pair.
  std::optional<double> epsilon;
  std::optional<double> delta;

  static SampleBudget from_error(double epsilon, double delta, BoundKind kind) {
    SampleBudget b;
    b.k = samples_needed(epsilon, delta, kind);
    b.kind = kind;
    b.epsilon = epsilon;
    b.delta = delta;
    return b;
  }

  /// Fixed sample count chosen directly (sweeps, per-rank pools).
  static SampleBudget from_samples(std::uint64_t k,
                                   BoundKind kind = BoundKind::p_indicator) {
    if (k == 0) throw std::invalid_argument("SampleBudget: k must be >= 1");
    SampleBudget b;
    b.k = k;
    b.kind = kind;
    return b;
  }
};

namespace detail {

/// 0-based position of the ceil(alpha * n)-th smallest element (1-based
/// order statistic, clamped to [1, n]).
inline Index order_statistic_index(double alpha, Index n) {
  const double raw = std::ceil(alpha * static_cast<double>(n));
  Index pos = raw < 1.0 ? 1 : static_cast<Index>(raw);
  if (pos > n) pos = n;
  return pos - 1;
}

inline void require_levels(std::span<const double> levels) {
  for (double a : levels) {
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("percentile level must be in (0, 1], got " +
                                  std::to_string(a));
  }
}

inline void require_values(std::span<const double> values) {
  if (values.empty())
    throw std::invalid_argument("percentile of an empty array");
  for (double v : values) {
    if (std::isnan(v))
      throw std::invalid_argument("percentile input contains NaN");
  }
}

/// Selects the order statistics for several levels out of one scratch
/// buffer. nth_element yields the same element a full sort would place at
/// that position, in O(n) per level.
inline std::vector<double> select_levels(std::vector<double>& scratch,
                                         std::span<const double> levels) {
  std::vector<double> out;
  out.reserve(levels.size());
  for (double a : levels) {
    const Index pos = order_statistic_index(a, scratch.size());
    auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(pos);
    std::nth_element(scratch.begin(), nth, scratch.end());
    out.push_back(*nth);
  }
  return out;
}

}  // namespace detail

/// The alpha-percentile of the array: the ceil(alpha * N)-th smallest entry
/// (1-based). Input order is irrelevant; the value returned is always an
/// element of the array.
inline double exact_percentile(std::span<const double> values, double alpha) {
  detail::require_values(values);
  detail::require_levels({&alpha, 1});
  std::vector<double> scratch(values.begin(), values.end());
  return detail::select_levels(scratch, {&alpha, 1}).front();
}

/// Several exact percentiles of one array, sharing a single scratch copy.
inline std::vector<double> exact_percentiles(std::span<const double> values,
                                             std::span<const double> levels) {
  detail::require_values(values);
  detail::require_levels(levels);
  std::vector<double> scratch(values.begin(), values.end());
  return detail::select_levels(scratch, levels);
}

/// Fraction of entries <= x (weak rank). Measures the percentile level a
/// sampled estimate actually realized.
inline double percentile_rank(std::span<const double> values, double x) {
  detail::require_values(values);
  if (std::isnan(x)) throw std::invalid_argument("percentile_rank: x is NaN");
  const auto count = static_cast<double>(
      std::count_if(values.begin(), values.end(), [x](double v) { return v <= x; }));
  return count / static_cast<double>(values.size());
}

/// One percentile read taken from a shared sample.
struct PercentileEstimate {
  double level = 0.0;
  double value = 0.0;
  std::uint64_t k_used = 0;
  std::uint64_t seed = 0;
};

/// `exhaustive` replaces the random index draw with every index [0, N);
/// it exists so tests can check that the sampled path degenerates to the
/// exact path bit-for-bit.
enum class SampleMode { random, exhaustive };

/// Estimates several percentile levels from ONE shared sample: draws k
/// indices, gathers k values once, and reads each level off the sorted
/// sample at position ceil(level * k). On lazy fields the eval counter
/// grows by exactly k, independent of N.
inline std::vector<PercentileEstimate> estimate_percentiles_at(
    const FieldSnapshot& field, std::span<const double> levels,
    std::span<const Index> indices, std::uint64_t seed) {
  detail::require_levels(levels);
  if (indices.empty())
    throw std::invalid_argument("estimate_percentiles: empty sample");
  std::vector<double> sample = gather_values(field, indices);
  const std::vector<double> values = detail::select_levels(sample, levels);
  std::vector<PercentileEstimate> out(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i)
    out[i] = PercentileEstimate{levels[i], values[i], indices.size(), seed};
  return out;
}

inline std::vector<PercentileEstimate> estimate_percentiles(
    const FieldSnapshot& field, std::span<const double> levels,
    const SampleBudget& budget, std::uint64_t seed,
    SampleMode mode = SampleMode::random) {
  if (budget.k == 0)
    throw std::invalid_argument("estimate_percentiles: budget.k must be >= 1");
  std::vector<Index> indices;
  if (mode == SampleMode::exhaustive) {
    indices.resize(field.size());
    std::iota(indices.begin(), indices.end(), Index{0});
  } else {
    indices = global_index_sample(field.size(), budget.k, seed);
  }
  return estimate_percentiles_at(field, levels, indices, seed);
}

/// Realized percentile-rank errors of repeated sampled estimates against
/// the full data.
struct ErrorStats {
  double alpha = 0.0;
  std::uint64_t k = 0;
  std::uint64_t runs = 0;
  std::vector<double> errors;  // signed, one per run
  double mean_abs = 0.0;
  double max_abs = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

/// Runs the sampled estimator `runs` times (run r uses seed + r), measures
/// each estimate's realized rank in the full data, and reports the spread
/// of rank errors. Lazy fields are materialized once for the reference
/// ranks; the estimates themselves still sample the given field.
inline ErrorStats quantile_error_study(const FieldSnapshot& field, double alpha,
                                       const SampleBudget& budget,
                                       std::uint64_t runs, std::uint64_t seed) {
  if (runs == 0)
    throw std::invalid_argument("quantile_error_study: runs must be >= 1");
  const std::vector<double> full = field.materialize();
  ErrorStats stats;
  stats.alpha = alpha;
  stats.k = budget.k;
  stats.runs = runs;
  stats.errors.reserve(runs);
  double abs_sum = 0.0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    const auto est =
        estimate_percentiles(field, {&alpha, 1}, budget, seed + r);
    const double err = percentile_rank(full, est.front().value) - alpha;
    stats.errors.push_back(err);
    abs_sum += std::abs(err);
    stats.max_abs = std::max(stats.max_abs, std::abs(err));
  }
  stats.mean_abs = abs_sum / static_cast<double>(runs);
  stats.q25 = exact_percentile(stats.errors, 0.25);
  stats.q50 = exact_percentile(stats.errors, 0.50);
  stats.q75 = exact_percentile(stats.errors, 0.75);
  return stats;
}

}  // namespace qtrig
