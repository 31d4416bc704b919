#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qtrig/field.hpp"
#include "qtrig/indicator.hpp"
#include "qtrig/io.hpp"
#include "qtrig/quantile.hpp"
#include "qtrig/scenario.hpp"
#include "qtrig/trigger.hpp"

namespace qtrig {

/// Produces the snapshot for a given timestep. Drivers pull snapshots one
/// at a time so a whole series never has to sit in memory.
using SnapshotProvider = std::function<FieldSnapshot(std::int64_t)>;

/// How percentiles are read at each step: the exact full-data reference,
/// a global uniform sample of budget.k points, or a stratified pool of
/// samples_per_rank points from each of `ranks` ranks.
struct SamplingPlan {
  enum class Kind { exact, global, per_rank };

  Kind kind = Kind::exact;
  SampleBudget budget;
  Index samples_per_rank = 0;
  Index ranks = 0;

  static SamplingPlan exact() { return SamplingPlan{}; }

  static SamplingPlan global(SampleBudget b) {
    SamplingPlan p;
    p.kind = Kind::global;
    p.budget = b;
    return p;
  }

  static SamplingPlan per_rank(Index samples_per_rank, Index ranks) {
    if (samples_per_rank == 0 || ranks == 0)
      throw std::invalid_argument(
          "SamplingPlan: samples_per_rank and ranks must be >= 1");
    SamplingPlan p;
    p.kind = Kind::per_rank;
    p.samples_per_rank = samples_per_rank;
    p.ranks = ranks;
    return p;
  }

  /// Sample pool size per step (N for the exact plan).
  Index sample_count(Index n) const {
    switch (kind) {
      case Kind::exact: return n;
      case Kind::global: return budget.k;
      case Kind::per_rank: return samples_per_rank * ranks;
    }
    return n;
  }
};

/// One indicator evaluation under a plan. Degenerate steps come back with
/// an empty value rather than throwing, so series with flat stretches can
/// still be processed end to end.
inline IndicatorPoint evaluate_indicator(const FieldSnapshot& snapshot,
                                         const IndicatorParams& params,
                                         const SamplingPlan& plan,
                                         std::uint64_t step_seed) {
  switch (plan.kind) {
    case SamplingPlan::Kind::exact:
      return indicator_exact_point(snapshot, params);
    case SamplingPlan::Kind::global: {
      const auto indices =
          global_index_sample(snapshot.size(), plan.budget.k, step_seed);
      return indicator_sampled_at(snapshot, params, indices, step_seed);
    }
    case SamplingPlan::Kind::per_rank: {
      const auto part = PartitionedField::even(snapshot.size(), plan.ranks);
      const auto pairs = per_rank_sample(part, plan.samples_per_rank, step_seed);
      const auto indices = to_global_indices(part, pairs);
      return indicator_sampled_at(snapshot, params, indices, step_seed);
    }
  }
  throw std::logic_error("evaluate_indicator: unreachable");
}

/// Indicator time series over the given steps, evaluating every cadence-th
/// available step. Each step draws its own sample stream derived from
/// (seed, step), so the series is reproducible step by step.
inline std::vector<IndicatorPoint> compute_indicator_series(
    const SnapshotProvider& provider, std::span<const std::int64_t> steps,
    const IndicatorParams& params, const SamplingPlan& plan, std::uint64_t seed,
    std::uint64_t cadence = 1) {
  params.validate();
  if (cadence < 1)
    throw std::invalid_argument("compute_indicator_series: cadence must be >= 1");
  std::vector<IndicatorPoint> series;
  series.reserve(steps.size() / cadence + 1);
  for (std::size_t i = 0; i < steps.size(); i += cadence) {
    const std::int64_t t = steps[i];
    const FieldSnapshot snap = provider(t);
    series.push_back(evaluate_indicator(
        snap, params, plan, derive_seed(seed, static_cast<std::uint64_t>(t))));
  }
  return series;
}

/// Streaming trigger run: evaluates the indicator step by step (honoring
/// config.cadence) and stops as soon as the trigger fires.
inline std::optional<std::int64_t> run_trigger(
    const SnapshotProvider& provider, std::span<const std::int64_t> steps,
    const IndicatorParams& params, const SamplingPlan& plan,
    const TriggerConfig& config, std::uint64_t seed) {
  params.validate();
  config.validate();
  TriggerState state;
  for (std::size_t i = 0; i < steps.size(); i += config.cadence) {
    const std::int64_t t = steps[i];
    const FieldSnapshot snap = provider(t);
    const IndicatorPoint pt = evaluate_indicator(
        snap, params, plan, derive_seed(seed, static_cast<std::uint64_t>(t)));
    if (trigger_step(state, pt.step, pt.value, config)) break;
  }
  return state.fired_at;
}

inline SnapshotProvider scenario_provider(const ScenarioSpec& spec) {
  return [spec](std::int64_t t) { return generate_snapshot(spec, t); };
}

inline std::vector<std::int64_t> scenario_steps(const ScenarioSpec& spec) {
  std::vector<std::int64_t> steps(static_cast<std::size_t>(spec.steps));
  for (std::int64_t t = 0; t < spec.steps; ++t)
    steps[static_cast<std::size_t>(t)] = t;
  return steps;
}

/// Provider over an ingested snapshot directory; files load on access.
inline SnapshotProvider series_provider(std::vector<SeriesEntry> entries) {
  auto by_step = std::make_shared<std::unordered_map<std::int64_t, SeriesEntry>>();
  for (auto& e : entries) (*by_step)[e.step] = e;
  return [by_step](std::int64_t t) {
    const auto it = by_step->find(t);
    if (it == by_step->end())
      throw std::invalid_argument("series has no snapshot for step " +
                                  std::to_string(t));
    return it->second.load();
  };
}

/// One randomized-threshold realization of a trigger run.
struct RealizationRow {
  std::uint64_t realization = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> fired_step;
  bool in_window = false;
};

struct VariabilityStudy {
  std::vector<RealizationRow> rows;
  GroundTruth window;
  double in_window_fraction = 0.0;
  // Quartiles of the fired steps (over realizations that fired).
  std::optional<double> fired_q25, fired_q50, fired_q75;
};

/// Repeats the trigger run `realizations` times, each with a threshold
/// drawn uniformly from tau_range and a fresh sampling seed, and reports
/// the spread of fired steps plus the fraction that landed inside the
/// ground-truth window. Realization i derives its draws from (seed, i)
/// alone, so results do not depend on evaluation order.
inline VariabilityStudy trigger_variability_study(
    const SnapshotProvider& provider, std::span<const std::int64_t> steps,
    GroundTruth window, const IndicatorParams& params, const SamplingPlan& plan,
    std::uint64_t realizations, LevelRange tau_range, std::uint64_t confirm,
    std::uint64_t cadence, std::uint64_t seed) {
  if (realizations == 0)
    throw std::invalid_argument(
        "trigger_variability_study: realizations must be >= 1");
  if (!(tau_range.lo <= tau_range.hi && tau_range.lo > 0.0 && tau_range.hi < 1.0))
    throw std::invalid_argument("trigger_variability_study: invalid tau range");
  params.validate();

  VariabilityStudy study;
  study.window = window;
  study.rows.resize(realizations);
  std::vector<double> fired;
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < realizations; ++i) {
    Rng tau_rng(derive_seed(seed, i, 0));
    const double tau = tau_rng.next_in(tau_range.lo, tau_range.hi);
    const std::uint64_t run_seed = derive_seed(seed, i, 1);
    TriggerConfig config;
    config.tau = tau;
    config.confirm = confirm;
    config.cadence = cadence;
    const auto fired_step =
        run_trigger(provider, steps, params, plan, config, run_seed);
    RealizationRow row;
    row.realization = i;
    row.tau = tau;
    row.seed = run_seed;
    row.fired_step = fired_step;
    row.in_window = fired_step && window.contains(*fired_step);
    if (row.in_window) ++hits;
    if (fired_step) fired.push_back(static_cast<double>(*fired_step));
    study.rows[i] = row;
  }
  study.in_window_fraction =
      static_cast<double>(hits) / static_cast<double>(realizations);
  if (!fired.empty()) {
    study.fired_q25 = exact_percentile(fired, 0.25);
    study.fired_q50 = exact_percentile(fired, 0.50);
    study.fired_q75 = exact_percentile(fired, 0.75);
  }
  return study;
}

inline VariabilityStudy trigger_variability_study(
    const ScenarioSpec& spec, const IndicatorParams& params,
    const SamplingPlan& plan, std::uint64_t realizations, LevelRange tau_range,
    std::uint64_t confirm, std::uint64_t cadence, std::uint64_t seed) {
  spec.validate();
  const auto steps = scenario_steps(spec);
  return trigger_variability_study(scenario_provider(spec), steps, spec.window,
                                   params, plan, realizations, tau_range,
                                   confirm, cadence, seed);
}

}  // namespace qtrig
