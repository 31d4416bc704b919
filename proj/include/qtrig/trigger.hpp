#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "qtrig/indicator.hpp"

namespace qtrig {

/// Threshold crossing detector configuration. The trigger fires when the
/// indicator crosses tau from above: it must first be observed at or above
/// tau (armed), then stay below tau for `confirm` consecutive consumed
/// steps. `cadence` consumes only every n-th available step of a series.
struct TriggerConfig {
  double tau = 0.8;
  std::uint64_t confirm = 1;
  std::uint64_t cadence = 1;
  std::optional<LevelRange> tau_range;  // for randomized-threshold studies

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("TriggerConfig: tau must be in (0, 1)");
    if (confirm < 1)
      throw std::invalid_argument("TriggerConfig: confirm must be >= 1");
    if (cadence < 1)
      throw std::invalid_argument("TriggerConfig: cadence must be >= 1");
    if (tau_range) {
      if (!(tau_range->lo <= tau_range->hi) || !(tau_range->lo > 0.0) ||
          !(tau_range->hi < 1.0))
        throw std::invalid_argument("TriggerConfig: invalid tau range");
    }
  }
};

/// Crossing-detection state. Once fired the state is terminal: feeding more
/// steps never changes fired_at.
struct TriggerState {
  bool armed = false;             // has P been observed at or above tau
  std::uint64_t below_streak = 0; // consecutive consumed steps with P < tau
  std::optional<std::int64_t> fired_at;
  std::optional<std::int64_t> streak_start;
  std::optional<std::int64_t> last_step;

  bool fired() const { return fired_at.has_value(); }
};

/// Advances the state machine by one consumed step. `p` is empty for
/// degenerate (no-data) steps, which leave the crossing state unchanged.
/// Returns true exactly when this step completes the confirming streak;
/// fired_at is then the FIRST step of that streak, the earliest actionable
/// point of the crossing.
inline bool trigger_step(TriggerState& state, std::int64_t step,
                         std::optional<double> p, const TriggerConfig& config) {
  config.validate();
  if (state.last_step && step <= *state.last_step)
    throw std::invalid_argument(
        "trigger_step: steps must be strictly increasing (got " +
        std::to_string(step) + " after " + std::to_string(*state.last_step) +
        ")");
  state.last_step = step;
  if (state.fired()) return false;
  if (!p) return false;
  if (*p >= config.tau) {
    state.armed = true;
    state.below_streak = 0;
    state.streak_start.reset();
    return false;
  }
  // Below tau. A run that starts below tau must rise above it before any
  // crossing can fire.
  if (!state.armed) return false;
  if (state.below_streak == 0) state.streak_start = step;
  ++state.below_streak;
  if (state.below_streak >= config.confirm) {
    state.fired_at = state.streak_start;
    return true;
  }
  return false;
}

/// Folds trigger_step over an indicator series, consuming every cadence-th
/// available point, and returns the fired step (if any). A pure fold: the
/// same series and config always give the same result.
inline std::optional<std::int64_t> detect_trigger(
    std::span<const IndicatorPoint> series, const TriggerConfig& config) {
  config.validate();
  TriggerState state;
  for (std::size_t i = 0; i < series.size(); i += config.cadence) {
    if (trigger_step(state, series[i].step, series[i].value, config)) break;
  }
  return state.fired_at;
}

}  // namespace qtrig
