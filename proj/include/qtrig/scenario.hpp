#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qtrig/errors.hpp"
#include "qtrig/field.hpp"
#include "qtrig/rng.hpp"

namespace qtrig {

/// Inclusive timestep range within which a correct trigger must fire.
struct GroundTruth {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool contains(std::int64_t step) const { return step >= lo && step <= hi; }
};

struct MixtureBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// Schedule breakpoint: mixture weights at one step. Weights between
/// breakpoints are linearly interpolated; before the first and after the
/// last they are clamped.
struct PhasePoint {
  std::int64_t step = 0;
  double w_unburnt = 0.0;
  double w_partial = 0.0;
  double w_burnt = 0.0;
};

/// Synthetic scalar-field time series with ignition-like quantile dynamics
/// and a known ground-truth trigger window.
///
/// Each grid point draws from a three-component mixture whose weights
/// follow the phase schedule:
///   unburnt  - narrow high-positive uniform band,
///   partial  - wide band from the negative floor up to the peak, strongly
///              bottom-heavy (value = lo + width * u^shape, shape >= 1),
///   burnt    - negative uniform band.
/// Draining the unburnt weight while partial/burnt weights grow moves mass
/// toward the low end, which widens the gap between the high percentiles
/// and sends the P-indicator down through the trigger band.
struct ScenarioSpec {
  std::string name;
  Index grid_points = 0;
  std::int64_t steps = 0;
  GroundTruth window;
  std::vector<PhasePoint> schedule;
  MixtureBand unburnt{0.75, 1.00};
  MixtureBand partial{-1.05, 1.05};
  MixtureBand burnt{-1.00, -0.50};
  double partial_shape = 8.0;
  double noise_scale = 0.0;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (grid_points == 0)
      throw std::invalid_argument("ScenarioSpec: grid_points must be >= 1");
    if (steps < 1) throw std::invalid_argument("ScenarioSpec: steps must be >= 1");
    if (!(window.lo <= window.hi && window.hi < steps))
      throw std::invalid_argument("ScenarioSpec: window must satisfy lo <= hi < steps");
    if (schedule.empty())
      throw std::invalid_argument("ScenarioSpec: empty phase schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto& p = schedule[i];
      if (i > 0 && schedule[i - 1].step >= p.step)
        throw std::invalid_argument("ScenarioSpec: schedule steps must increase");
      for (double w : {p.w_unburnt, p.w_partial, p.w_burnt}) {
        if (!(w >= 0.0 && w <= 1.0))
          throw std::invalid_argument("ScenarioSpec: weights must be in [0, 1]");
      }
      if (std::abs(p.w_unburnt + p.w_partial + p.w_burnt - 1.0) > 1e-9)
        throw std::invalid_argument(
            "ScenarioSpec: weights must sum to 1 at step " +
            std::to_string(p.step));
    }
    if (!(partial_shape >= 1.0))
      throw std::invalid_argument("ScenarioSpec: partial_shape must be >= 1");
    for (const auto& band : {unburnt, partial, burnt}) {
      if (!(band.lo < band.hi))
        throw std::invalid_argument("ScenarioSpec: mixture band is inverted");
    }
    // No burnt mass before the window opens. Breakpoints ahead of the
    // window must carry w_burnt = 0, and a segment crossing the window
    // start may only ramp w_burnt if it begins right at the boundary.
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto& p = schedule[i];
      if (p.step < window.lo && p.w_burnt != 0.0)
        throw std::invalid_argument(
            "ScenarioSpec: w_burnt must be 0 before the window (step " +
            std::to_string(p.step) + ")");
      if (i + 1 < schedule.size()) {
        const auto& q = schedule[i + 1];
        if (p.step < window.lo - 1 && q.step >= window.lo && q.w_burnt > 0.0)
          throw std::invalid_argument(
              "ScenarioSpec: w_burnt ramps up before the window (segment " +
              std::to_string(p.step) + ".." + std::to_string(q.step) + ")");
      }
    }
  }

  /// Mixture weights {unburnt, partial, burnt} at the given step.
  std::array<double, 3> weights_at(std::int64_t step) const {
    const auto& s = schedule;
    if (step <= s.front().step)
      return {s.front().w_unburnt, s.front().w_partial, s.front().w_burnt};
    if (step >= s.back().step)
      return {s.back().w_unburnt, s.back().w_partial, s.back().w_burnt};
    std::size_t i = 1;
    while (s[i].step < step) ++i;
    const auto& a = s[i - 1];
    const auto& b = s[i];
    const double f = static_cast<double>(step - a.step) /
                     static_cast<double>(b.step - a.step);
    return {a.w_unburnt + f * (b.w_unburnt - a.w_unburnt),
            a.w_partial + f * (b.w_partial - a.w_partial),
            a.w_burnt + f * (b.w_burnt - a.w_burnt)};
  }
};

namespace detail {

inline double int_pow(double base, std::uint32_t exp) {
  double result = 1.0;
  while (exp > 0) {
    if (exp & 1u) result *= base;
    base *= base;
    exp >>= 1;
  }
  return result;
}

inline double shaped(double u, double shape) {
  // Bottom-heavy within-band law: u^shape. Integer shapes take the cheap
  // squaring path; generation sits on the hot path of lazy evaluation.
  const double rounded = std::nearbyint(shape);
  if (shape == rounded && rounded >= 1.0 && rounded <= 64.0)
    return int_pow(u, static_cast<std::uint32_t>(rounded));
  return std::pow(u, shape);
}

}  // namespace detail

namespace detail {

/// Mixture draw with precomputed weights; the schedule interpolation is
/// hoisted out of the per-point hot path.
inline double mixture_value(const ScenarioSpec& spec,
                            const std::array<double, 3>& w, std::int64_t step,
                            Index index) {
  Rng rng(derive_seed(spec.master_seed, static_cast<std::uint64_t>(step), index));
  const double pick = rng.next_u01();
  const double u = rng.next_u01();
  double value;
  if (pick < w[0]) {
    value = spec.unburnt.lo + (spec.unburnt.hi - spec.unburnt.lo) * u;
  } else if (pick < w[0] + w[1]) {
    value = spec.partial.lo + (spec.partial.hi - spec.partial.lo) *
                                  detail::shaped(u, spec.partial_shape);
  } else {
    value = spec.burnt.lo + (spec.burnt.hi - spec.burnt.lo) * u;
  }
  if (spec.noise_scale > 0.0)
    value += spec.noise_scale * (2.0 * rng.next_u01() - 1.0);
  return value;
}

inline void require_step(const ScenarioSpec& spec, std::int64_t step,
                         const char* who) {
  if (step < 0 || step >= spec.steps)
    throw std::invalid_argument(std::string(who) + ": step " +
                                std::to_string(step) + " outside [0, " +
                                std::to_string(spec.steps) + ")");
}

}  // namespace detail

/// Value of grid point `index` at `step`: a pure function of
/// (master_seed, step, index), so lazy evaluation is random-access and
/// costs nothing for points never sampled.
inline double scenario_point_value(const ScenarioSpec& spec, std::int64_t step,
                                   Index index) {
  return detail::mixture_value(spec, spec.weights_at(step), step, index);
}

/// Lazy snapshot of one scenario step; sampling k points costs exactly k
/// mixture draws.
inline FieldSnapshot generate_snapshot(const ScenarioSpec& spec,
                                       std::int64_t step) {
  spec.validate();
  detail::require_step(spec, step, "generate_snapshot");
  const auto w = spec.weights_at(step);
  return FieldSnapshot::lazy(step, spec.grid_points,
                             [spec, w, step](Index i) {
                               return detail::mixture_value(spec, w, step, i);
                             });
}

/// Eagerly materialized snapshot (reference path for exact indicators).
inline FieldSnapshot generate_eager(const ScenarioSpec& spec,
                                    std::int64_t step) {
  spec.validate();
  detail::require_step(spec, step, "generate_eager");
  const auto w = spec.weights_at(step);
  std::vector<double> values(spec.grid_points);
  for (Index i = 0; i < spec.grid_points; ++i)
    values[i] = detail::mixture_value(spec, w, step, i);
  return FieldSnapshot::eager(step, std::move(values));
}

/// Built-in scenarios. hcci_t40_like and hcci_t15_like replicate the grid
/// size (451,584) and trigger windows of half-million-point ignition runs;
/// rcci_like replicates a 2,560,000-point case with two descent phases and
/// its window on the second descent. tiny is a 10-step smoke-test series.
/// These replicate sizes, windows and quantile phenomenology - not physics.
inline const std::vector<ScenarioSpec>& builtin_scenarios() {
  static const std::vector<ScenarioSpec> scenarios = [] {
    std::vector<ScenarioSpec> all;

    ScenarioSpec hcci40;
    hcci40.name = "hcci_t40_like";
    hcci40.grid_points = 451584;
    hcci40.steps = 400;
    hcci40.window = {175, 225};
    hcci40.schedule = {
        {0, 1.00, 0.000, 0.000},   {172, 1.00, 0.000, 0.000},
        {178, 0.55, 0.450, 0.000}, {186, 0.10, 0.900, 0.000},
        {199, 0.02, 0.925, 0.055}, {208, 0.00, 0.930, 0.070},
        {240, 0.00, 0.920, 0.080}, {399, 0.00, 0.920, 0.080},
    };
    hcci40.partial_shape = 8.0;
    hcci40.noise_scale = 0.002;
    hcci40.master_seed = 74201;
    all.push_back(hcci40);

    // Time-dilated variant of hcci_t40_like for in-situ cadence studies:
    // the same descent stretched onto a 4000-step axis, so coarse cadences
    // (every 100th or 1000th step) still land consumed steps inside the
    // window. The descent completes by step 2000 for that reason.
    ScenarioSpec longrun = hcci40;
    longrun.name = "hcci_t40_longrun";
    longrun.steps = 4000;
    longrun.window = {1750, 2250};
    longrun.schedule = {
        {0, 1.00, 0.000, 0.000},    {1720, 1.00, 0.000, 0.000},
        {1770, 0.55, 0.450, 0.000}, {1840, 0.10, 0.900, 0.000},
        {1930, 0.02, 0.925, 0.055}, {1990, 0.00, 0.930, 0.070},
        {2400, 0.00, 0.920, 0.080}, {3999, 0.00, 0.920, 0.080},
    };
    longrun.master_seed = 74222;
    all.push_back(longrun);

    ScenarioSpec hcci15 = hcci40;
    hcci15.name = "hcci_t15_like";
    hcci15.window = {250, 315};
    hcci15.schedule = {
        {0, 1.00, 0.000, 0.000},   {247, 1.00, 0.000, 0.000},
        {253, 0.55, 0.450, 0.000}, {261, 0.10, 0.900, 0.000},
        {274, 0.02, 0.925, 0.055}, {283, 0.00, 0.930, 0.070},
        {320, 0.00, 0.920, 0.080}, {399, 0.00, 0.920, 0.080},
    };
    hcci15.master_seed = 74215;
    all.push_back(hcci15);

    ScenarioSpec rcci;
    rcci.name = "rcci_like";
    rcci.grid_points = 2560000;
    rcci.steps = 100;
    rcci.window = {38, 50};
    // Two descent phases; the ground-truth window sits on the second one.
    // The first dip (partial weight only, no burnt mass) stays above the
    // top of the viable threshold band so only the second descent fires.
    rcci.schedule = {
        {0, 1.00, 0.000, 0.000},  {10, 1.00, 0.000, 0.000},
        {18, 0.05, 0.950, 0.000}, {26, 0.90, 0.100, 0.000},
        {34, 0.95, 0.050, 0.000}, {38, 0.80, 0.200, 0.000},
        {42, 0.10, 0.900, 0.000}, {46, 0.02, 0.925, 0.055},
        {49, 0.00, 0.930, 0.070}, {99, 0.00, 0.920, 0.080},
    };
    rcci.partial_shape = 8.0;
    rcci.noise_scale = 0.002;
    rcci.master_seed = 74236;
    all.push_back(rcci);

    ScenarioSpec tiny;
    tiny.name = "tiny";
    tiny.grid_points = 4096;
    tiny.steps = 10;
    tiny.window = {4, 7};
    tiny.schedule = {
        {0, 1.00, 0.000, 0.000}, {3, 1.00, 0.000, 0.000},
        {5, 0.10, 0.900, 0.000}, {7, 0.00, 0.930, 0.070},
        {9, 0.00, 0.920, 0.080},
    };
    tiny.partial_shape = 12.0;
    tiny.noise_scale = 0.002;
    tiny.master_seed = 74299;
    all.push_back(tiny);

    for (const auto& s : all) s.validate();
    return all;
  }();
  return scenarios;
}

inline const ScenarioSpec& builtin_scenario(std::string_view name) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  std::string known;
  for (const auto& s : builtin_scenarios()) {
    if (!known.empty()) known += ", ";
    known += s.name;
  }
  throw std::invalid_argument("unknown scenario '" + std::string(name) +
                              "' (known: " + known + ")");
}

// -- JSON (de)serialization --------------------------------------------

inline void to_json(nlohmann::json& j, const MixtureBand& b) {
  j = nlohmann::json{{"lo", b.lo}, {"hi", b.hi}};
}
inline void from_json(const nlohmann::json& j, MixtureBand& b) {
  j.at("lo").get_to(b.lo);
  j.at("hi").get_to(b.hi);
}

inline void to_json(nlohmann::json& j, const PhasePoint& p) {
  j = nlohmann::json{{"step", p.step},
                     {"w_unburnt", p.w_unburnt},
                     {"w_partial", p.w_partial},
                     {"w_burnt", p.w_burnt}};
}
inline void from_json(const nlohmann::json& j, PhasePoint& p) {
  j.at("step").get_to(p.step);
  j.at("w_unburnt").get_to(p.w_unburnt);
  j.at("w_partial").get_to(p.w_partial);
  j.at("w_burnt").get_to(p.w_burnt);
}

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = nlohmann::json{{"name", s.name},
                     {"grid_points", s.grid_points},
                     {"steps", s.steps},
                     {"window", {s.window.lo, s.window.hi}},
                     {"schedule", s.schedule},
                     {"unburnt", s.unburnt},
                     {"partial", s.partial},
                     {"burnt", s.burnt},
                     {"partial_shape", s.partial_shape},
                     {"noise_scale", s.noise_scale},
                     {"master_seed", s.master_seed}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  j.at("name").get_to(s.name);
  j.at("grid_points").get_to(s.grid_points);
  j.at("steps").get_to(s.steps);
  s.window.lo = j.at("window").at(0).get<std::int64_t>();
  s.window.hi = j.at("window").at(1).get<std::int64_t>();
  j.at("schedule").get_to(s.schedule);
  j.at("unburnt").get_to(s.unburnt);
  j.at("partial").get_to(s.partial);
  j.at("burnt").get_to(s.burnt);
  j.at("partial_shape").get_to(s.partial_shape);
  j.at("noise_scale").get_to(s.noise_scale);
  j.at("master_seed").get_to(s.master_seed);
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw format_error(path.string() + ": cannot open");
  ScenarioSpec spec;
  try {
    spec = nlohmann::json::parse(in).get<ScenarioSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace qtrig
