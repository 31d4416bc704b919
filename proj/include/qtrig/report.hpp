#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qtrig/indicator.hpp"
#include "qtrig/quantile.hpp"
#include "qtrig/series.hpp"
#include "qtrig/trigger.hpp"

namespace qtrig {

/// Shortest deterministic decimal form that round-trips a double.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// -- indicator series: step,P,p_alpha,p_beta,p_gamma,mode,k,seed ---------

inline std::string indicator_series_csv(std::span<const IndicatorPoint> series) {
  std::ostringstream out;
  out << "step,P,p_alpha,p_beta,p_gamma,mode,k,seed\n";
  for (const auto& pt : series) {
    out << pt.step << ',' << (pt.value ? fmt_double(*pt.value) : "nan") << ','
        << fmt_double(pt.p_alpha) << ',' << fmt_double(pt.p_beta) << ','
        << fmt_double(pt.p_gamma) << ','
        << (pt.mode == IndicatorMode::exact ? "exact" : "sampled") << ','
        << pt.k << ',' << pt.seed << '\n';
  }
  return out.str();
}

// -- error study: run,epsilon + JSON summary -----------------------------

inline std::string error_stats_csv(const ErrorStats& stats) {
  std::ostringstream out;
  out << "run,epsilon\n";
  for (std::size_t r = 0; r < stats.errors.size(); ++r)
    out << r << ',' << fmt_double(stats.errors[r]) << '\n';
  return out.str();
}

inline nlohmann::json error_stats_json(const ErrorStats& stats) {
  return nlohmann::json{{"alpha", stats.alpha}, {"k", stats.k},
                        {"runs", stats.runs},   {"mean_abs", stats.mean_abs},
                        {"max_abs", stats.max_abs}, {"q25", stats.q25},
                        {"q50", stats.q50},     {"q75", stats.q75}};
}

// -- trigger report and variability study --------------------------------

inline nlohmann::json indicator_params_json(const IndicatorParams& p) {
  nlohmann::json j{{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}};
  auto range = [](const std::optional<LevelRange>& r) -> nlohmann::json {
    if (!r) return nullptr;
    return nlohmann::json{r->lo, r->hi};
  };
  if (p.alpha_range) j["alpha_range"] = range(p.alpha_range);
  if (p.beta_range) j["beta_range"] = range(p.beta_range);
  if (p.gamma_range) j["gamma_range"] = range(p.gamma_range);
  return j;
}

inline nlohmann::json sampling_plan_json(const SamplingPlan& plan) {
  switch (plan.kind) {
    case SamplingPlan::Kind::exact:
      return nlohmann::json{{"mode", "exact"}};
    case SamplingPlan::Kind::global: {
      nlohmann::json j{{"mode", "sampled"}, {"k", plan.budget.k}};
      j["bound"] = plan.budget.kind == BoundKind::single_percentile
                       ? "single_percentile"
                       : "p_indicator";
      if (plan.budget.epsilon) j["epsilon"] = *plan.budget.epsilon;
      if (plan.budget.delta) j["delta"] = *plan.budget.delta;
      return j;
    }
    case SamplingPlan::Kind::per_rank:
      return nlohmann::json{{"mode", "per_rank"},
                            {"samples_per_rank", plan.samples_per_rank},
                            {"ranks", plan.ranks},
                            {"k", plan.samples_per_rank * plan.ranks}};
  }
  return nullptr;
}

inline nlohmann::json trigger_report_json(
    std::optional<std::int64_t> fired_step, const TriggerConfig& config,
    const IndicatorParams& params, const SamplingPlan& plan,
    std::uint64_t seed) {
  nlohmann::json j;
  j["fired_step"] = fired_step ? nlohmann::json(*fired_step) : nullptr;
  j["tau"] = config.tau;
  j["confirm"] = config.confirm;
  j["cadence"] = config.cadence;
  j["params"] = indicator_params_json(params);
  j["budget"] = sampling_plan_json(plan);
  j["seed"] = seed;
  return j;
}

inline std::string variability_study_csv(const VariabilityStudy& study) {
  std::ostringstream out;
  out << "realization,tau,seed,fired_step,in_window\n";
  for (const auto& row : study.rows) {
    out << row.realization << ',' << fmt_double(row.tau) << ',' << row.seed
        << ',';
    if (row.fired_step) out << *row.fired_step;
    out << ',' << (row.in_window ? 1 : 0) << '\n';
  }
  return out.str();
}

inline nlohmann::json variability_study_json(const VariabilityStudy& study) {
  nlohmann::json j;
  j["realizations"] = study.rows.size();
  j["window"] = {study.window.lo, study.window.hi};
  j["in_window_fraction"] = study.in_window_fraction;
  j["fired_q25"] = study.fired_q25 ? nlohmann::json(*study.fired_q25) : nullptr;
  j["fired_q50"] = study.fired_q50 ? nlohmann::json(*study.fired_q50) : nullptr;
  j["fired_q75"] = study.fired_q75 ? nlohmann::json(*study.fired_q75) : nullptr;
  return j;
}

}  // namespace qtrig
