#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrig/errors.hpp"
#include "qtrig/field.hpp"
#include "qtrig/quantile.hpp"
#include "qtrig/rng.hpp"

namespace qtrig {

struct LevelRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile levels of the P-indicator: gamma (low reference), alpha
/// (bottom of the top band), beta (top reference), with gamma < alpha < beta.
/// Optional ranges allow drawing each level uniformly per evaluation; the
/// ordering must hold for every point of the ranges, so range validity is
/// checked at the interval endpoints.
struct IndicatorParams {
  double alpha = 0.94;
  double beta = 0.98;
  double gamma = 0.01;
  std::optional<LevelRange> alpha_range;
  std::optional<LevelRange> beta_range;
  std::optional<LevelRange> gamma_range;

  void validate() const {
    auto effective = [](double point, const std::optional<LevelRange>& range,
                        const char* name) -> LevelRange {
      LevelRange r = range.value_or(LevelRange{point, point});
      if (!(r.lo <= r.hi))
        throw std::invalid_argument(std::string("IndicatorParams: ") + name +
                                    " range is inverted");
      if (!(r.lo > 0.0 && r.hi < 1.0))
        throw std::invalid_argument(std::string("IndicatorParams: ") + name +
                                    " must stay in (0, 1)");
      return r;
    };
    const LevelRange a = effective(alpha, alpha_range, "alpha");
    const LevelRange b = effective(beta, beta_range, "beta");
    const LevelRange g = effective(gamma, gamma_range, "gamma");
    if (!(g.hi < a.lo && a.hi < b.lo))
      throw std::invalid_argument(
          "IndicatorParams: ordering gamma < alpha < beta must hold over the "
          "whole ranges");
  }

  /// Levels in the shared-sample read order {gamma, alpha, beta}.
  std::array<double, 3> levels() const { return {gamma, alpha, beta}; }
};

/// Draws concrete levels from their ranges (uniformly, keyed by seed);
/// levels without a range pass through unchanged.
inline IndicatorParams draw_params(const IndicatorParams& params,
                                   std::uint64_t seed) {
  params.validate();
  Rng rng(derive_seed(seed, 0x9a7a5u));
  IndicatorParams out = params;
  // Fixed draw order keeps results stable as ranges are added or removed.
  if (params.gamma_range)
    out.gamma = rng.next_in(params.gamma_range->lo, params.gamma_range->hi);
  if (params.alpha_range)
    out.alpha = rng.next_in(params.alpha_range->lo, params.alpha_range->hi);
  if (params.beta_range)
    out.beta = rng.next_in(params.beta_range->lo, params.beta_range->hi);
  out.alpha_range.reset();
  out.beta_range.reset();
  out.gamma_range.reset();
  return out;
}

enum class IndicatorMode { exact, sampled };

/// The indicator at one timestep, with the three percentile values that
/// produced it. value is empty when the robust range collapsed (degenerate
/// step); trigger logic skips such steps.
struct IndicatorPoint {
  std::int64_t step = 0;
  std::optional<double> value;
  double p_alpha = 0.0;
  double p_beta = 0.0;
  double p_gamma = 0.0;
  IndicatorMode mode = IndicatorMode::exact;
  std::uint64_t k = 0;     // points read: N for exact, sample count otherwise
  std::uint64_t seed = 0;  // 0 for exact
};

namespace detail {

/// Relative floor below which p_beta - p_gamma is treated as collapsed.
inline bool degenerate_range(double p_beta, double p_gamma) {
  const double scale =
      std::max({1.0, std::abs(p_beta), std::abs(p_gamma)});
  return std::abs(p_beta - p_gamma) < 1e-12 * scale;
}

}  // namespace detail

/// P = (p_alpha - p_gamma) / (p_beta - p_gamma), or empty when the range is
/// degenerate. The non-throwing form used by series drivers.
inline std::optional<double> p_indicator_checked(double p_alpha, double p_beta,
                                                 double p_gamma) {
  if (detail::degenerate_range(p_beta, p_gamma)) return std::nullopt;
  return (p_alpha - p_gamma) / (p_beta - p_gamma);
}

/// P = (p_alpha - p_gamma) / (p_beta - p_gamma). The denominator is the
/// robust value range; the numerator is that range with the top percentile
/// band removed. Throws degenerate_range_error on a collapsed range.
inline double p_indicator(double p_alpha, double p_beta, double p_gamma) {
  const auto p = p_indicator_checked(p_alpha, p_beta, p_gamma);
  if (!p)
    throw degenerate_range_error(
        "p_indicator: degenerate range, |p_beta - p_gamma| below floor "
        "(p_beta=" + std::to_string(p_beta) +
        ", p_gamma=" + std::to_string(p_gamma) + ")");
  return *p;
}

namespace detail {

inline IndicatorPoint make_point(std::int64_t step, double p_gamma,
                                 double p_alpha, double p_beta,
                                 IndicatorMode mode, std::uint64_t k,
                                 std::uint64_t seed) {
  IndicatorPoint pt;
  pt.step = step;
  pt.value = p_indicator_checked(p_alpha, p_beta, p_gamma);
  pt.p_alpha = p_alpha;
  pt.p_beta = p_beta;
  pt.p_gamma = p_gamma;
  pt.mode = mode;
  pt.k = k;
  pt.seed = seed;
  return pt;
}

inline IndicatorPoint require_value(IndicatorPoint pt) {
  if (!pt.value)
    throw degenerate_range_error(
        "indicator: degenerate range at step " + std::to_string(pt.step));
  return pt;
}

}  // namespace detail

/// Exact indicator: all three percentiles read from the full data. This is
/// the expensive reference path; lazy fields get fully materialized.
inline IndicatorPoint indicator_exact(const FieldSnapshot& field,
                                      const IndicatorParams& params) {
  params.validate();
  const auto levels = params.levels();
  std::vector<double> ps;
  if (field.is_lazy()) {
    const std::vector<double> values = field.materialize();
    ps = exact_percentiles(values, levels);
  } else {
    ps = exact_percentiles(field.eager_values(), levels);
  }
  return detail::require_value(detail::make_point(
      field.step(), ps[0], ps[1], ps[2], IndicatorMode::exact, field.size(), 0));
}

/// Non-throwing variant used when a series may contain degenerate steps:
/// a collapsed range yields a point with an empty value instead of a throw.
inline IndicatorPoint indicator_exact_point(const FieldSnapshot& field,
                                            const IndicatorParams& params) {
  params.validate();
  const auto levels = params.levels();
  std::vector<double> ps;
  if (field.is_lazy()) {
    const std::vector<double> values = field.materialize();
    ps = exact_percentiles(values, levels);
  } else {
    ps = exact_percentiles(field.eager_values(), levels);
  }
  return detail::make_point(field.step(), ps[0], ps[1], ps[2],
                            IndicatorMode::exact, field.size(), 0);
}

/// Sampled indicator from explicit sample indices (e.g. a per-rank pool):
/// one shared gather feeds all three percentile reads. Non-throwing on
/// degenerate ranges, like indicator_exact_point.
inline IndicatorPoint indicator_sampled_at(const FieldSnapshot& field,
                                           const IndicatorParams& params,
                                           std::span<const Index> indices,
                                           std::uint64_t seed) {
  params.validate();
  const auto levels = params.levels();
  const auto est = estimate_percentiles_at(field, levels, indices, seed);
  return detail::make_point(field.step(), est[0].value, est[1].value,
                            est[2].value, IndicatorMode::sampled,
                            indices.size(), seed);
}

/// Sampled indicator with a global uniform index draw of budget.k points.
/// The budget must be sized for the three-read p_indicator bound.
inline IndicatorPoint indicator_sampled(const FieldSnapshot& field,
                                        const IndicatorParams& params,
                                        const SampleBudget& budget,
                                        std::uint64_t seed,
                                        SampleMode mode = SampleMode::random) {
  params.validate();
  if (budget.kind != BoundKind::p_indicator)
    throw std::invalid_argument(
        "indicator_sampled: budget must use the p_indicator bound");
  const auto levels = params.levels();
  const auto est = estimate_percentiles(field, levels, budget, seed, mode);
  return detail::require_value(detail::make_point(
      field.step(), est[0].value, est[1].value, est[2].value,
      IndicatorMode::sampled, est[0].k_used, seed));
}

/// Per-rank flavor: per_rank points from each rank's extent, gathered into
/// one pool of ranks * per_rank samples.
inline IndicatorPoint indicator_sampled_per_rank(const FieldSnapshot& field,
                                                 const PartitionedField& part,
                                                 const IndicatorParams& params,
                                                 Index per_rank,
                                                 std::uint64_t seed) {
  if (part.size() != field.size())
    throw std::invalid_argument(
        "indicator_sampled_per_rank: partition does not match field size");
  const auto pairs = per_rank_sample(part, per_rank, seed);
  const auto indices = to_global_indices(part, pairs);
  return detail::require_value(
      indicator_sampled_at(field, params, indices, seed));
}

}  // namespace qtrig
