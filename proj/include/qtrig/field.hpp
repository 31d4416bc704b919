#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qtrig/rng.hpp"

namespace qtrig {

using Index = std::uint64_t;

/// Random-access point evaluator for fields whose values are expensive to
/// produce. Every eval() bumps a shared atomic counter by exactly one, so
/// callers can audit how many point evaluations an estimator actually spent.
class PointEvaluator {
 public:
  using EvalFn = std::function<double(Index)>;

  explicit PointEvaluator(EvalFn fn)
      : fn_(std::move(fn)),
        count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (!fn_) throw std::invalid_argument("PointEvaluator: null eval function");
  }

  double eval(Index i) const {
    count_->fetch_add(1, std::memory_order_relaxed);
    return fn_(i);
  }

  std::uint64_t eval_count() const {
    return count_->load(std::memory_order_relaxed);
  }

 private:
  EvalFn fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

/// One timestep of a scalar field over N grid points. Either eager (values
/// held in memory) or lazy (values produced on demand by a PointEvaluator).
/// Immutable after construction; copies share storage and the eval counter.
class FieldSnapshot {
 public:
  static FieldSnapshot eager(std::int64_t step, std::vector<double> values) {
    if (values.empty())
      throw std::invalid_argument("FieldSnapshot: empty value array");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]))
        throw std::invalid_argument(
            "FieldSnapshot: non-finite value at index " + std::to_string(i));
    }
    FieldSnapshot snap;
    snap.step_ = step;
    snap.size_ = values.size();
    snap.values_ =
        std::make_shared<const std::vector<double>>(std::move(values));
    return snap;
  }

  static FieldSnapshot lazy(std::int64_t step, Index size,
                            PointEvaluator::EvalFn fn) {
    if (size == 0) throw std::invalid_argument("FieldSnapshot: size must be >= 1");
    FieldSnapshot snap;
    snap.step_ = step;
    snap.size_ = size;
    snap.eval_.emplace(std::move(fn));
    return snap;
  }

  std::int64_t step() const { return step_; }
  Index size() const { return size_; }
  bool is_lazy() const { return eval_.has_value(); }

  /// Value at grid point i. Counts one evaluation on lazy snapshots.
  double at(Index i) const {
    if (i >= size_)
      throw std::out_of_range("FieldSnapshot: index " + std::to_string(i) +
                              " out of range [0, " + std::to_string(size_) +
                              ")");
    return eval_ ? eval_->eval(i) : (*values_)[i];
  }

  /// Direct view of eager storage. Throws for lazy snapshots.
  std::span<const double> eager_values() const {
    if (!values_)
      throw std::logic_error("FieldSnapshot: lazy snapshot has no eager view");
    return *values_;
  }

  /// All N values in index order. On lazy snapshots this evaluates (and
  /// counts) every point; it is the full-cost reference path.
  std::vector<double> materialize() const {
    if (values_) return *values_;
    std::vector<double> out(size_);
    for (Index i = 0; i < size_; ++i) out[i] = eval_->eval(i);
    return out;
  }

  /// Total point evaluations spent so far (0 for eager snapshots).
  std::uint64_t eval_count() const { return eval_ ? eval_->eval_count() : 0; }

 private:
  FieldSnapshot() = default;

  std::int64_t step_ = 0;
  Index size_ = 0;
  std::shared_ptr<const std::vector<double>> values_;
  std::optional<PointEvaluator> eval_;
};

/// Contiguous index range [begin, end) owned by one rank.
struct RankExtent {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

/// Partition of the global index set [0, N) into R contiguous rank extents.
/// Models the distributed layout of a simulation without any transport: the
/// extents are disjoint and cover [0, N).
class PartitionedField {
 public:
  /// Even split: extent sizes differ by at most one. Requires ranks <= n so
  /// every rank is nonempty.
  static PartitionedField even(Index n, Index ranks) {
    if (n == 0) throw std::invalid_argument("PartitionedField: n must be >= 1");
    if (ranks == 0 || ranks > n)
      throw std::invalid_argument(
          "PartitionedField: invalid partition, need 1 <= ranks <= n (got ranks=" +
          std::to_string(ranks) + ", n=" + std::to_string(n) + ")");
    std::vector<RankExtent> extents(ranks);
    const Index base = n / ranks;
    const Index remainder = n % ranks;
    Index begin = 0;
    for (Index r = 0; r < ranks; ++r) {
      const Index size = base + (r < remainder ? 1 : 0);
      extents[r] = RankExtent{begin, begin + size};
      begin += size;
    }
    return PartitionedField(n, std::move(extents));
  }

  /// Custom extents; validated to be disjoint, in order, and covering [0, n).
  static PartitionedField from_extents(std::vector<RankExtent> extents) {
    if (extents.empty())
      throw std::invalid_argument("PartitionedField: no extents");
    Index expected = 0;
    for (std::size_t r = 0; r < extents.size(); ++r) {
      if (extents[r].begin != expected || extents[r].end < extents[r].begin)
        throw std::invalid_argument(
            "PartitionedField: extents must be contiguous and ordered (rank " +
            std::to_string(r) + ")");
      expected = extents[r].end;
    }
    return PartitionedField(expected, std::move(extents));
  }

  Index size() const { return size_; }
  Index ranks() const { return extents_.size(); }
  const RankExtent& extent(Index rank) const { return extents_.at(rank); }

  /// True when all rank sizes are within one point of each other.
  bool balanced() const {
    Index lo = extents_.front().size(), hi = lo;
    for (const auto& e : extents_) {
      lo = std::min(lo, e.size());
      hi = std::max(hi, e.size());
    }
    return hi - lo <= 1;
  }

 private:
  PartitionedField(Index size, std::vector<RankExtent> extents)
      : size_(size), extents_(std::move(extents)) {}

  Index size_;
  std::vector<RankExtent> extents_;
};

/// A sampled point addressed as (rank, index local to that rank's extent).
struct RankSample {
  Index rank = 0;
  Index local = 0;
};

/// Draws k independent uniform indices in [0, n), with replacement.
/// Deterministic for a fixed seed.
inline std::vector<Index> global_index_sample(Index n, Index k,
                                              std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("global_index_sample: n must be >= 1");
  if (k == 0) throw std::invalid_argument("global_index_sample: k must be >= 1");
  Rng rng(derive_seed(seed));
  std::vector<Index> indices(k);
  for (Index i = 0; i < k; ++i) indices[i] = rng.next_below(n);
  return indices;
}

/// Stratified sampler: each rank contributes exactly per_rank uniform local
/// indices (with replacement) drawn from a stream keyed by (seed, rank).
/// The merged pool is in rank order, so the result does not depend on how
/// rank draws are scheduled.
inline std::vector<RankSample> per_rank_sample(const PartitionedField& field,
                                               Index per_rank,
                                               std::uint64_t seed) {
  if (per_rank == 0)
    throw std::invalid_argument("per_rank_sample: per_rank must be >= 1");
  for (Index r = 0; r < field.ranks(); ++r) {
    if (field.extent(r).size() == 0)
      throw std::invalid_argument("per_rank_sample: invalid partition, rank " +
                                  std::to_string(r) + " is empty");
  }
  if (!field.balanced()) {
    // Equal draws per rank over unequal extents oversample the small ranks.
    std::fprintf(stderr,
                 "note: rank sizes differ by more than 1; stratified "
                 "per-rank sampling is mildly biased toward small ranks\n");
  }
  std::vector<RankSample> samples;
  samples.reserve(field.ranks() * per_rank);
  for (Index r = 0; r < field.ranks(); ++r) {
    Rng rng(derive_seed(seed, r));
    const Index extent_size = field.extent(r).size();
    for (Index s = 0; s < per_rank; ++s)
      samples.push_back(RankSample{r, rng.next_below(extent_size)});
  }
  return samples;
}

/// Maps (rank, local) samples back to global indices.
inline std::vector<Index> to_global_indices(
    const PartitionedField& field, std::span<const RankSample> samples) {
  std::vector<Index> indices;
  indices.reserve(samples.size());
  for (const auto& s : samples) {
    const RankExtent& e = field.extent(s.rank);
    if (s.local >= e.size())
      throw std::out_of_range("to_global_indices: local index " +
                              std::to_string(s.local) + " outside rank " +
                              std::to_string(s.rank));
    indices.push_back(e.begin + s.local);
  }
  return indices;
}

/// Values at the given indices, in index-list order. On lazy snapshots the
/// eval counter grows by exactly indices.size(); nothing else is touched.
inline std::vector<double> gather_values(const FieldSnapshot& field,
                                         std::span<const Index> indices) {
  for (Index idx : indices) {
    if (idx >= field.size())
      throw std::out_of_range("gather_values: index " + std::to_string(idx) +
                              " out of range [0, " +
                              std::to_string(field.size()) + ")");
  }
  std::vector<double> values;
  values.reserve(indices.size());
  for (Index idx : indices) values.push_back(field.at(idx));
  return values;
}

}  // namespace qtrig
