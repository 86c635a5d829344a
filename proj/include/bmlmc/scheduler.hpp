#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmlmc/models/sample_problem.hpp"
#include "bmlmc/stats.hpp"

namespace bmlmc {

/// Number of processing units; must be a power of two.
class ProcessorSet {
 public:
  explicit ProcessorSet(int size);
  int size() const noexcept { return size_; }

 private:
  int size_;
};

/// Largest k with 2^k <= p / m, i.e. 2^k <= p/m < 2^{k+1}; 0 when m >= p.
int split_exponent(int p_size, std::uint64_t m);

/// One sample bound to a disjoint block of 2^k consecutive units.
struct SampleGroup {
  int group_id = 0;    // position within its wave
  int first_unit = 0;  // units [first_unit, first_unit + units)
  int units = 1;
  int level = 0;
  std::uint64_t ordinal = 0;  // global sample index on the level
  std::uint64_t seed = 0;
};

/// A run of identical waves: `waves` waves, each with `groups` groups of
/// 2^k units.
struct WaveBatch {
  int k = 0;
  int groups = 0;
  std::uint64_t waves = 0;

  std::uint64_t samples() const noexcept { return waves * static_cast<std::uint64_t>(groups); }
};

/// Waves of one level. Full waves of p singleton groups come first, followed
/// by at most one regrouped tail wave, so two batches always suffice.
struct LevelSchedule {
  int level = 0;
  std::uint64_t count = 0;
  std::uint64_t first_ordinal = 0;  // samples already taken on this level
  std::vector<WaveBatch> batches;

  std::uint64_t wave_count() const noexcept;
};

struct SchedulePlan {
  int p_size = 1;
  std::uint64_t master_seed = 0;
  std::vector<LevelSchedule> levels;  // descending level order

  bool empty() const noexcept { return levels.empty(); }
  std::uint64_t total_samples() const noexcept;

  /// Explicit groups of every wave of `levels[index]`.
  std::vector<std::vector<SampleGroup>> expand(std::size_t index) const;
};

/// Builds the plan for ΔM (indexed by level). `first_ordinal[l]` is the number
/// of samples already drawn on level l, so seeds never repeat across rounds.
SchedulePlan build_plan(int p_size, const std::vector<std::uint64_t>& delta_m,
                        const std::vector<std::uint64_t>& first_ordinal = {},
                        std::uint64_t master_seed = 0);

/// Wall time of one sample of serial cost c on 2^k units: c / 2^{k sigma}.
double group_time(double cost, int k, double sigma_eff);

struct LevelCost {
  int level = 0;
  std::uint64_t samples = 0;
  std::uint64_t waves = 0;
  double sample_cost = 0.0;  // sum of serial per-sample costs
  double span = 0.0;         // sum over waves of the slowest group
  double busy = 0.0;         // unit-time spent inside groups (incl. comm loss)
  double idle = 0.0;         // unit-time of waiting units
  double comm = 0.0;         // busy - sample_cost
};

/// Cost bookkeeping of one executed (or priced) round.
struct CostRecord {
  int p_size = 1;
  double sync = 0.0;  // wall time of the round-end synchronization
  std::vector<LevelCost> levels;

  double span() const noexcept;
  double busy() const noexcept;
  double idle() const noexcept;
  double comm() const noexcept;
  double sample_cost() const noexcept;
  /// Budget drawn by the round: p * (span + sync).
  double consumed() const noexcept;
};

struct SchedulerOptions {
  double sigma_eff = 0.9;
  double sync_time = 0.0;
  int workers = 1;            // evaluation threads; never changes the results
  bool measure_cost = false;  // replace model costs by thread CPU seconds
};

/// Prices a plan analytically when every sample on level l costs cost(l).
CostRecord price_plan(const SchedulePlan& plan,
                      const std::function<double(int)>& cost,
                      const SchedulerOptions& opts);

struct TraceRow {
  int round = 0;
  int level = 0;
  std::uint64_t wave = 0;
  int group = 0;
  int units = 1;
  std::uint64_t ordinal = 0;
  std::uint64_t seed = 0;
  double cost = 0.0;
};
using TraceSink = std::function<void(const TraceRow&)>;

/// A sample threw or returned a non-finite value; identifies the sample.
class SampleFailure : public std::runtime_error {
 public:
  SampleFailure(int level, std::uint64_t ordinal, std::uint64_t seed,
                const std::string& what);

  int level() const noexcept { return level_; }
  std::uint64_t ordinal() const noexcept { return ordinal_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  int level_;
  std::uint64_t ordinal_;
  std::uint64_t seed_;
};

struct ExecutionResult {
  MlmcDataset delta;
  CostRecord cost;
};

/// Evaluates every sample of the plan once and reduces the results in a fixed
/// order, so the statistics do not depend on opts.workers.
ExecutionResult execute(const SchedulePlan& plan, const SampleProblem& model,
                        const SchedulerOptions& opts, int round = 0,
                        const TraceSink& trace = {});

struct ScalingPoint {
  double k = 0.0;
  double rmse = 0.0;
};

struct ScalingFit {
  double err_s = 0.0;
  double err_p = 0.0;
  double delta = 0.0;
  double residual = 0.0;  // sum of squared residuals
  bool delta_defined = true;
};

/// Least squares fit of rmse_k = err_s + err_p 2^{k delta} with err_s,
/// err_p >= 0 and delta > 0. Requires three or more distinct k.
ScalingFit fit_weak_scaling(const std::vector<ScalingPoint>& points);

}  // namespace bmlmc
