#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bmlmc/estimator.hpp"
#include "bmlmc/models/sample_problem.hpp"
#include "bmlmc/scheduler.hpp"
#include "bmlmc/stats.hpp"

namespace bmlmc {

enum class CostMode { modeled, measured };

struct BmlmcConfig {
  double budget = 0.0;  // B = |P| * T_B in cost units
  double theta = 0.5;
  double eta = 0.9;
  std::vector<std::uint64_t> init_samples{4096, 1024, 128, 32};
  int max_level = 10;
  double epsilon_min = 0.0;  // 0 runs until the budget is spent
  CostMode cost_mode = CostMode::modeled;
  std::uint64_t master_seed = 0;
  int n_relax = 25;                // consecutive non-executing decisions before Stop
  std::uint64_t min_pilot = 8;     // lower bound of the new-level pilot count

  int init_levels() const noexcept { return static_cast<int>(init_samples.size()) - 1; }
  std::uint64_t pilot_samples() const noexcept;
  /// Throws std::invalid_argument; returns warnings (e.g. a non-decreasing
  /// initial sequence).
  std::vector<std::string> validate() const;
  friend bool operator==(const BmlmcConfig&, const BmlmcConfig&) = default;
};

/// Budget bookkeeping. Affordability is tested as spent + cost <= initial,
/// the same sum that later becomes `spent`, so a passed test can never end
/// above the budget through rounding.
struct BudgetLedger {
  double initial = 0.0;
  double spent = 0.0;
  double remaining = 0.0;  // initial - spent
  std::vector<double> consumed;

  explicit BudgetLedger(double budget = 0.0) : initial(budget), remaining(budget) {}
  void charge(double amount);
  bool affords(double amount) const noexcept { return spent + amount <= initial; }
  double overshoot() const noexcept { return spent > initial ? spent - initial : 0.0; }
};

struct RoundPlan {
  double target_epsilon = 0.0;
  std::vector<std::uint64_t> delta_m;  // indexed by level, may include L+1
  bool grow_level = false;
  bool bias_bound = false;       // wanted to grow but max_level is reached
  double sample_cost = 0.0;      // sum_l ΔM_l Chat_l
  double predicted_cost = 0.0;   // scheduler price, including losses and sync

  bool empty() const noexcept;
};

/// Per-level mean cost used for planning: the model's modeled cost when the
/// config asks for it, otherwise the measured Chat_l, extrapolated with
/// gamma_hat for a level that has no samples yet.
using LevelCostFn = std::function<double(int)>;

/// Variance test re-allocates samples; bias test grows L once the top level
/// holds its allocation. A growth round allocates over levels 0..L+1 with the
/// new level's variance extrapolated by beta_hat, and never gives the new level
/// fewer than the pilot count. With `allow_growth` false the bias test only
/// sets bias_bound, as at max_level. Fills sample_cost from `cost`;
/// predicted_cost is left to the caller, which prices the plan on its
/// processor set.
RoundPlan plan_round(const MlmcDataset& data, const ErrorEstimate& err,
                     const RateEstimate& rates, double epsilon, const BmlmcConfig& cfg,
                     const LevelCostFn& cost, bool allow_growth = true);

enum class DecisionKind { proceed, relax, tighten, stop };

struct Decision {
  DecisionKind kind = DecisionKind::proceed;
  double epsilon = 0.0;  // next target for relax/tighten
};

/// `cheapest` is the price of the smallest unit of work (one level-0 sample).
Decision budget_decision(const RoundPlan& plan, const BudgetLedger& ledger,
                         double epsilon, double eps_prev, double eta,
                         double cheapest);

struct ExecutionSetup {
  int p_size = 1;
  SchedulerOptions scheduler;
  TraceSink trace;
};

/// Runs the plan's samples, descending in level.
ExecutionResult execute_round(const RoundPlan& plan, const MlmcDataset& data,
                              const SampleProblem& model, const ExecutionSetup& exec,
                              std::uint64_t master_seed, int round);

enum class RunStatus { completed, infeasible_init, diverged };

std::string to_string(RunStatus s);
std::string to_string(DecisionKind k);

struct RoundRecord {
  int round = 0;
  double epsilon = 0.0;
  int max_level = 0;
  std::vector<std::uint64_t> counts;  // M_l after the round
  ErrorEstimate error;
  RateEstimate rates;
  bool grew = false;
  double predicted = 0.0;
  double consumed = 0.0;
  double remaining = 0.0;
  double span = 0.0;
  double idle = 0.0;
  double comm = 0.0;
  int relaxations = 0;  // decisions taken since the previous executed round
  int tightenings = 0;
};

struct RunReport {
  RunStatus status = RunStatus::completed;
  std::string stop_reason;
  std::string failure;  // diagnostic of an aborted round
  MlmcDataset data;
  RateEstimate rates;
  ErrorEstimate error;
  double estimate = 0.0;
  double final_epsilon = 0.0;
  BudgetLedger ledger;
  std::vector<RoundRecord> rounds;
  bool bias_bound = false;
  double total_span = 0.0;
  double total_idle = 0.0;
  double total_comm = 0.0;
  double total_sync = 0.0;
  std::vector<std::string> warnings;
};

using RoundCallback = std::function<void(const RoundRecord&)>;

/// Budgeted MLMC: init round over levels L0..0, then estimate, plan, check the
/// budget, execute and merge until the budget cannot fund further work.
RunReport run(const BmlmcConfig& cfg, const SampleProblem& model,
              const ExecutionSetup& exec, const RoundCallback& on_round = {});

}  // namespace bmlmc
