#include "bmlmc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmlmc {

std::uint64_t BmlmcConfig::pilot_samples() const noexcept {
  const std::uint64_t last = init_samples.empty() ? 0 : init_samples.back();
  return std::max(last / 2, min_pilot);
}

std::vector<std::string> BmlmcConfig::validate() const {
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw std::invalid_argument("budget must be positive and finite");
  }
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  if (init_samples.empty()) throw std::invalid_argument("init_samples must not be empty");
  for (auto m : init_samples) {
    if (m < 2) throw std::invalid_argument("every initial sample count must be >= 2");
  }
  if (max_level < init_levels()) {
    throw std::invalid_argument("max_level is below the number of initial levels");
  }
  if (!(epsilon_min >= 0.0)) throw std::invalid_argument("epsilon_min must be >= 0");
  if (n_relax < 1) throw std::invalid_argument("n_relax must be >= 1");
  if (min_pilot < 2) throw std::invalid_argument("min_pilot must be >= 2");

  std::vector<std::string> warnings;
  for (std::size_t l = 1; l < init_samples.size(); ++l) {
    if (init_samples[l] >= init_samples[l - 1]) {
      warnings.push_back("initial sample sequence is not decreasing at level " +
                         std::to_string(l));
      break;
    }
  }
  return warnings;
}

void BudgetLedger::charge(double amount) {
  consumed.push_back(amount);
  spent += amount;
  remaining = initial - spent;
}

bool RoundPlan::empty() const noexcept {
  return std::all_of(delta_m.begin(), delta_m.end(), [](auto m) { return m == 0; });
}

RoundPlan plan_round(const MlmcDataset& data, const ErrorEstimate& err,
                     const RateEstimate& rates, double epsilon, const BmlmcConfig& cfg,
                     const LevelCostFn& cost, bool allow_growth) {
  RoundPlan plan;
  plan.target_epsilon = epsilon;
  const int L = data.max_level();
  plan.delta_m.assign(data.num_levels(), 0);

  if (err.err_input >= cfg.theta * epsilon * epsilon) {
    const Allocation alloc = optimal_samples(data, epsilon, cfg.theta);
    for (int l = 0; l <= L; ++l) {
      const std::uint64_t have = data[l].count;
      plan.delta_m[l] = alloc.m_opt[l] > have ? alloc.m_opt[l] - have : 0;
    }
  }
  // The bias test reads Yhat_L. While the top level still lacks samples at this
  // tolerance its mean is mostly noise, so growth waits until it is filled.
  const bool top_settled = plan.delta_m[L] == 0;
  if (err.err_disc >= std::sqrt(1.0 - cfg.theta) * epsilon && top_settled) {
    if (L < cfg.max_level && allow_growth) {
      plan.grow_level = true;
      // Allocate over the extended hierarchy, with V_{L+1} extrapolated by
      // beta_hat, so the round is priced with the work the new level needs.
      std::vector<double> var, c;
      for (int l = 0; l <= L; ++l) {
        var.push_back(sample_variance_y(data[l]));
        c.push_back(cost(l));
      }
      var.push_back(var.back() * std::exp2(-rates.beta));
      c.push_back(cost(L + 1));
      const auto m = continuous_allocation(var, c, epsilon, cfg.theta);
      for (int l = 0; l <= L; ++l) {
        const auto want = static_cast<std::uint64_t>(std::max(1.0, std::ceil(m[l])));
        const std::uint64_t have = data[l].count;
        if (want > have) plan.delta_m[l] = std::max(plan.delta_m[l], want - have);
      }
      const auto want_new = static_cast<std::uint64_t>(std::ceil(m[L + 1]));
      plan.delta_m.push_back(std::max(cfg.pilot_samples(), want_new));
    } else {
      plan.bias_bound = true;
    }
  }
  for (std::size_t l = 0; l < plan.delta_m.size(); ++l) {
    if (plan.delta_m[l] > 0) {
      plan.sample_cost += static_cast<double>(plan.delta_m[l]) * cost(static_cast<int>(l));
    }
  }
  return plan;
}

Decision budget_decision(const RoundPlan& plan, const BudgetLedger& ledger,
                         double epsilon, double eps_prev, double eta, double cheapest) {
  if (!ledger.affords(cheapest)) return {DecisionKind::stop, epsilon};
  if (plan.predicted_cost == 0.0) return {DecisionKind::tighten, eta * epsilon};
  if (!ledger.affords(plan.predicted_cost)) {
    return {DecisionKind::relax, 0.5 * (epsilon + eps_prev)};
  }
  return {DecisionKind::proceed, epsilon};
}

ExecutionResult execute_round(const RoundPlan& plan, const MlmcDataset& data,
                              const SampleProblem& model, const ExecutionSetup& exec,
                              std::uint64_t master_seed, int round) {
  std::vector<std::uint64_t> first(plan.delta_m.size(), 0);
  for (std::size_t l = 0; l < first.size() && l < data.num_levels(); ++l) {
    first[l] = data.levels[l].count;
  }
  const SchedulePlan schedule = build_plan(exec.p_size, plan.delta_m, first, master_seed);
  return execute(schedule, model, exec.scheduler, round, exec.trace);
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::infeasible_init: return "infeasible_init";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

std::string to_string(DecisionKind k) {
  switch (k) {
    case DecisionKind::proceed: return "proceed";
    case DecisionKind::relax: return "relax";
    case DecisionKind::tighten: return "tighten";
    case DecisionKind::stop: return "stop";
  }
  return "unknown";
}

namespace {

std::vector<std::uint64_t> counts_of(const MlmcDataset& data) {
  std::vector<std::uint64_t> c;
  for (const auto& acc : data.levels) c.push_back(acc.count);
  return c;
}

}  // namespace

RunReport run(const BmlmcConfig& cfg, const SampleProblem& model,
              const ExecutionSetup& exec, const RoundCallback& on_round) {
  RunReport report;
  report.warnings = cfg.validate();
  report.ledger = BudgetLedger(cfg.budget);
  if (cfg.cost_mode == CostMode::modeled && !model.modeled_cost(0)) {
    throw std::invalid_argument("model '" + model.name() +
                                "' has no modeled cost; use measured cost mode");
  }

  RateFitOptions fit_opts;
  fit_opts.fallback_gamma = model.descriptor().spatial_dimension + 1.0;

  MlmcDataset& data = report.data;
  RateEstimate rates;

  auto level_cost = [&](int l) -> double {
    if (cfg.cost_mode == CostMode::modeled) return *model.modeled_cost(l);
    if (l < static_cast<int>(data.num_levels()) && data.levels[l].count > 0) {
      return data.levels[l].mean_cost;
    }
    // Extrapolate from the top measured level.
    const int top = data.max_level();
    return data.levels[top].mean_cost * std::exp2(rates.gamma * (l - top));
  };
  auto price = [&](const std::vector<std::uint64_t>& delta_m) {
    const SchedulePlan schedule = build_plan(exec.p_size, delta_m);
    return price_plan(schedule, level_cost, exec.scheduler);
  };

  auto record_round = [&](int round, double epsilon, bool grew, double predicted,
                          const CostRecord& cost, int relax, int tighten) {
    RoundRecord rec;
    rec.round = round;
    rec.epsilon = epsilon;
    rec.max_level = data.max_level();
    rec.counts = counts_of(data);
    rec.error = report.error;
    rec.rates = rates;
    rec.grew = grew;
    rec.predicted = predicted;
    rec.consumed = report.ledger.consumed.back();
    rec.remaining = report.ledger.remaining;
    rec.span = cost.span();
    rec.idle = cost.idle();
    rec.comm = cost.comm();
    rec.relaxations = relax;
    rec.tightenings = tighten;
    report.total_span += rec.span;
    report.total_idle += rec.idle;
    report.total_comm += rec.comm;
    report.total_sync += cost.sync;
    report.rounds.push_back(rec);
    if (on_round) on_round(rec);
  };

  auto refresh = [&] {
    rates = fit_rates(data, fit_opts);
    report.rates = rates;
    report.error = estimate_mse(data, rates);
    report.estimate = data.estimate();
  };

  // Initial round over levels L0..0.
  RoundPlan init;
  init.delta_m = cfg.init_samples;
  double init_price = 0.0;
  if (cfg.cost_mode == CostMode::modeled) {
    init_price = price(init.delta_m).consumed();
    if (!report.ledger.affords(init_price)) {
      report.status = RunStatus::infeasible_init;
      report.stop_reason = "budget " + std::to_string(cfg.budget) +
                           " is below the initial round cost " + std::to_string(init_price);
      return report;
    }
  }
  init.predicted_cost = init_price;

  int round = 0;
  try {
    ExecutionResult res = execute_round(init, data, model, exec, cfg.master_seed, round);
    data = merge_datasets(data, res.delta);
    data.round = round;
    report.ledger.charge(res.cost.consumed());
    refresh();
    record_round(round, report.error.err_rmse, false, init_price, res.cost, 0, 0);
  } catch (const NonFiniteSample& e) {
    report.status = RunStatus::diverged;
    report.failure = e.what();
    report.stop_reason = "diverged sample in the initial round";
    return report;
  } catch (const SampleFailure& e) {
    report.status = RunStatus::diverged;
    report.failure = e.what();
    report.stop_reason = "failed sample in the initial round";
    return report;
  }
  if (report.ledger.overshoot() > 0.0) {
    report.status = RunStatus::infeasible_init;
    report.stop_reason = "initial round overshot the budget";
    return report;
  }

  double eps_prev = report.error.err_rmse;
  double epsilon = cfg.eta * eps_prev;
  int relaxations = 0, tightenings = 0;
  const double cheapest = price({1}).consumed();

  for (;;) {
    if (cfg.epsilon_min > 0.0 && report.error.err_rmse <= cfg.epsilon_min) {
      report.stop_reason = "epsilon_min reached";
      break;
    }
    RoundPlan plan = plan_round(data, report.error, rates, epsilon, cfg, level_cost);
    plan.predicted_cost = plan.empty() ? 0.0 : price(plan.delta_m).consumed();
    if (plan.grow_level && !report.ledger.affords(plan.predicted_cost)) {
      // The new level cannot be funded: fall back to the variance branch alone,
      // as when max_level is reached. An empty fallback tightens epsilon.
      RoundPlan capped =
          plan_round(data, report.error, rates, epsilon, cfg, level_cost, false);
      capped.predicted_cost = capped.empty() ? 0.0 : price(capped.delta_m).consumed();
      plan = std::move(capped);
    }
    report.bias_bound = report.bias_bound || plan.bias_bound;

    const Decision d =
        budget_decision(plan, report.ledger, epsilon, eps_prev, cfg.eta, cheapest);
    if (d.kind == DecisionKind::stop) {
      report.stop_reason = "remaining budget below the cheapest unit of work";
      break;
    }
    if (d.kind != DecisionKind::proceed) {
      if (relaxations + tightenings >= cfg.n_relax) {
        report.stop_reason = "no affordable plan after " + std::to_string(cfg.n_relax) +
                             " consecutive epsilon updates";
        break;
      }
      if (d.kind == DecisionKind::tighten) {
        eps_prev = epsilon;
        ++tightenings;
      } else {
        ++relaxations;
      }
      epsilon = d.epsilon;
      continue;
    }

    ++round;
    try {
      ExecutionResult res = execute_round(plan, data, model, exec, cfg.master_seed, round);
      data = merge_datasets(data, res.delta);
      data.round = round;
      report.ledger.charge(res.cost.consumed());
      refresh();
      record_round(round, epsilon, plan.grow_level, plan.predicted_cost, res.cost,
                   relaxations, tightenings);
    } catch (const NonFiniteSample& e) {
      report.status = RunStatus::diverged;
      report.failure = e.what();
      report.stop_reason = "diverged sample in round " + std::to_string(round);
      break;
    } catch (const SampleFailure& e) {
      report.status = RunStatus::diverged;
      report.failure = e.what();
      report.stop_reason = "failed sample in round " + std::to_string(round);
      break;
    }
    relaxations = tightenings = 0;
    if (report.ledger.overshoot() > 0.0) {
      report.stop_reason = "budget overshoot in measured mode";
      break;
    }
  }
  report.final_epsilon = epsilon;
  return report;
}

}  // namespace bmlmc
