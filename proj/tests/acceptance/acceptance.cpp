// Acceptance suite: one line per criterion, tolerances pinned below.
//
//   acceptance            run every criterion
//   acceptance --only 3   run selected criteria (repeatable)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmlmc/cli/config.hpp"
#include "bmlmc/cli/experiments.hpp"
#include "bmlmc/controller.hpp"
#include "bmlmc/estimator.hpp"
#include "bmlmc/models/acoustic_dg.hpp"
#include "bmlmc/models/gaussian_field.hpp"
#include "bmlmc/models/synthetic.hpp"
#include "bmlmc/models/wave1d.hpp"
#include "bmlmc/scheduler.hpp"
#include "bmlmc/stats.hpp"

using namespace bmlmc;

namespace {

// ---- pinned tolerances -----------------------------------------------------

constexpr int kWelfordTrials = 200;
constexpr std::size_t kWelfordMaxPoints = 100000;
constexpr double kWelfordMeanTol = 1e-12;
constexpr double kWelfordS2Tol = 1e-10;

constexpr int kAllocInstances = 100;
constexpr double kAllocObjectiveTol = 0.005;

constexpr int kSlopeSeeds = 5;
constexpr double kSlopeTolBetaGtGamma = 0.1;
constexpr double kSlopeTolBetaLtGamma = 0.05;

constexpr double kFeasibleFraction = 0.9;
constexpr double kFeasibleInitMultiple = 10.0;

constexpr double kRateTol = 0.10;

constexpr double kScalingTimeBudget = 1e6;  // T_B per unit
constexpr double kScalingSyncFraction = 0.04;
constexpr int kScalingPSize = 16;
constexpr int kScalingKMax = 5;
constexpr int kScalingSeeds = 10;
constexpr double kScalingDeltaTol = 0.15;
constexpr double kScalingNoiseFactor = 2.0;

constexpr double kMinOrder = 1.5;
constexpr double kEnergyGrowthTol = 1e-10;

constexpr int kFieldSamples = 10000;
constexpr int kFieldCells = 256;
constexpr double kFieldStdErrors = 3.0;

constexpr double kWaveBudget = 150.0;

// ---- helpers ---------------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(long double got, long double want) {
  const long double scale = std::max<long double>(std::fabs(want), 1e-300L);
  return static_cast<double>(std::fabs(got - want) / scale);
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

cli::RunConfig synthetic_config(double alpha, double beta, double gamma, double budget,
                                std::uint64_t seed) {
  cli::RunConfig cfg;
  cfg.model = cli::ModelKind::synthetic;
  cfg.synthetic.alpha = alpha;
  cfg.synthetic.beta = beta;
  cfg.synthetic.gamma = gamma;
  cfg.bmlmc.budget = budget;
  cfg.bmlmc.master_seed = seed;
  return cfg;
}

// ---- 1: Welford merge vs two-pass batch -------------------------------------

Outcome welford() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> expo(-3.0, 6.0);
  std::uniform_int_distribution<std::size_t> size_dist(2, kWelfordMaxPoints);
  double worst_mean = 0.0, worst_s2 = 0.0;
  bool counts_ok = true;

  for (int trial = 0; trial < kWelfordTrials; ++trial) {
    const std::size_t n = size_dist(rng);
    std::vector<double> qf(n), qc(n), cost(n);
    for (std::size_t i = 0; i < n; ++i) {
      qf[i] = std::pow(10.0, expo(rng));
      qc[i] = std::pow(10.0, expo(rng));
      cost[i] = std::pow(10.0, expo(rng));
    }

    // Random partition into contiguous groups, merged in shuffled order.
    const std::size_t groups = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    std::vector<std::size_t> cuts{0, n};
    for (std::size_t g = 1; g < groups; ++g) {
      cuts.push_back(std::uniform_int_distribution<std::size_t>(0, n)(rng));
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<LevelAccumulator> parts;
    for (std::size_t g = 0; g + 1 < cuts.size(); ++g) {
      LevelAccumulator acc;
      acc.level = 1;
      for (std::size_t i = cuts[g]; i < cuts[g + 1]; ++i) {
        acc = accumulate(acc, qf[i], qc[i], cost[i]);
      }
      parts.push_back(acc);
    }
    std::shuffle(parts.begin(), parts.end(), rng);
    LevelAccumulator merged;
    merged.level = 1;
    for (const auto& p : parts) merged = merge(merged, p);

    // Two-pass oracle in long double.
    long double sq = 0, sy = 0, sc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sq += qf[i];
      sy += static_cast<long double>(qf[i]) - qc[i];
      sc += cost[i];
    }
    const long double mq = sq / n, my = sy / n, mc = sc / n;
    long double s2q = 0, s2y = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double dq = qf[i] - mq;
      const long double dy = (static_cast<long double>(qf[i]) - qc[i]) - my;
      s2q += dq * dq;
      s2y += dy * dy;
    }

    counts_ok = counts_ok && merged.count == n;
    worst_mean = std::max({worst_mean, rel_err(merged.mean_q, mq), rel_err(merged.mean_y, my),
                           rel_err(merged.mean_cost, mc), rel_err(merged.total_cost, sc)});
    worst_s2 = std::max({worst_s2, rel_err(merged.s2_q, s2q), rel_err(merged.s2_y, s2y)});
  }
  return {counts_ok && worst_mean <= kWelfordMeanTol && worst_s2 <= kWelfordS2Tol,
          fmt("worst rel err: means %.2e (tol %.0e), S2 %.2e (tol %.0e)%s", worst_mean,
              kWelfordMeanTol, worst_s2, kWelfordS2Tol, counts_ok ? "" : ", COUNT MISMATCH")};
}

// ---- 2: allocation vs a Lagrange-bisection minimizer -----------------------

// Minimizes sum M_l C_l subject to sum V_l / M_l = target by bisection on the
// multiplier mu, M_l(mu) = sqrt(mu V_l / C_l).
double bisection_minimum(const std::vector<double>& v, const std::vector<double>& c,
                         double target) {
  auto constraint = [&](double log_mu) {
    double s = 0.0;
    for (std::size_t l = 0; l < v.size(); ++l) {
      s += v[l] / std::sqrt(std::exp(log_mu) * v[l] / c[l]);
    }
    return s;
  };
  double lo = -200.0, hi = 200.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (constraint(mid) > target ? lo : hi) = mid;
  }
  const double mu = std::exp(0.5 * (lo + hi));
  double obj = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l) obj += std::sqrt(mu * v[l] / c[l]) * c[l];
  return obj;
}

Outcome allocation() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + u(rng) * (std::log(hi) - std::log(lo)));
  };
  double worst_gap = 0.0, worst_constraint = 0.0;
  bool never_below = true, random_feasible_ok = true;
  for (int inst = 0; inst < kAllocInstances; ++inst) {
    const int levels = 1 + static_cast<int>(u(rng) * 4.0);  // L <= 3
    const double eps = log_uniform(1e-5, 1e-3);
    const double theta = 0.2 + 0.6 * u(rng);
    std::vector<double> v(levels), c(levels);
    MlmcDataset data;
    for (int l = 0; l < levels; ++l) {
      v[l] = log_uniform(1e-3, 1e3);
      c[l] = log_uniform(1e-3, 1e3);
      LevelAccumulator& acc = data.at_level(l);
      acc.level = l;
      acc.count = 2;
      acc.s2_y = v[l];  // s^2 = S2 / (M - 1)
      acc.mean_cost = c[l];
      acc.total_cost = 2.0 * c[l];
    }
    const Allocation alloc = optimal_samples(data, eps, theta);
    const double target = theta * eps * eps;
    double obj = 0.0, constraint = 0.0;
    for (int l = 0; l < levels; ++l) {
      obj += static_cast<double>(alloc.m_opt[l]) * c[l];
      constraint += v[l] / static_cast<double>(alloc.m_opt[l]);
    }
    const double best = bisection_minimum(v, c, target);
    worst_gap = std::max(worst_gap, (obj - best) / best);
    never_below = never_below && obj >= best * (1.0 - 1e-9);
    worst_constraint = std::max(worst_constraint, constraint / target);

    // No feasible random allocation beats the oracle.
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> m(levels);
      double s = 0.0;
      for (int l = 0; l < levels; ++l) {
        m[l] = log_uniform(1.0, 1e12);
        s += v[l] / m[l];
      }
      double o = 0.0;
      for (int l = 0; l < levels; ++l) o += m[l] * (s / target) * c[l];
      random_feasible_ok = random_feasible_ok && o >= best * (1.0 - 1e-9);
    }
  }
  const bool ok = worst_gap <= kAllocObjectiveTol && never_below && random_feasible_ok &&
                  worst_constraint <= 1.0 + 1e-12;
  return {ok, fmt("worst objective gap %.3e (tol %.3f), max sum V/M / theta eps^2 = %.12f%s",
                  worst_gap, kAllocObjectiveTol, worst_constraint,
                  random_feasible_ok ? "" : ", random point beat the oracle")};
}

// ---- 3: load-distribution rule ---------------------------------------------

Outcome scheduler_rule() {
  std::uint64_t checked = 0;
  std::string failure;
  for (int j = 0; j <= 10 && failure.empty(); ++j) {
    const int p = 1 << j;
    for (std::uint64_t m = 1; m <= 4096 && failure.empty(); ++m) {
      const int k = split_exponent(p, m);
      const bool rule = m <= static_cast<std::uint64_t>(p)
                            ? ((m << k) <= static_cast<std::uint64_t>(p) &&
                               static_cast<std::uint64_t>(p) < (m << (k + 1)))
                            : k == 0;
      if (!rule) failure = fmt("split_exponent(%d, %llu) = %d", p, (unsigned long long)m, k);

      const SchedulePlan plan = build_plan(p, {m});
      std::vector<int> seen(m, 0);
      for (std::size_t li = 0; li < plan.levels.size(); ++li) {
        for (const auto& wave : plan.expand(li)) {
          std::vector<char> used(p, 0);
          const int units = wave.empty() ? 0 : wave.front().units;
          for (const auto& g : wave) {
            if (g.units != units || (g.units & (g.units - 1)) != 0) {
              failure = fmt("p=%d m=%llu: unequal or non power-of-two group", p,
                            (unsigned long long)m);
            }
            for (int q = g.first_unit; q < g.first_unit + g.units; ++q) {
              if (q < 0 || q >= p || used[q]++) {
                failure = fmt("p=%d m=%llu: overlapping groups", p, (unsigned long long)m);
              }
            }
            if (g.ordinal >= m) failure = "ordinal out of range";
            else ++seen[g.ordinal];
          }
        }
      }
      if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
        failure = fmt("p=%d m=%llu: samples not covered exactly once", p, (unsigned long long)m);
      }
      ++checked;
    }
  }

  // Figure triples.
  const bool triples =
      split_exponent(4, 1) == 2 && split_exponent(4, 2) == 1 && split_exponent(4, 4) == 0;

  // Delta M = {16, 2, 1} on 4 units: level 2 on all four units, level 1 as two
  // pairs, level 0 as four waves of singletons.
  const SchedulePlan fig = build_plan(4, {16, 2, 1});
  auto shape = [&](std::size_t li) {
    std::vector<std::pair<std::size_t, int>> out;  // (groups, units) per wave
    for (const auto& w : fig.expand(li)) out.emplace_back(w.size(), w.front().units);
    return out;
  };
  using Shape = std::vector<std::pair<std::size_t, int>>;
  const bool waves = fig.levels.size() == 3 && fig.levels[0].level == 2 &&
                     fig.levels[1].level == 1 && fig.levels[2].level == 0 &&
                     shape(0) == Shape{{1, 4}} && shape(1) == Shape{{2, 2}} &&
                     shape(2) == Shape{{4, 1}, {4, 1}, {4, 1}, {4, 1}};
  // Unit costs: phases of 1/4^0.9, 1/2^0.9 and 4.
  SchedulerOptions opts;
  const CostRecord rec = price_plan(fig, [](int) { return 1.0; }, opts);
  const bool timeline = rec.levels.size() == 3 &&
                        std::abs(rec.levels[0].span - std::pow(4.0, -0.9)) < 1e-15 &&
                        std::abs(rec.levels[1].span - std::pow(2.0, -0.9)) < 1e-15 &&
                        std::abs(rec.levels[2].span - 4.0) < 1e-15;

  const bool ok = failure.empty() && triples && waves && timeline;
  return {ok, fmt("%llu (p, M) pairs checked%s%s; triples %s; {16,2,1} waves %s, timeline %s",
                  (unsigned long long)checked, failure.empty() ? "" : ": ", failure.c_str(),
                  triples ? "ok" : "WRONG", waves ? "ok" : "WRONG",
                  timeline ? "ok" : "WRONG")};
}

// ---- 4, 5, 6: synthetic slopes and feasibility -----------------------------

struct SlopeRun {
  double budget = 0.0;
  std::uint64_t seed = 0;
  RunReport report;
};

std::vector<double> slope_budgets() {
  std::vector<double> b;
  for (int i = 0; i <= 6; ++i) b.push_back(1e7 * std::pow(10.0, 0.5 * i));
  return b;
}

std::vector<SlopeRun> slope_runs(double alpha, double beta, double gamma) {
  std::vector<SlopeRun> out;
  for (double b : slope_budgets()) {
    for (int s = 1; s <= kSlopeSeeds; ++s) {
      const auto cfg = synthetic_config(alpha, beta, gamma, b, static_cast<std::uint64_t>(s));
      out.push_back({b, static_cast<std::uint64_t>(s), cli::run_experiment(cfg, false).report});
    }
  }
  return out;
}

const std::vector<SlopeRun>& runs_beta_gt_gamma() {
  static const auto runs = slope_runs(2.0, 4.0, 3.0);
  return runs;
}
const std::vector<SlopeRun>& runs_beta_lt_gamma() {
  static const auto runs = slope_runs(1.0, 0.5, 3.0);
  return runs;
}

double fitted_slope(const std::vector<SlopeRun>& runs, bool& all_completed) {
  std::vector<double> x, y;
  all_completed = true;
  for (const auto& r : runs) {
    all_completed = all_completed && r.report.status == RunStatus::completed;
    x.push_back(std::log(r.budget));
    y.push_back(std::log(r.report.error.err_rmse));
  }
  return slope_of(x, y);
}

Outcome slope_beta_gt_gamma() {
  bool done = false;
  const double s = fitted_slope(runs_beta_gt_gamma(), done);
  const double target = -theoretical_delta(2.0, 4.0, 3.0).delta;
  return {done && std::abs(s - target) <= kSlopeTolBetaGtGamma,
          fmt("slope %.4f, target %.4f +- %.2f, %d budgets x %d seeds", s, target,
              kSlopeTolBetaGtGamma, (int)slope_budgets().size(), kSlopeSeeds)};
}

Outcome slope_beta_lt_gamma() {
  bool done = false;
  const double s = fitted_slope(runs_beta_lt_gamma(), done);
  const double target = -theoretical_delta(1.0, 0.5, 3.0).delta;  // -1/4.5
  return {done && std::abs(s - target) <= kSlopeTolBetaLtGamma,
          fmt("slope %.4f, target -alpha/(2 alpha + gamma - beta) = %.4f +- %.2f "
              "(distance to the quoted -0.2857: %.4f)",
              s, target, kSlopeTolBetaLtGamma, std::abs(s + 0.2857))};
}

Outcome feasibility() {
  int runs = 0, checked_full = 0;
  double worst_over = 0.0, worst_fraction = 1.0;
  bool ok = true;
  for (const auto* set : {&runs_beta_gt_gamma(), &runs_beta_lt_gamma()}) {
    for (const auto& r : *set) {
      ++runs;
      const BudgetLedger& l = r.report.ledger;
      if (l.spent > r.budget) {
        ok = false;
        worst_over = std::max(worst_over, l.spent - r.budget);
      }
      const double init_cost = r.report.rounds.front().consumed;
      if (r.budget >= kFeasibleInitMultiple * init_cost) {
        ++checked_full;
        const double frac = l.spent / r.budget;
        worst_fraction = std::min(worst_fraction, frac);
        ok = ok && frac >= kFeasibleFraction;
      }
    }
  }
  return {ok, fmt("%d runs, none above B (max excess %.3g); %d runs with B >= %gx init, "
                  "lowest consumed fraction %.4f (min %.2f)",
                  runs, worst_over, checked_full, kFeasibleInitMultiple, worst_fraction,
                  kFeasibleFraction)};
}

// ---- 7: rate recovery after the initial round ------------------------------

Outcome rate_recovery() {
  const SyntheticModel model(SyntheticSpec{});
  double worst = 0.0;
  for (int s = 1; s <= kSlopeSeeds; ++s) {
    auto cfg = synthetic_config(2.0, 4.0, 3.0, 0.0, static_cast<std::uint64_t>(s));
    // Budget of exactly the initial round.
    double init = 0.0;
    for (std::size_t l = 0; l < cfg.bmlmc.init_samples.size(); ++l) {
      init += static_cast<double>(cfg.bmlmc.init_samples[l]) * model.cost(static_cast<int>(l));
    }
    cfg.bmlmc.budget = init;
    const RunReport r = cli::run_experiment(cfg, false).report;
    const RateEstimate& e = r.rounds.front().rates;
    worst = std::max({worst, std::abs(e.alpha - 2.0) / 2.0, std::abs(e.beta - 4.0) / 4.0,
                      std::abs(e.gamma - 3.0) / 3.0});
  }
  return {worst <= kRateTol,
          fmt("worst relative rate error over %d seeds: %.4f (tol %.2f)", kSlopeSeeds, worst,
              kRateTol)};
}

// ---- 8: weak scaling --------------------------------------------------------

Outcome weak_scaling() {
  const int ks = kScalingKMax + 1;
  std::vector<std::vector<double>> rmse(ks);
  bool done = true;
  for (int s = 1; s <= kScalingSeeds; ++s) {
    auto cfg = synthetic_config(2.0, 4.0, 3.0, kScalingTimeBudget * kScalingPSize,
                                static_cast<std::uint64_t>(s));
    cfg.p_size = kScalingPSize;
    cfg.sigma_eff = 0.9;
    cfg.sync_time = kScalingSyncFraction * kScalingTimeBudget;
    const auto res = cli::weak_scaling(cfg, kScalingKMax, false);
    done = done && !res.partial;
    for (const auto& row : res.rows) rmse[row.k].push_back(row.report.error.err_rmse);
  }
  std::vector<double> mean(ks), se(ks);
  for (int k = 0; k < ks; ++k) {
    const double n = static_cast<double>(rmse[k].size());
    mean[k] = std::accumulate(rmse[k].begin(), rmse[k].end(), 0.0) / n;
    double ss = 0.0;
    for (double r : rmse[k]) ss += (r - mean[k]) * (r - mean[k]);
    se[k] = std::sqrt(ss / (n - 1.0) / n);
  }
  bool monotone = true;
  for (int k = 0; k + 1 < ks; ++k) {
    const double noise = std::sqrt(se[k] * se[k] + se[k + 1] * se[k + 1]);
    monotone = monotone && mean[k + 1] <= mean[k] + kScalingNoiseFactor * noise;
  }
  std::vector<ScalingPoint> pts;
  for (int k = 0; k < ks; ++k) pts.push_back({static_cast<double>(kScalingKMax - k), mean[k]});
  const ScalingFit fit = fit_weak_scaling(pts);
  const double target = theoretical_delta(2.0, 4.0, 3.0).delta;
  const bool ok = done && monotone && fit.delta_defined &&
                  std::abs(fit.delta - target) <= kScalingDeltaTol && fit.err_s > 0.0;
  std::ostringstream curve;
  for (int k = 0; k < ks; ++k) curve << (k ? " " : "") << fmt("%.3e", mean[k]);
  return {ok, fmt("mean rmse p=16..512: [%s]; %s; delta %.4f (target %.2f +- %.2f), "
                  "err_s %.3e, err_p %.3e",
                  curve.str().c_str(), monotone ? "non-increasing" : "NOT non-increasing",
                  fit.delta, target, kScalingDeltaTol, fit.err_s, fit.err_p)};
}

// ---- 9: deterministic wave solver ------------------------------------------

// Manufactured solution v = sin(pi x) s(t), p = cos(pi x) r(t) with rho = kappa = 1,
// so v vanishes at both walls; the source is computed by hand.
double manufactured_error(int cells) {
  using std::numbers::pi;
  auto s = [](double t) { return std::sin(2.0 * t) + t; };
  auto ds = [](double t) { return 2.0 * std::cos(2.0 * t) + 1.0; };
  auto r = [](double t) { return std::cos(3.0 * t); };
  auto dr = [](double t) { return -3.0 * std::sin(3.0 * t); };

  const AcousticDG1D dg(std::vector<double>(cells, 1.0), 1.0, 1);
  const double tau = dg.h() / 8.0;
  const int steps = static_cast<int>(std::lround(1.0 / tau));
  ImplicitMidpoint stepper(dg, tau);
  auto exact = [&](double t) {
    return [=](double x) { return FieldPair{std::sin(pi * x) * s(t), std::cos(pi * x) * r(t)}; };
  };
  std::vector<double> u = dg.project(exact(0.0));
  std::vector<double> load(dg.dofs());
  for (int n = 1; n <= steps; ++n) {
    const double t = (n - 0.5) * tau;
    dg.load(
        [&](double x) {
          // rho v_t - p_x and p_t / kappa - v_x
          return FieldPair{std::sin(pi * x) * (ds(t) + pi * r(t)),
                           std::cos(pi * x) * (dr(t) - pi * s(t))};
        },
        load);
    stepper.step(u, load);
  }
  return dg.l2_error(u, exact(steps * tau));
}

// Largest relative energy increase of a homogeneous run.
double worst_energy_growth(const std::vector<double>& rho) {
  const AcousticDG1D dg(rho, 1.0, 1);
  ImplicitMidpoint stepper(dg, dg.h() / 8.0);
  std::vector<double> u = dg.project([](double x) {
    const double g = std::exp(-std::pow((x - 0.4) / 0.08, 2));
    return FieldPair{g, -0.5 * g};
  });
  double prev = dg.energy(u), worst = -1.0;
  for (int n = 0; n < 8 * dg.cells(); ++n) {
    stepper.step(u, {});
    const double e = dg.energy(u);
    worst = std::max(worst, (e - prev) / prev);
    prev = e;
  }
  return worst;
}

Outcome wave_convergence() {
  std::vector<double> err;
  for (int cells : {8, 16, 32, 64}) err.push_back(manufactured_error(cells));
  std::vector<double> order;
  for (std::size_t i = 1; i < err.size(); ++i) order.push_back(std::log2(err[i - 1] / err[i]));
  const double min_order = *std::min_element(order.begin(), order.end());

  const double growth_flat = worst_energy_growth(std::vector<double>(64, 1.0));
  const double growth_random = worst_energy_growth(sample_field(CovSpec{}, 64, 5));
  const double growth = std::max(growth_flat, growth_random);
  return {min_order >= kMinOrder && growth <= kEnergyGrowthTol,
          fmt("L2 errors %.3e %.3e %.3e %.3e, orders %.3f %.3f %.3f (min %.1f); "
              "max relative energy change per step %.2e (tol %.0e)",
              err[0], err[1], err[2], err[3], order[0], order[1], order[2], kMinOrder, growth,
              kEnergyGrowthTol)};
}

// ---- 10: Gaussian field covariance -----------------------------------------

Outcome field_covariance() {
  const CovSpec cov;
  const GaussianFieldSampler sampler(cov, kFieldCells);
  const double h = 1.0 / kFieldCells;
  std::vector<int> lags;
  for (double d : {0.0, 0.5 * cov.lambda, cov.lambda, 2.0 * cov.lambda, 4.0 * cov.lambda}) {
    lags.push_back(static_cast<int>(std::lround(d / h)));
  }
  // Per-realization lag averages are independent draws, so their spread
  // gives the standard error.
  std::vector<double> sum(lags.size(), 0.0), sum2(lags.size(), 0.0);
  for (int j = 0; j < kFieldSamples; ++j) {
    const auto x = sampler.sample_log(static_cast<std::uint64_t>(j) + 1);
    for (std::size_t i = 0; i < lags.size(); ++i) {
      const int d = lags[i];
      double acc = 0.0;
      for (int c = 0; c + d < kFieldCells; ++c) acc += x[c] * x[c + d];
      const double r = acc / (kFieldCells - d);
      sum[i] += r;
      sum2[i] += r * r;
    }
  }
  bool ok = true;
  std::ostringstream detail;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double n = kFieldSamples;
    const double mean = sum[i] / n;
    const double se = std::sqrt((sum2[i] / n - mean * mean) / (n - 1.0));
    const double want = cov.sigma * cov.sigma * std::exp(-std::pow(lags[i] * h / cov.lambda, cov.nu));
    const double z = (mean - want) / se;
    ok = ok && std::abs(z) <= kFieldStdErrors;
    detail << (i ? "; " : "") << fmt("lag %d: %.4f vs %.4f (%.2f SE)", lags[i], mean, want, z);
  }
  return {ok, detail.str()};
}

// ---- 11: stochastic wave run -----------------------------------------------

cli::RunConfig wave_config(double sigma) {
  cli::RunConfig cfg;
  cfg.model = cli::ModelKind::wave1d;
  cfg.wave.density.sigma = sigma;
  cfg.bmlmc.budget = kWaveBudget;
  cfg.bmlmc.init_samples = {1024, 256};
  cfg.bmlmc.max_level = 5;
  cfg.bmlmc.master_seed = 1;
  return cfg;
}

Outcome wave_run() {
  std::map<double, RunReport> runs;
  for (double sigma : {0.5, 1.0}) runs[sigma] = cli::run_experiment(wave_config(sigma), false).report;
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [sigma, r] : runs) {
    const bool grew = r.data.max_level() > 1;
    ok = ok && r.status == RunStatus::completed && r.ledger.spent <= kWaveBudget && grew;
    detail << fmt("sigma %.1f: %s, L = %d, rmse %.4e, consumed %.2f of %.0f; ", sigma,
                  to_string(r.status).c_str(), r.data.max_level(), r.error.err_rmse,
                  r.ledger.spent, kWaveBudget);
  }
  const bool ordered = runs[1.0].error.err_rmse > runs[0.5].error.err_rmse;
  detail << (ordered ? "error grows with sigma" : "error does NOT grow with sigma");
  return {ok && ordered, detail.str()};
}

// ---- 12: determinism across worker counts ----------------------------------

Outcome determinism() {
  auto synthetic = synthetic_config(2.0, 4.0, 3.0, 5e7, 3);
  synthetic.p_size = 8;
  auto wave = wave_config(1.0);
  wave.bmlmc.budget = 15.0;
  wave.bmlmc.init_samples = {256, 64};
  bool ok = true;
  std::ostringstream detail;
  for (auto* cfg : {&synthetic, &wave}) {
    std::vector<std::string> reports;
    for (int w : {1, 4, 8}) {
      cfg->workers = w;
      reports.push_back(cli::run_experiment(*cfg, false).json.dump());
    }
    const bool same = reports[0] == reports[1] && reports[0] == reports[2];
    ok = ok && same;
    detail << (cfg == &synthetic ? "synthetic" : "; wave1d") << ": "
           << (same ? "identical" : "DIFFERENT") << " (" << reports[0].size() << " bytes)";
  }
  return {ok, detail.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "Welford merge matches two-pass batch", welford},
      {2, "allocation matches constrained minimizer", allocation},
      {3, "load-distribution rule and figure plans", scheduler_rule},
      {4, "eps-cost slope, beta > gamma", slope_beta_gt_gamma},
      {5, "eps-cost slope, beta < gamma", slope_beta_lt_gamma},
      {6, "budget feasibility of runs 4-5", feasibility},
      {7, "rate recovery after the initial round", rate_recovery},
      {8, "weak scaling", weak_scaling},
      {9, "wave solver convergence and energy", wave_convergence},
      {10, "field sampler covariance", field_covariance},
      {11, "stochastic wave run and sigma ordering", wave_run},
      {12, "report identical across worker counts", determinism},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++ran;
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << fmt("%2d ", c.id) << c.name << ": "
              << o.detail << fmt("  (%.1f s)", secs) << std::endl;
  }
  std::cout << ran - failed << " of " << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
