#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmlmc/cli/config.hpp"
#include "bmlmc/controller.hpp"
#include "bmlmc/scheduler.hpp"

namespace bmlmc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitInfeasibleInit = 2,
  kExitDiverged = 3,
};

int exit_code(RunStatus status);

std::unique_ptr<SampleProblem> make_model(const RunConfig& cfg);
ExecutionSetup make_execution(const RunConfig& cfg);

struct ExperimentResult {
  RunReport report;
  nlohmann::json json;
  int exit_code = kExitOk;
};

/// One BMLMC run. With `write_outputs`, rounds.csv, report.json and (if
/// cfg.trace) trace.csv are written to cfg.out_dir.
ExperimentResult run_experiment(const RunConfig& cfg, bool write_outputs = true);

struct SweepRow {
  std::string value;
  RunReport report;
  int exit_code = kExitOk;
};

/// Runs one experiment per value of `key`, each at the same budget, into
/// out_dir/<key>_<i>/, and writes out_dir/sweep.csv. The budget key itself
/// cannot be swept.
std::vector<SweepRow> sweep(const RunConfig& cfg, const std::string& key,
                            const std::vector<std::string>& values,
                            bool write_outputs = true);

struct WeakScalingRow {
  int k = 0;          // p = p_size * 2^k
  int reduction = 0;  // k_max - k: exponent of |P_max| 2^{-reduction}
  int p_size = 1;
  double budget = 0.0;
  RunReport report;
};

struct WeakScalingResult {
  std::vector<WeakScalingRow> rows;
  std::optional<ScalingFit> fit;  // empty for fewer than three runs
  bool partial = false;           // some member run did not complete
};

/// Runs p = cfg.p_size * 2^k for k = 0..k_max at a fixed time budget
/// T_B = cfg.budget / cfg.p_size, then fits err_s + err_p 2^{reduction delta}.
WeakScalingResult weak_scaling(const RunConfig& cfg, int k_max, bool write_outputs = true);

nlohmann::json scaling_fit_json(const ScalingFit& fit);

}  // namespace bmlmc::cli
