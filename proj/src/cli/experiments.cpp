#include "bmlmc/cli/experiments.hpp"

#include <cmath>
#include <filesystem>

#include "bmlmc/cli/report.hpp"
#include "bmlmc/models/synthetic.hpp"
#include "bmlmc/models/wave1d.hpp"

namespace bmlmc::cli {

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int exit_code(RunStatus status) {
  switch (status) {
    case RunStatus::completed: return kExitOk;
    case RunStatus::infeasible_init: return kExitInfeasibleInit;
    case RunStatus::diverged: return kExitDiverged;
  }
  return kExitConfigError;
}

std::unique_ptr<SampleProblem> make_model(const RunConfig& cfg) {
  if (cfg.model == ModelKind::synthetic) {
    return std::make_unique<SyntheticModel>(cfg.synthetic);
  }
  Wave1DSpec spec = cfg.wave;
  spec.max_level = cfg.bmlmc.max_level;
  return std::make_unique<Wave1DModel>(spec);
}

ExecutionSetup make_execution(const RunConfig& cfg) {
  ExecutionSetup exec;
  exec.p_size = cfg.p_size;
  exec.scheduler.sigma_eff = cfg.sigma_eff;
  exec.scheduler.sync_time = cfg.sync_time;
  exec.scheduler.workers = cfg.workers;
  exec.scheduler.measure_cost = cfg.mode == ExecMode::threaded;
  return exec;
}

ExperimentResult run_experiment(const RunConfig& cfg, bool write_outputs) {
  cfg.validate();
  const auto model = make_model(cfg);
  ExecutionSetup exec = make_execution(cfg);

  std::unique_ptr<RoundsCsv> rounds;
  std::unique_ptr<TraceCsv> trace;
  if (write_outputs) {
    rounds = std::make_unique<RoundsCsv>(join(cfg.out_dir, "rounds.csv"), cfg.bmlmc.max_level);
    if (cfg.trace) {
      trace = std::make_unique<TraceCsv>(join(cfg.out_dir, "trace.csv"));
      exec.trace = [&](const TraceRow& row) { trace->write(row); };
    }
  }

  ExperimentResult result;
  result.report = run(cfg.bmlmc, *model, exec, [&](const RoundRecord& r) {
    if (rounds) rounds->write(r);
  });
  result.json = report_json(cfg, result.report);
  result.exit_code = exit_code(result.report.status);
  if (write_outputs) {
    write_file(join(cfg.out_dir, "report.json"), result.json.dump(2) + "\n");
  }
  return result;
}

std::vector<SweepRow> sweep(const RunConfig& cfg, const std::string& key,
                            const std::vector<std::string>& values, bool write_outputs) {
  if (key == "budget") {
    throw ConfigError("sweeps compare runs at equal budget; 'budget' cannot be swept");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  // Validate every member before running any of them.
  std::vector<RunConfig> members;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig member = cfg;
    set_config_value(member, key, values[i]);
    member.bmlmc.budget = cfg.bmlmc.budget;
    member.out_dir = join(cfg.out_dir, key + "_" + std::to_string(i));
    member.validate();
    members.push_back(member);
  }

  std::vector<SweepRow> rows;
  std::ofstream csv;
  if (write_outputs) {
    csv = open_output(join(cfg.out_dir, "sweep.csv"));
    csv << "# bmlmc sweep csv v" << kCsvSchemaVersion << "\n";
    csv << "value,status,budget,consumed,estimate,err_rmse,err_disc,err_input,L,"
           "alpha,beta,gamma\n";
  }
  for (std::size_t i = 0; i < members.size(); ++i) {
    ExperimentResult res = run_experiment(members[i], write_outputs);
    const RunReport& r = res.report;
    if (write_outputs) {
      csv << values[i] << ',' << to_string(r.status) << ',' << r.ledger.initial << ','
          << r.ledger.spent << ',' << r.estimate << ',' << r.error.err_rmse << ','
          << r.error.err_disc << ',' << r.error.err_input << ',' << r.data.max_level()
          << ',' << r.rates.alpha << ',' << r.rates.beta << ',' << r.rates.gamma << '\n';
      csv.flush();
    }
    rows.push_back({values[i], res.report, res.exit_code});
  }
  return rows;
}

nlohmann::json scaling_fit_json(const ScalingFit& fit) {
  nlohmann::json j{{"err_s", fit.err_s},
                   {"err_p", fit.err_p},
                   {"residual", fit.residual},
                   {"delta_defined", fit.delta_defined}};
  j["delta"] = fit.delta_defined ? nlohmann::json(fit.delta) : nlohmann::json(nullptr);
  return j;
}

WeakScalingResult weak_scaling(const RunConfig& cfg, int k_max, bool write_outputs) {
  if (k_max < 0 || k_max > 20) throw ConfigError("k_max must lie in [0, 20]");
  cfg.validate();
  const double time_budget = cfg.bmlmc.budget / cfg.p_size;

  WeakScalingResult result;
  std::ofstream csv;
  if (write_outputs) {
    csv = open_output(join(cfg.out_dir, "scaling.csv"));
    csv << "# bmlmc scaling csv v" << kCsvSchemaVersion << "\n";
    csv << "k,reduction,p_size,budget,status,err_rmse,consumed,rounds,L\n";
  }
  for (int k = 0; k <= k_max; ++k) {
    RunConfig member = cfg;
    member.p_size = cfg.p_size << k;
    member.bmlmc.budget = time_budget * member.p_size;
    member.out_dir = join(cfg.out_dir, "k_" + std::to_string(k));
    ExperimentResult res = run_experiment(member, write_outputs);
    WeakScalingRow row{k, k_max - k, member.p_size, member.bmlmc.budget, res.report};
    if (res.report.status != RunStatus::completed) result.partial = true;
    if (write_outputs) {
      const RunReport& r = res.report;
      csv << k << ',' << row.reduction << ',' << row.p_size << ',' << row.budget << ','
          << to_string(r.status) << ',' << r.error.err_rmse << ',' << r.ledger.spent << ','
          << r.rounds.size() << ',' << r.data.max_level() << '\n';
      csv.flush();
    }
    result.rows.push_back(std::move(row));
  }

  std::vector<ScalingPoint> points;
  for (const auto& row : result.rows) {
    if (row.report.status == RunStatus::completed) {
      points.push_back({static_cast<double>(row.reduction), row.report.error.err_rmse});
    }
  }
  if (points.size() >= 3) result.fit = fit_weak_scaling(points);

  if (write_outputs) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["time_budget"] = time_budget;
    j["partial"] = result.partial;
    j["fit"] = result.fit ? scaling_fit_json(*result.fit) : nlohmann::json(nullptr);
    if (!result.fit) j["fit_refused"] = "fewer than three completed runs";
    j["points"] = nlohmann::json::array();
    for (const auto& row : result.rows) {
      j["points"].push_back({{"k", row.k},
                             {"reduction", row.reduction},
                             {"p_size", row.p_size},
                             {"budget", row.budget},
                             {"status", to_string(row.report.status)},
                             {"err_rmse", row.report.error.err_rmse},
                             {"consumed", row.report.ledger.spent},
                             {"rounds", row.report.rounds.size()}});
    }
    write_file(join(cfg.out_dir, "scaling.json"), j.dump(2) + "\n");
  }
  return result;
}

}  // namespace bmlmc::cli
