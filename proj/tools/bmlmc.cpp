#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmlmc/cli/config.hpp"
#include "bmlmc/cli/experiments.hpp"
#include "bmlmc/cli/report.hpp"
#include "bmlmc/models/gaussian_field.hpp"
#include "bmlmc/models/wave1d.hpp"
#include "bmlmc/rng.hpp"
#include "bmlmc/scheduler.hpp"

using namespace bmlmc;
using namespace bmlmc::cli;

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::string mode;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* app, CommonOptions& o, bool config_required) {
  auto* c = app->add_option("--config", o.config, "key = value configuration file");
  if (config_required) c->required()->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "output directory (overrides out_dir)");
  app->add_option("--set", o.sets, "override a configuration key: key=value")
      ->allow_extra_args(false);
  app->add_option("--mode", o.mode, "simulated or threaded")
      ->check(CLI::IsMember({"simulated", "threaded"}));
  app->add_option("--workers", o.workers, "evaluation threads")->check(CLI::PositiveNumber);
  app->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.seed_given = true; },
      "master seed");
}

std::vector<std::string> overrides(const CommonOptions& o) {
  std::vector<std::string> out = o.sets;
  if (!o.out.empty()) out.push_back("out_dir=" + o.out);
  if (!o.mode.empty()) {
    out.push_back("mode=" + o.mode);
    if (o.mode == "threaded") out.push_back("cost_mode=measured");
  }
  if (o.workers > 0) out.push_back("workers=" + std::to_string(o.workers));
  if (o.seed_given) out.push_back("seed=" + std::to_string(o.seed));
  return out;
}

RunConfig load(const CommonOptions& o) { return load_config(o.config, overrides(o)); }

// Configuration for the dump commands: an optional file plus overrides, without
// requiring the run keys.
RunConfig load_loose(const CommonOptions& o) {
  if (!o.config.empty()) return load(o);
  RunConfig cfg;
  for (const auto& s : overrides(o)) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + s + "'");
    set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_summary(const RunReport& r) {
  std::cout << "status      " << to_string(r.status) << " (" << r.stop_reason << ")\n"
            << "estimate    " << r.estimate << "\n"
            << "err_rmse    " << r.error.err_rmse << "  (disc " << r.error.err_disc
            << ", input " << r.error.err_input << ")\n"
            << "levels      " << r.data.num_levels() << ", rounds " << r.rounds.size() << "\n"
            << "budget      " << r.ledger.spent << " of " << r.ledger.initial << "\n";
  if (!r.failure.empty()) std::cout << "failure     " << r.failure << "\n";
}

int cmd_run(const CommonOptions& o) {
  const RunConfig cfg = load(o);
  const ExperimentResult res = run_experiment(cfg);
  print_summary(res.report);
  std::cout << "outputs     " << cfg.out_dir << "/{rounds.csv,report.json}\n";
  return res.exit_code;
}

int cmd_sweep(const CommonOptions& o, const std::string& param, const std::string& values) {
  const RunConfig cfg = load(o);
  const auto rows = sweep(cfg, param, split_list(values));
  int code = kExitOk;
  for (const auto& row : rows) {
    std::cout << param << " = " << row.value << ": " << to_string(row.report.status)
              << ", err_rmse " << row.report.error.err_rmse << "\n";
    if (row.exit_code != kExitOk && code == kExitOk) code = row.exit_code;
  }
  std::cout << "outputs     " << cfg.out_dir << "/sweep.csv\n";
  return code;
}

int cmd_weak_scaling(const CommonOptions& o, int k_max) {
  const RunConfig cfg = load(o);
  const auto res = weak_scaling(cfg, k_max);
  for (const auto& row : res.rows) {
    std::cout << "p = " << row.p_size << ": err_rmse " << row.report.error.err_rmse << "\n";
  }
  if (res.fit) {
    std::cout << "fit         " << scaling_fit_json(*res.fit).dump() << "\n";
  } else {
    std::cout << "fit refused: fewer than three completed runs\n";
  }
  std::cout << "outputs     " << cfg.out_dir << "/{scaling.csv,scaling.json}\n";
  return res.partial ? kExitDiverged : kExitOk;
}

int cmd_dump_field(const CommonOptions& o, int cells, int count) {
  const RunConfig cfg = load_loose(o);
  const GaussianFieldSampler sampler(cfg.wave.density, cells);
  std::vector<std::vector<double>> fields;
  for (int i = 0; i < count; ++i) {
    fields.push_back(sampler.sample(sample_seed(cfg.bmlmc.master_seed, 0, i)));
  }
  const std::string path = cfg.out_dir + "/field.csv";
  auto out = open_output(path);
  out << "# bmlmc field csv v" << kCsvSchemaVersion << "\n";
  out << "x";
  for (int i = 0; i < count; ++i) out << ",rho_" << i;
  out << "\n";
  for (int c = 0; c < cells; ++c) {
    out << (c + 0.5) / cells;
    for (const auto& f : fields) out << ',' << f[c];
    out << "\n";
  }
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_dump_solution(const CommonOptions& o, int level, int every) {
  const RunConfig cfg = load_loose(o);
  Wave1DSpec spec = cfg.wave;
  spec.max_level = std::max(spec.max_level, level);
  const Wave1DModel model(spec);
  const auto rho = model.density(level, sample_seed(cfg.bmlmc.master_seed, level, 0));
  const AcousticDG1D grid(rho, spec.kappa, spec.degree);

  const std::string path = cfg.out_dir + "/solution.csv";
  auto out = open_output(path);
  out << "# bmlmc solution csv v" << kCsvSchemaVersion << "\n";
  out << "step,t,x,rho,v,p\n";
  auto dump = [&](int step, double t, std::span<const double> u) {
    for (int c = 0; c < grid.cells(); ++c) {
      const double x = (c + 0.5) * grid.h();
      const FieldPair vp = grid.evaluate(u, x);
      out << step << ',' << t << ',' << x << ',' << rho[c] << ',' << vp[0] << ',' << vp[1]
          << "\n";
    }
  };
  const WaveSolution sol = solve_wave(spec, rho, [&](int step, double t, std::span<const double> u) {
    if (every > 0 && step % every == 0) dump(step, t, u);
  });
  if (every <= 0 || sol.steps % every != 0) dump(sol.steps, spec.final_time, sol.state);
  std::cout << "wrote " << path << " (QoI " << sol.qoi << ", " << sol.steps << " steps)\n";
  return kExitOk;
}

int cmd_fit_scaling(const std::string& input) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open '" + input + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<ScalingPoint> points;
  int k_col = -1, r_col = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split_list(line);
    if (header.empty()) {
      header = cols;
      for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "reduction" || (header[i] == "k" && k_col < 0)) k_col = i;
        if (header[i] == "err_rmse" || header[i] == "rmse") r_col = i;
      }
      if (k_col < 0 || r_col < 0) {
        throw std::runtime_error(input + ": need columns k (or reduction) and rmse (or err_rmse)");
      }
      continue;
    }
    if (static_cast<int>(cols.size()) <= std::max(k_col, r_col)) continue;
    points.push_back({std::stod(cols[k_col]), std::stod(cols[r_col])});
  }
  if (points.size() < 3) {
    std::cerr << "fit refused: " << points.size() << " points, need at least three\n";
    return kExitConfigError;
  }
  std::cout << scaling_fit_json(fit_weak_scaling(points)).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted multi-level Monte Carlo driver"};
  app.require_subcommand(1);

  CommonOptions run_o, sweep_o, ws_o, field_o, sol_o;
  auto* run = app.add_subcommand("run", "single budgeted run");
  add_common(run, run_o, true);

  auto* sw = app.add_subcommand("sweep", "equal-budget runs over one configuration key");
  add_common(sw, sweep_o, true);
  std::string param, values;
  sw->add_option("--param", param, "configuration key to vary")->required();
  sw->add_option("--values", values, "comma separated values")->required();

  auto* ws = app.add_subcommand("weak-scaling", "runs on p_size * 2^k units at fixed time budget");
  add_common(ws, ws_o, true);
  int k_max = 5;
  ws->add_option("--k-max", k_max, "largest k")->check(CLI::Range(0, 20));

  auto* df = app.add_subcommand("dump-field", "write density realizations as CSV");
  add_common(df, field_o, false);
  int cells = 256, count = 1;
  df->add_option("--cells", cells, "number of cells")->check(CLI::PositiveNumber);
  df->add_option("--count", count, "number of realizations")->check(CLI::PositiveNumber);

  auto* ds = app.add_subcommand("dump-solution", "write wave solution snapshots as CSV");
  add_common(ds, sol_o, false);
  int level = 0, every = 0;
  ds->add_option("--level", level, "mesh level")->check(CLI::Range(0, 16));
  ds->add_option("--every", every, "snapshot every N steps (0: final state only)");

  auto* fs = app.add_subcommand("fit-scaling", "fit err_s + err_p 2^{k delta} to a CSV");
  std::string input;
  fs->add_option("input", input, "CSV with k/reduction and rmse/err_rmse columns")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_o);
    if (*sw) return cmd_sweep(sweep_o, param, values);
    if (*ws) return cmd_weak_scaling(ws_o, k_max);
    if (*df) return cmd_dump_field(field_o, cells, count);
    if (*ds) return cmd_dump_solution(sol_o, level, every);
    if (*fs) return cmd_fit_scaling(input);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}
