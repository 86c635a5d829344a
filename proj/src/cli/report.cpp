#include "bmlmc/cli/report.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace bmlmc::cli {

namespace {

using nlohmann::json;

// JSON has no infinity; the bias estimate is +inf on a single level.
json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

json rates_json(const RateEstimate& r) {
  return {{"alpha", number(r.alpha)},     {"c_alpha", number(r.c_alpha)},
          {"beta", number(r.beta)},       {"c_beta", number(r.c_beta)},
          {"gamma", number(r.gamma)},     {"c_gamma", number(r.c_gamma)},
          {"alpha_defaulted", r.alpha_defaulted},
          {"beta_defaulted", r.beta_defaulted},
          {"gamma_defaulted", r.gamma_defaulted},
          {"clamped", r.clamped}};
}

json error_json(const ErrorEstimate& e) {
  return {{"err_disc", number(e.err_disc)},
          {"err_input", number(e.err_input)},
          {"err_mse", number(e.err_mse)},
          {"err_rmse", number(e.err_rmse)}};
}

}  // namespace

json report_json(const RunConfig& cfg, const RunReport& report) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  json config = json::object();
  for (const auto& [k, v] : config_entries(cfg, true)) config[k] = v;
  j["config"] = config;
  j["status"] = to_string(report.status);
  j["stop_reason"] = report.stop_reason;
  if (!report.failure.empty()) j["failure"] = report.failure;
  j["warnings"] = report.warnings;

  j["estimate"] = number(report.estimate);
  j["error"] = error_json(report.error);
  j["rates"] = rates_json(report.rates);
  j["final_epsilon"] = number(report.final_epsilon);
  j["bias_bound"] = report.bias_bound;

  json levels = json::array();
  for (const auto& acc : report.data.levels) {
    json l{{"level", acc.level},
           {"samples", acc.count},
           {"mean_q", number(acc.mean_q)},
           {"mean_y", number(acc.mean_y)},
           {"mean_cost", number(acc.mean_cost)},
           {"total_cost", number(acc.total_cost)}};
    l["var_y"] = acc.count >= 2 ? number(sample_variance_y(acc)) : json(nullptr);
    l["var_q"] = acc.count >= 2 ? number(sample_variance_q(acc)) : json(nullptr);
    levels.push_back(l);
  }
  j["levels"] = levels;

  j["budget"] = {{"initial", number(report.ledger.initial)},
                 {"consumed", number(report.ledger.spent)},
                 {"remaining", number(report.ledger.remaining)},
                 {"overshoot", number(report.ledger.overshoot())}};
  j["scheduler"] = {{"p_size", cfg.p_size},
                    {"span", number(report.total_span)},
                    {"idle", number(report.total_idle)},
                    {"comm", number(report.total_comm)},
                    {"sync", number(report.total_sync)}};

  json rounds = json::array();
  for (const auto& r : report.rounds) {
    rounds.push_back({{"round", r.round},
                      {"epsilon", number(r.epsilon)},
                      {"max_level", r.max_level},
                      {"samples", r.counts},
                      {"error", error_json(r.error)},
                      {"rates", rates_json(r.rates)},
                      {"grew", r.grew},
                      {"predicted", number(r.predicted)},
                      {"consumed", number(r.consumed)},
                      {"remaining", number(r.remaining)},
                      {"span", number(r.span)},
                      {"idle", number(r.idle)},
                      {"comm", number(r.comm)},
                      {"relaxations", r.relaxations},
                      {"tightenings", r.tightenings}});
  }
  j["rounds"] = rounds;
  j["checkpoint"] = report.data;
  return j;
}

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) {
      throw std::runtime_error("cannot create directory '" + p.parent_path().string() +
                               "': " + ec.message());
    }
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

RoundsCsv::RoundsCsv(const std::string& path, int max_level)
    : out_(open_output(path)), max_level_(max_level) {
  out_ << "# bmlmc rounds csv v" << kCsvSchemaVersion << "\n";
  out_ << "round,epsilon,L";
  for (int l = 0; l <= max_level_; ++l) out_ << ",M_" << l;
  out_ << ",err_disc,err_input,err_rmse,consumed,remaining\n";
  out_.flush();
}

void RoundsCsv::write(const RoundRecord& r) {
  out_ << r.round << ',' << r.epsilon << ',' << r.max_level;
  for (int l = 0; l <= max_level_; ++l) {
    out_ << ',' << (l < static_cast<int>(r.counts.size()) ? r.counts[l] : 0);
  }
  out_ << ',' << r.error.err_disc << ',' << r.error.err_input << ',' << r.error.err_rmse
       << ',' << r.consumed << ',' << r.remaining << '\n';
  out_.flush();
}

TraceCsv::TraceCsv(const std::string& path) : out_(open_output(path)) {
  out_ << "# bmlmc trace csv v" << kCsvSchemaVersion << "\n";
  out_ << "round,level,wave,group,units,ordinal,seed,cost\n";
}

void TraceCsv::write(const TraceRow& row) {
  out_ << row.round << ',' << row.level << ',' << row.wave << ',' << row.group << ','
       << row.units << ',' << row.ordinal << ',' << row.seed << ',' << row.cost << '\n';
}

}  // namespace bmlmc::cli
