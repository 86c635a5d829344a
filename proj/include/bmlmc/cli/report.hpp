#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bmlmc/cli/config.hpp"
#include "bmlmc/controller.hpp"

namespace bmlmc::cli {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kCsvSchemaVersion = 1;

/// Self-contained JSON report. Contains no timing of the host, so two runs
/// with the same results-relevant configuration produce identical text.
nlohmann::json report_json(const RunConfig& cfg, const RunReport& report);

/// Per-round CSV, one row per executed round, flushed as it is written so a
/// crash leaves a valid prefix.
class RoundsCsv {
 public:
  RoundsCsv(const std::string& path, int max_level);
  void write(const RoundRecord& r);

 private:
  std::ofstream out_;
  int max_level_;
};

/// Per-sample trace CSV (round, level, wave, group, units, ordinal, seed, cost).
class TraceCsv {
 public:
  explicit TraceCsv(const std::string& path);
  void write(const TraceRow& row);

 private:
  std::ofstream out_;
};

/// Writes text to a file, creating parent directories; errors name the path.
void write_file(const std::string& path, const std::string& text);

/// Opens `path` for writing or throws std::runtime_error naming it.
std::ofstream open_output(const std::string& path);

}  // namespace bmlmc::cli
