#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "bmlmc/controller.hpp"
#include "bmlmc/models/synthetic.hpp"
#include "bmlmc/models/wave1d.hpp"

namespace bmlmc::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { synthetic, wave1d };
enum class ExecMode { simulated, threaded };

struct RunConfig {
  ModelKind model = ModelKind::synthetic;
  SyntheticSpec synthetic;
  Wave1DSpec wave;
  BmlmcConfig bmlmc;

  int p_size = 1;
  double sigma_eff = 0.9;
  double sync_time = 0.0;  // wall time of every round-end synchronization
  ExecMode mode = ExecMode::simulated;
  int workers = 1;

  std::string out_dir = "out";
  bool trace = false;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses `key = value` lines ('#' starts a comment), then applies
/// `overrides` of the form key=value. Unknown or repeated keys and missing
/// required keys (model, budget) raise ConfigError naming the key.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides = {});

/// Reads and parses a file; I/O failures name the path.
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides = {});

/// Writes every key, so parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& cfg);

/// Key/value pairs of the configuration. Execution-only keys (workers,
/// out_dir) are left out when `results_only` is set, because they cannot
/// change any result.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg,
                                                                bool results_only = false);

/// Applies one key=value assignment.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Names of every accepted key.
std::vector<std::string> config_keys();

std::string format_double(double x);

}  // namespace bmlmc::cli
