#include "bmlmc/cli/config.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace bmlmc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

struct KeyDef {
  std::string name;
  bool required = false;
  bool results_only_skip = false;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// `field` maps a config to a reference of the stored value; getters only read
// through it.
template <typename Get>
KeyDef make_double(std::string name, Get field) {
  KeyDef d;
  d.name = name;
  d.get = [field](const RunConfig& c) { return format_double(field(const_cast<RunConfig&>(c))); };
  d.set = [field, name](RunConfig& c, const std::string& v) { field(c) = to_double(name, v); };
  return d;
}

template <typename Get>
KeyDef make_int(std::string name, Get field) {
  KeyDef d;
  d.name = name;
  d.get = [field](const RunConfig& c) {
    return std::to_string(field(const_cast<RunConfig&>(c)));
  };
  d.set = [field, name](RunConfig& c, const std::string& v) {
    const auto x = to_int(name, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      throw ConfigError("key '" + name + "': value out of range");
    }
    field(c) = static_cast<int>(x);
  };
  return d;
}

template <typename Get>
KeyDef make_uint(std::string name, Get field) {
  KeyDef d;
  d.name = name;
  d.get = [field](const RunConfig& c) {
    return std::to_string(field(const_cast<RunConfig&>(c)));
  };
  d.set = [field, name](RunConfig& c, const std::string& v) { field(c) = to_uint(name, v); };
  return d;
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;

    KeyDef model;
    model.name = "model";
    model.required = true;
    model.get = [](const RunConfig& c) {
      return std::string(c.model == ModelKind::synthetic ? "synthetic" : "wave1d");
    };
    model.set = [](RunConfig& c, const std::string& v) {
      if (v == "synthetic") c.model = ModelKind::synthetic;
      else if (v == "wave1d") c.model = ModelKind::wave1d;
      else throw ConfigError("key 'model': expected synthetic or wave1d, got '" + v + "'");
    };
    t.push_back(model);

    KeyDef budget = make_double("budget", [](RunConfig& c) -> double& { return c.bmlmc.budget; });
    budget.required = true;
    t.push_back(budget);
    t.push_back(make_double("theta", [](RunConfig& c) -> double& { return c.bmlmc.theta; }));
    t.push_back(make_double("eta", [](RunConfig& c) -> double& { return c.bmlmc.eta; }));

    KeyDef init;
    init.name = "init_samples";
    init.get = [](const RunConfig& c) {
      std::string s;
      for (std::size_t i = 0; i < c.bmlmc.init_samples.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(c.bmlmc.init_samples[i]);
      }
      return s;
    };
    init.set = [](RunConfig& c, const std::string& v) {
      std::vector<std::uint64_t> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(to_uint("init_samples", trim(item)));
      if (out.empty()) throw ConfigError("key 'init_samples': empty list");
      c.bmlmc.init_samples = out;
    };
    t.push_back(init);

    t.push_back(make_int("max_level", [](RunConfig& c) -> int& { return c.bmlmc.max_level; }));
    t.push_back(make_double("epsilon_min", [](RunConfig& c) -> double& { return c.bmlmc.epsilon_min; }));

    KeyDef cost_mode;
    cost_mode.name = "cost_mode";
    cost_mode.get = [](const RunConfig& c) {
      return std::string(c.bmlmc.cost_mode == CostMode::modeled ? "modeled" : "measured");
    };
    cost_mode.set = [](RunConfig& c, const std::string& v) {
      if (v == "modeled") c.bmlmc.cost_mode = CostMode::modeled;
      else if (v == "measured") c.bmlmc.cost_mode = CostMode::measured;
      else throw ConfigError("key 'cost_mode': expected modeled or measured, got '" + v + "'");
    };
    t.push_back(cost_mode);

    t.push_back(make_uint("seed", [](RunConfig& c) -> std::uint64_t& { return c.bmlmc.master_seed; }));
    t.push_back(make_int("n_relax", [](RunConfig& c) -> int& { return c.bmlmc.n_relax; }));
    t.push_back(make_uint("min_pilot", [](RunConfig& c) -> std::uint64_t& { return c.bmlmc.min_pilot; }));

    t.push_back(make_int("p_size", [](RunConfig& c) -> int& { return c.p_size; }));
    t.push_back(make_double("sigma_eff", [](RunConfig& c) -> double& { return c.sigma_eff; }));
    t.push_back(make_double("sync_time", [](RunConfig& c) -> double& { return c.sync_time; }));

    KeyDef mode;
    mode.name = "mode";
    mode.get = [](const RunConfig& c) {
      return std::string(c.mode == ExecMode::simulated ? "simulated" : "threaded");
    };
    mode.set = [](RunConfig& c, const std::string& v) {
      if (v == "simulated") c.mode = ExecMode::simulated;
      else if (v == "threaded") c.mode = ExecMode::threaded;
      else throw ConfigError("key 'mode': expected simulated or threaded, got '" + v + "'");
    };
    t.push_back(mode);

    KeyDef workers = make_int("workers", [](RunConfig& c) -> int& { return c.workers; });
    workers.results_only_skip = true;
    t.push_back(workers);

    KeyDef out;
    out.name = "out_dir";
    out.results_only_skip = true;
    out.get = [](const RunConfig& c) { return c.out_dir; };
    out.set = [](RunConfig& c, const std::string& v) {
      if (v.empty()) throw ConfigError("key 'out_dir': empty path");
      c.out_dir = v;
    };
    t.push_back(out);

    KeyDef trace;
    trace.name = "trace";
    trace.results_only_skip = true;
    trace.get = [](const RunConfig& c) { return std::string(c.trace ? "true" : "false"); };
    trace.set = [](RunConfig& c, const std::string& v) { c.trace = to_bool("trace", v); };
    t.push_back(trace);

    // Synthetic model.
    t.push_back(make_double("synthetic.q_bar", [](RunConfig& c) -> double& { return c.synthetic.q_bar; }));
    t.push_back(make_double("synthetic.c_alpha", [](RunConfig& c) -> double& { return c.synthetic.c_alpha; }));
    t.push_back(make_double("synthetic.alpha", [](RunConfig& c) -> double& { return c.synthetic.alpha; }));
    t.push_back(make_double("synthetic.c_beta", [](RunConfig& c) -> double& { return c.synthetic.c_beta; }));
    t.push_back(make_double("synthetic.beta", [](RunConfig& c) -> double& { return c.synthetic.beta; }));
    t.push_back(make_double("synthetic.c_gamma", [](RunConfig& c) -> double& { return c.synthetic.c_gamma; }));
    t.push_back(make_double("synthetic.gamma", [](RunConfig& c) -> double& { return c.synthetic.gamma; }));
    t.push_back(make_double("synthetic.v0", [](RunConfig& c) -> double& { return c.synthetic.v0; }));
    t.push_back(make_double("synthetic.h0", [](RunConfig& c) -> double& { return c.synthetic.h0; }));
    t.push_back(make_int("synthetic.dimension", [](RunConfig& c) -> int& { return c.synthetic.spatial_dimension; }));
    t.push_back(make_double("synthetic.cost_jitter", [](RunConfig& c) -> double& { return c.synthetic.cost_jitter; }));

    // 1D acoustic wave model.
    t.push_back(make_double("wave.final_time", [](RunConfig& c) -> double& { return c.wave.final_time; }));
    t.push_back(make_double("wave.kappa", [](RunConfig& c) -> double& { return c.wave.kappa; }));
    t.push_back(make_double("wave.sigma", [](RunConfig& c) -> double& { return c.wave.density.sigma; }));
    t.push_back(make_double("wave.lambda", [](RunConfig& c) -> double& { return c.wave.density.lambda; }));
    t.push_back(make_double("wave.nu", [](RunConfig& c) -> double& { return c.wave.density.nu; }));
    t.push_back(make_int("wave.degree", [](RunConfig& c) -> int& { return c.wave.degree; }));
    t.push_back(make_double("wave.cfl", [](RunConfig& c) -> double& { return c.wave.cfl_ratio; }));
    t.push_back(make_double("wave.h0", [](RunConfig& c) -> double& { return c.wave.h0; }));
    t.push_back(make_double("wave.ricker_a", [](RunConfig& c) -> double& { return c.wave.ricker_a; }));
    t.push_back(make_double("wave.amplitude", [](RunConfig& c) -> double& { return c.wave.ricker_amplitude; }));
    t.push_back(make_double("wave.source_center", [](RunConfig& c) -> double& { return c.wave.source_center; }));
    t.push_back(make_double("wave.source_width", [](RunConfig& c) -> double& { return c.wave.source_width; }));
    t.push_back(make_double("wave.roi_lo", [](RunConfig& c) -> double& { return c.wave.roi_lo; }));
    t.push_back(make_double("wave.roi_hi", [](RunConfig& c) -> double& { return c.wave.roi_hi; }));
    t.push_back(make_double("wave.cost_unit", [](RunConfig& c) -> double& { return c.wave.cost_unit; }));
    return t;
  }();
  return table;
}

const KeyDef& find_key(const std::string& key) {
  for (const auto& d : key_table()) {
    if (d.name == key) return d;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::pair<std::string, std::string> split_assignment(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + line + "'");
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void RunConfig::validate() const {
  try {
    bmlmc.validate();
    if (model == ModelKind::synthetic) synthetic.validate();
    else wave.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (p_size < 1 || !std::has_single_bit(static_cast<unsigned>(p_size))) {
    throw ConfigError("key 'p_size': must be a positive power of two");
  }
  if (!(sigma_eff >= 0.0 && sigma_eff <= 1.0)) {
    throw ConfigError("key 'sigma_eff': must lie in [0, 1]");
  }
  if (!(sync_time >= 0.0)) throw ConfigError("key 'sync_time': must be >= 0");
  if (workers < 1) throw ConfigError("key 'workers': must be >= 1");
  if (mode == ExecMode::threaded && bmlmc.cost_mode != CostMode::measured) {
    throw ConfigError("mode 'threaded' measures CPU time; set cost_mode = measured");
  }
  if (model == ModelKind::synthetic && synthetic.cost_jitter > 0 &&
      bmlmc.cost_mode == CostMode::modeled) {
    throw ConfigError("synthetic.cost_jitter needs cost_mode = measured");
  }
  if (model == ModelKind::wave1d && bmlmc.max_level > 16) {
    throw ConfigError("key 'max_level': wave1d supports at most 16 levels");
  }
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& d : key_table()) keys.push_back(d.name);
  return keys;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      auto [key, value] = split_assignment(line);
      if (!seen.insert(key).second) throw ConfigError("key '" + key + "' given twice");
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  for (const auto& o : overrides) {
    auto [key, value] = split_assignment(o);
    set_config_value(cfg, key, value);
    seen.insert(key);
  }
  for (const auto& d : key_table()) {
    if (d.required && !seen.count(d.name)) {
      throw ConfigError("missing required key '" + d.name + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg,
                                                                bool results_only) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : key_table()) {
    if (results_only && d.results_only_skip) continue;
    out.emplace_back(d.name, d.get(cfg));
  }
  return out;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& [k, v] : config_entries(cfg)) s += k + " = " + v + "\n";
  return s;
}

}  // namespace bmlmc::cli
