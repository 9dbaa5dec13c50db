#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "memgan/cost.hpp"
#include "memgan/experiments.hpp"

namespace memgan {

inline constexpr const char* kDataEnvVar = "MEMGAN_DATA";
inline constexpr const char* kDefaultDataDir = "data/mnist-subset";

struct SweepAxes {
  std::vector<double> variability = kDefaultVariabilitySweep;
  std::vector<std::size_t> levels = kDefaultLevelSweep;
  std::vector<std::size_t> snapshot_epochs = kDefaultSnapshotEpochs;
  SweepMode variability_mode = SweepMode::deploy;
  SweepMode levels_mode = SweepMode::retrain;
};

/// Budget inputs. By default the schedule uses the 1.7M-weight, 6-layer,
/// 784-column setting; `from_topology` derives them from the run topology.
struct CostConfig {
  std::uint64_t epochs = 50;
  std::uint64_t images = 60000;
  bool from_topology = false;
  TopologyStats stats{1'700'000, 6, 784};
  CmosCostTable table{};
  CmosCounts counts{};
};

struct LeakageConfig {
  std::vector<double> noise_levels = {0.0, 0.1, 0.2, 0.4};
  std::size_t trials = 10000;
  std::size_t rows = 32;
  std::size_t cols = 32;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  bool timing = false;
  std::string topology = "reference-small";
  std::size_t latent_dim = 0;  // 0: the topology's own default
  std::string data_path;       // empty: $MEMGAN_DATA, then data/mnist-subset
  std::size_t data_limit = 1000;  // 0: every image in the file
  DeviceSpec device{};
  TrainConfig train{};
  std::size_t metric_samples = 1000;
  std::uint64_t sample_seed = 7;
  std::size_t gallery_size = kGallerySize;
  SweepAxes sweep{};
  CostConfig cost{};
  LeakageConfig leakage{};
};

/// Full-scale runs: the whole dataset file and 50 training epochs.
inline void apply_full_scale(RunConfig& c) {
  c.data_limit = 0;
  c.train.epochs = std::max<std::size_t>(c.train.epochs, 50);
}

inline std::filesystem::path resolve_data_path(const RunConfig& c) {
  if (!c.data_path.empty()) return c.data_path;
  if (const char* env = std::getenv(kDataEnvVar); env && *env) return env;
  return kDefaultDataDir;
}

inline SweepMode sweep_mode_from(const std::string& s) {
  if (s == "deploy") return SweepMode::deploy;
  if (s == "retrain") return SweepMode::retrain;
  throw Error(ErrorCategory::config, "unknown sweep mode '" + s + "' (deploy | retrain)");
}

inline const char* to_string(SweepMode m) { return m == SweepMode::deploy ? "deploy" : "retrain"; }

namespace detail {

namespace pt = boost::property_tree;

template <typename T>
T parse_scalar(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    std::string s;
    in >> s;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error(ErrorCategory::config, "config: " + key + ": expected a boolean, got '" + text + "'");
  } else {
    if constexpr (std::is_unsigned_v<T>) {
      if (text.find('-') != std::string::npos)
        throw Error(ErrorCategory::config, "config: " + key + ": expected a non-negative integer, got '" + text + "'");
    }
    in >> v;
    std::string rest;
    if (in.fail() || (in >> rest)) throw Error(ErrorCategory::config, "config: " + key + ": cannot parse '" + text + "'");
    return v;
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(ErrorCategory::config, "config: " + key + ": empty list entry");
    out.push_back(parse_scalar<T>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

/// Reads known keys out of a parsed file and rejects anything left over,
/// so a misspelled key is an error instead of a silent default.
class KeyReader {
 public:
  explicit KeyReader(const pt::ptree& tree) : tree_(tree) {}

  template <typename T>
  void get(const std::string& key, T& target) {
    if (auto v = find(key)) target = parse_scalar<T>(key, *v);
  }
  template <typename T>
  void get_list(const std::string& key, std::vector<T>& target) {
    if (auto v = find(key)) target = parse_list<T>(key, *v);
  }
  void get_string(const std::string& key, std::string& target) {
    if (auto v = find(key)) target = *v;
  }
  std::optional<std::string> find(const std::string& key) {
    used_.insert(key);
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return *v;
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) throw Error(ErrorCategory::config, "config: key '" + section + "' outside a section");
      for (const auto& [key, value] : body)
        if (!used_.count(section + "." + key)) throw Error(ErrorCategory::config, "config: unknown key " + section + "." + key);
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

inline void read_device(KeyReader& r, const std::string& s, DeviceSpec& d) {
  r.get(s + ".r_on_ohms", d.r_on);
  r.get(s + ".r_off_ohms", d.r_off);
  r.get(s + ".v_threshold_volts", d.v_threshold);
  r.get(s + ".v_write_volts", d.v_write);
  r.get(s + ".t_write_seconds", d.t_write);
  r.get(s + ".n_levels", d.n_levels);
}

}  // namespace detail

/// Parses a key-value run file; keys not listed in `defaults` keep their
/// value from `defaults`.
inline RunConfig parse_run_config(std::istream& in, RunConfig c = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCategory::config, std::string("config: ") + e.what());
  }
  detail::KeyReader r(tree);

  r.get("run.seed", c.seed);
  std::string out = c.out_dir.string();
  r.get_string("run.out", out);
  c.out_dir = out;
  r.get("run.timing", c.timing);
  r.get_string("run.topology", c.topology);
  r.get("run.latent_dim", c.latent_dim);

  r.get_string("data.path", c.data_path);
  r.get("data.limit", c.data_limit);

  detail::read_device(r, "device", c.device);

  r.get("train.epochs", c.train.epochs);
  r.get("train.batch_size", c.train.batch_size);
  r.get("train.learning_rate", c.train.learning_rate);
  r.get("train.weight_headroom", c.train.weight_headroom);
  r.get("train.bias_init", c.train.bias_init);

  r.get("analog.quantize", c.train.analog.quantize);
  r.get("analog.variability", c.train.analog.variability);
  r.get("analog.loaded_readout", c.train.analog.loaded_readout);
  r.get("analog.leakage", c.train.analog.leakage);

  r.get("eval.metric_samples", c.metric_samples);
  r.get("eval.sample_seed", c.sample_seed);
  r.get("eval.gallery", c.gallery_size);

  r.get_list("sweep.variability", c.sweep.variability);
  r.get_list("sweep.levels", c.sweep.levels);
  r.get_list("sweep.snapshot_epochs", c.sweep.snapshot_epochs);
  if (auto m = r.find("sweep.variability_mode")) c.sweep.variability_mode = sweep_mode_from(*m);
  if (auto m = r.find("sweep.levels_mode")) c.sweep.levels_mode = sweep_mode_from(*m);

  r.get("cost.epochs", c.cost.epochs);
  r.get("cost.images", c.cost.images);
  r.get("cost.from_topology", c.cost.from_topology);
  r.get("cost.weights", c.cost.stats.weights);
  r.get("cost.layers", c.cost.stats.layers);
  r.get("cost.max_columns", c.cost.stats.max_columns);

  for (std::size_t i = 0; i < kAllComponents.size(); ++i) {
    const std::string name = to_string(kAllComponents[i]);
    r.get("cmos." + name + "_count", c.cost.counts[i]);
    r.get("cmos." + name + "_power_mw", c.cost.table.entries[i].power_mw);
    r.get("cmos." + name + "_area_um2", c.cost.table.entries[i].area_um2);
  }

  r.get_list("leakage.noise_levels", c.leakage.noise_levels);
  r.get("leakage.trials", c.leakage.trials);
  r.get("leakage.rows", c.leakage.rows);
  r.get("leakage.cols", c.leakage.cols);

  r.reject_unknown();
  c.train.seed = c.seed;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config " + path.string());
  return parse_run_config(in, std::move(defaults));
}

/// A [device] section read on its own, for swapping devices under a config.
inline DeviceSpec load_device_file(const std::filesystem::path& path, DeviceSpec d = {}) {
  namespace pt = boost::property_tree;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open device file " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCategory::config, std::string("device file: ") + e.what());
  }
  detail::KeyReader r(tree);
  detail::read_device(r, "device", d);
  r.reject_unknown();
  validate(d);
  return d;
}

/// "wo2" or a file with a [device] section.
inline DeviceSpec device_by_name(const std::string& name) {
  if (name == "wo2") return wo2_device();
  return load_device_file(name);
}

inline void validate(const RunConfig& c) {
  validate(c.device);
  validate(c.train);
  validate(c.cost.table);
  if (c.metric_samples < 2) throw Error(ErrorCategory::config, "eval: metric_samples must be at least 2");
  for (double v : c.sweep.variability)
    if (!(v >= 0.0)) throw Error(ErrorCategory::config, "sweep: variability values must be non-negative");
  for (auto n : c.sweep.levels)
    if (n < 2) throw Error(ErrorCategory::config, "sweep: level counts must be at least 2");
  for (double v : c.leakage.noise_levels)
    if (!(v >= 0.0)) throw Error(ErrorCategory::config, "leakage: noise levels must be non-negative");
  if (c.leakage.trials == 0 || c.leakage.rows == 0 || c.leakage.cols == 0)
    throw Error(ErrorCategory::config, "leakage: trials, rows and cols must be positive");
}

}  // namespace memgan
