#ifndef SMOOTHSENSE_CONFIG_HPP
#define SMOOTHSENSE_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "smoothsense/errors.hpp"
#include "smoothsense/sensor.hpp"

namespace smoothsense {

enum class Mode { fixed_k, as_gc, nas_gc };

inline const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::fixed_k: return "fixed-k";
    case Mode::as_gc: return "as-gc";
    case Mode::nas_gc: return "nas-gc";
  }
  return "?";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "fixed-k") return Mode::fixed_k;
  if (text == "as-gc") return Mode::as_gc;
  if (text == "nas-gc") return Mode::nas_gc;
  throw invalid_input("unknown mode '" + std::string(text) + "' (expected fixed-k, as-gc, nas-gc)");
}

/// Every tunable of a run. Defaults follow the Cora node-wise setup.
struct TrainConfig {
  Mode mode = Mode::nas_gc;
  int max_order = 40;
  int fixed_k = 12;
  double epsilon = 1.0;
  double lambda_tig = 1.0;
  double lambda_sep = 1.0;
  bool auto_proportion = false;
  double learning_rate = 0.01;
  double anneal_factor = 1.0;  // 1 disables annealing
  int anneal_start_epoch = 10;
  int max_epochs = 200;
  int early_stop_window = 5;
  double early_stop_std = 1e-3;
  std::uint64_t seed = 0;
  std::int64_t pair_sampling_budget = 2'000'000;
  std::int64_t exact_pairs_max_nodes = 5000;
  int recluster_every = 1;
  CellKind cell = CellKind::gated_recurrent;
  int hidden_dim = 200;
  bool self_loops = true;
  std::int64_t memory_budget_mb = 2048;
  int kmeans_restarts = 10;
  int kmeans_max_iters = 100;
  std::int64_t dense_eigen_max_nodes = 1000;
  std::int64_t kernel_dense_max_nodes = 8000;
  bool row_normalize_embedding = false;
  bool row_l1_features = false;
  std::string nmi_normalization = "geometric";

  void validate() const {
    auto fail = [](const std::string& what) { throw invalid_input("invalid config: " + what); };
    if (max_order < 1) fail("max_order must be >= 1");
    if (fixed_k < 0) fail("fixed_k must be >= 0");
    if (!(epsilon > 0.0)) fail("epsilon must be > 0");
    if (lambda_tig < 0.0 || lambda_sep < 0.0) fail("loss weights must be >= 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(anneal_factor > 0.0)) fail("anneal_factor must be > 0");
    if (max_epochs < 1) fail("max_epochs must be >= 1");
    if (early_stop_window < 2) fail("early_stop_window must be >= 2");
    if (!(early_stop_std > 0.0)) fail("early_stop_std must be > 0");
    if (pair_sampling_budget < 1) fail("pair_sampling_budget must be >= 1");
    if (recluster_every < 1) fail("recluster_every must be >= 1");
    if (hidden_dim < 1) fail("hidden_dim must be >= 1");
    if (kmeans_restarts < 1 || kmeans_max_iters < 1) fail("k-means limits must be >= 1");
    if (nmi_normalization != "geometric" && nmi_normalization != "arithmetic") {
      fail("nmi_normalization must be geometric or arithmetic");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw invalid_input("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw invalid_input("config key '" + key + "': expected a boolean, got '" + text + "'");
}

struct ConfigField {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <class T>
ConfigField number_field(T TrainConfig::*member, const char* key) {
  return {[member, key](TrainConfig& c, const std::string& v) {
            c.*member = parse_number<T>(key, v);
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

inline ConfigField bool_field(bool TrainConfig::*member, const char* key) {
  return {[member, key](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

/// Documented keys in a fixed order; the order is also the echo order in reports.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"mode",
       {[](TrainConfig& c, const std::string& v) { c.mode = parse_mode(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.mode)); }}},
      {"max_order", number_field(&TrainConfig::max_order, "max_order")},
      {"fixed_k", number_field(&TrainConfig::fixed_k, "fixed_k")},
      {"epsilon", number_field(&TrainConfig::epsilon, "epsilon")},
      {"lambda_tig", number_field(&TrainConfig::lambda_tig, "lambda_tig")},
      {"lambda_sep", number_field(&TrainConfig::lambda_sep, "lambda_sep")},
      {"auto_proportion", bool_field(&TrainConfig::auto_proportion, "auto_proportion")},
      {"learning_rate", number_field(&TrainConfig::learning_rate, "learning_rate")},
      {"anneal_factor", number_field(&TrainConfig::anneal_factor, "anneal_factor")},
      {"anneal_start_epoch", number_field(&TrainConfig::anneal_start_epoch, "anneal_start_epoch")},
      {"max_epochs", number_field(&TrainConfig::max_epochs, "max_epochs")},
      {"early_stop_window", number_field(&TrainConfig::early_stop_window, "early_stop_window")},
      {"early_stop_std", number_field(&TrainConfig::early_stop_std, "early_stop_std")},
      {"seed", number_field(&TrainConfig::seed, "seed")},
      {"pair_sampling_budget",
       number_field(&TrainConfig::pair_sampling_budget, "pair_sampling_budget")},
      {"exact_pairs_max_nodes",
       number_field(&TrainConfig::exact_pairs_max_nodes, "exact_pairs_max_nodes")},
      {"recluster_every", number_field(&TrainConfig::recluster_every, "recluster_every")},
      {"cell",
       {[](TrainConfig& c, const std::string& v) {
          if (v == "gru") {
            c.cell = CellKind::gated_recurrent;
          } else if (v == "rnn") {
            c.cell = CellKind::simple_recurrent;
          } else {
            throw invalid_input("config key 'cell': expected gru or rnn, got '" + v + "'");
          }
        },
        [](const TrainConfig& c) { return std::string(to_string(c.cell)); }}},
      {"hidden_dim", number_field(&TrainConfig::hidden_dim, "hidden_dim")},
      {"self_loops", bool_field(&TrainConfig::self_loops, "self_loops")},
      {"memory_budget_mb", number_field(&TrainConfig::memory_budget_mb, "memory_budget_mb")},
      {"kmeans_restarts", number_field(&TrainConfig::kmeans_restarts, "kmeans_restarts")},
      {"kmeans_max_iters", number_field(&TrainConfig::kmeans_max_iters, "kmeans_max_iters")},
      {"dense_eigen_max_nodes",
       number_field(&TrainConfig::dense_eigen_max_nodes, "dense_eigen_max_nodes")},
      {"kernel_dense_max_nodes",
       number_field(&TrainConfig::kernel_dense_max_nodes, "kernel_dense_max_nodes")},
      {"row_normalize_embedding",
       bool_field(&TrainConfig::row_normalize_embedding, "row_normalize_embedding")},
      {"row_l1_features", bool_field(&TrainConfig::row_l1_features, "row_l1_features")},
      {"nmi_normalization",
       {[](TrainConfig& c, const std::string& v) { c.nmi_normalization = v; },
        [](const TrainConfig& c) { return c.nmi_normalization; }}},
  };
  return fields;
}

}  // namespace detail

/// Sets one key; unknown keys are rejected by name.
inline void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : detail::config_fields()) {
    if (name == key) {
      field.set(config, detail::trim(value));
      return;
    }
  }
  throw invalid_input("unknown config key '" + key + "'");
}

/// Applies a `key=value` override string.
inline void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw invalid_input("override '" + assignment + "' is not of the form key=value");
  }
  set_config_value(config, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// All keys with their current values, in documented order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : detail::config_fields()) out.emplace_back(name, field.get(config));
  return out;
}

/// Parses flat `key = value` text with `#` comments. Missing keys keep their
/// defaults; unknown keys fail.
inline TrainConfig parse_config(std::istream& in, TrainConfig config = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw invalid_input("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    try {
      set_config_value(config, key, body.substr(eq + 1));
    } catch (const invalid_input& e) {
      throw invalid_input("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

inline TrainConfig read_config(const std::string& path, TrainConfig config = {}) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open config file '" + path + "'");
  return parse_config(in, std::move(config));
}

inline void write_config(std::ostream& out, const TrainConfig& config) {
  for (const auto& [key, value] : config_entries(config)) out << key << " = " << value << "\n";
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_CONFIG_HPP
