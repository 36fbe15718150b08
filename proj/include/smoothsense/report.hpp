#ifndef SMOOTHSENSE_REPORT_HPP
#define SMOOTHSENSE_REPORT_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "smoothsense/errors.hpp"
#include "smoothsense/metrics.hpp"

namespace smoothsense {

inline constexpr int kReportVersion = 1;

struct DatasetFingerprint {
  std::string name;
  std::int64_t nodes = 0;
  std::int64_t edges = 0;
  std::int64_t features = 0;
  int clusters = 0;
  std::string hash;  // 64-bit FNV-1a, hex
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double tightness = 0.0;
  double separation = 0.0;
  double lambda_sep = 0.0;
  double mean_order = 0.0;
  std::optional<ClusteringScores> scores;
};

/// Everything needed to audit and rerun one pipeline execution.
struct RunReport {
  int report_version = kReportVersion;
  std::string mode;
  std::vector<std::pair<std::string, std::string>> config;  // full echo, documented order
  std::vector<std::pair<std::string, std::string>> overrides;
  DatasetFingerprint dataset;
  int workers = 1;
  std::string status = "ok";
  std::string message;
  std::string stop_reason;
  std::vector<EpochRecord> epochs;
  std::optional<ClusteringScores> final_scores;
  double final_loss = 0.0;
  std::vector<int> selected_orders;
  std::vector<std::pair<int, std::int64_t>> order_histogram;
  std::vector<int> assignments;
  /// Wall-clock seconds per phase, written to a `.timings.json` sidecar
  /// next to the report.
  std::map<std::string, double> timings;
};

/// (order, count) pairs in increasing order, zero-count orders omitted.
inline std::vector<std::pair<int, std::int64_t>> order_histogram(const std::vector<int>& orders) {
  std::map<int, std::int64_t> counts;
  for (int o : orders) ++counts[o];
  return {counts.begin(), counts.end()};
}

/// Fraction of orders <= threshold.
inline double fraction_at_most(const std::vector<std::pair<int, std::int64_t>>& histogram,
                               int threshold) {
  std::int64_t total = 0, below = 0;
  for (const auto& [order, count] : histogram) {
    total += count;
    if (order <= threshold) below += count;
  }
  if (total == 0) throw invalid_input("empty order histogram");
  return static_cast<double>(below) / static_cast<double>(total);
}

namespace detail {

inline nlohmann::ordered_json scores_json(const std::optional<ClusteringScores>& s) {
  if (!s) return nullptr;
  return {{"acc", s->accuracy}, {"nmi", s->nmi}, {"f1", s->f1}};
}

inline std::optional<ClusteringScores> scores_from(const nlohmann::ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return ClusteringScores{j.at("acc").get<double>(), j.at("nmi").get<double>(),
                          j.at("f1").get<double>()};
}

inline nlohmann::ordered_json pairs_json(const std::vector<std::pair<std::string, std::string>>& kv) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [k, v] : kv) out[k] = v;
  return out;
}

inline std::vector<std::pair<std::string, std::string>> pairs_from(const nlohmann::ordered_json& j) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<std::string>());
  return out;
}

/// Writes to a sibling temp file and renames, so a failed write leaves nothing behind.
inline void write_atomically(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw invalid_input("cannot write '" + path + "'");
    out << text;
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw invalid_input("failed while writing '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw invalid_input("cannot move report into place at '" + path + "': " + ec.message());
  }
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["report_version"] = r.report_version;
  j["mode"] = r.mode;
  j["config"] = detail::pairs_json(r.config);
  j["overrides"] = detail::pairs_json(r.overrides);
  j["dataset"] = {{"name", r.dataset.name},         {"nodes", r.dataset.nodes},
                  {"edges", r.dataset.edges},       {"features", r.dataset.features},
                  {"clusters", r.dataset.clusters}, {"hash", r.dataset.hash}};
  j["workers"] = r.workers;
  j["status"] = r.status;
  j["message"] = r.message;
  j["stop_reason"] = r.stop_reason;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"tightness", e.tightness},
                      {"separation", e.separation},
                      {"lambda_sep", e.lambda_sep},
                      {"mean_order", e.mean_order},
                      {"metrics", detail::scores_json(e.scores)}});
  }
  j["epochs"] = std::move(epochs);
  j["final_metrics"] = detail::scores_json(r.final_scores);
  j["final_loss"] = r.final_loss;
  j["selected_orders"] = r.selected_orders;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& [order, count] : r.order_histogram) hist.push_back({order, count});
  j["order_histogram"] = std::move(hist);
  j["assignments"] = r.assignments;
  return j;
}

inline RunReport report_from_json(const nlohmann::ordered_json& j) {
  RunReport r;
  r.report_version = j.at("report_version").get<int>();
  if (r.report_version != kReportVersion) {
    throw invalid_input("unsupported report_version " + std::to_string(r.report_version));
  }
  r.mode = j.at("mode").get<std::string>();
  r.config = detail::pairs_from(j.at("config"));
  r.overrides = detail::pairs_from(j.at("overrides"));
  const auto& d = j.at("dataset");
  r.dataset = {d.at("name").get<std::string>(),    d.at("nodes").get<std::int64_t>(),
               d.at("edges").get<std::int64_t>(),  d.at("features").get<std::int64_t>(),
               d.at("clusters").get<int>(),        d.at("hash").get<std::string>()};
  r.workers = j.at("workers").get<int>();
  r.status = j.at("status").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  for (const auto& e : j.at("epochs")) {
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(),
                        e.at("tightness").get<double>(), e.at("separation").get<double>(),
                        e.at("lambda_sep").get<double>(), e.at("mean_order").get<double>(),
                        detail::scores_from(e.at("metrics"))});
  }
  r.final_scores = detail::scores_from(j.at("final_metrics"));
  r.final_loss = j.at("final_loss").get<double>();
  r.selected_orders = j.at("selected_orders").get<std::vector<int>>();
  for (const auto& h : j.at("order_histogram")) {
    r.order_histogram.emplace_back(h.at(0).get<int>(), h.at(1).get<std::int64_t>());
  }
  r.assignments = j.at("assignments").get<std::vector<int>>();
  return r;
}

inline std::string report_text(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

/// Writes the report (and the timing sidecar when timings exist).
inline void write_report(const RunReport& r, const std::string& path) {
  detail::write_atomically(path, report_text(r));
  if (!r.timings.empty()) {
    nlohmann::ordered_json t(r.timings);
    detail::write_atomically(path + ".timings.json", t.dump(2) + "\n");
  }
}

inline RunReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open report '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("report '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("report '" + path + "' is missing fields: " + e.what());
  }
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_REPORT_HPP
