#ifndef SMOOTHSENSE_PIPELINE_HPP
#define SMOOTHSENSE_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "smoothsense/config.hpp"
#include "smoothsense/data_io.hpp"
#include "smoothsense/report.hpp"
#include "smoothsense/train.hpp"

namespace smoothsense {

struct RunRequest {
  std::string dataset_name;
  std::vector<std::pair<std::string, std::string>> overrides;
  EpochCallback on_epoch;
};

/// Applies feature preprocessing named in the config.
inline AttributedGraph prepare_graph(AttributedGraph graph, const TrainConfig& config) {
  if (config.row_l1_features) {
    for (Index i = 0; i < graph.n; ++i) {
      const double l1 = graph.features.row(i).cwiseAbs().sum();
      if (l1 > 0.0) graph.features.row(i) /= l1;
    }
  }
  return graph;
}

/// Runs the configured mode once and returns a complete, self-describing report.
inline RunReport run_pipeline(const AttributedGraph& raw, const TrainConfig& config,
                              const RunRequest& request = {}) {
  config.validate();
  const AttributedGraph graph = prepare_graph(raw, config);
  RunReport report = config.mode == Mode::fixed_k ? run_fixed_k(graph, config)
                                                  : train(graph, config, request.on_epoch).report;
  report.config = config_entries(config);
  report.overrides = request.overrides;
  report.dataset = fingerprint(raw, request.dataset_name);
  report.workers = 1;
  return report;
}

struct SeedAggregate {
  std::vector<std::uint64_t> seeds;
  std::vector<RunReport> reports;
  std::optional<ClusteringScores> mean_scores;
};

/// Arithmetic mean of the per-seed scores; empty when any run lacks scores.
inline std::optional<ClusteringScores> mean_scores(const std::vector<RunReport>& reports) {
  if (reports.empty()) return std::nullopt;
  ClusteringScores sum;
  for (const auto& r : reports) {
    if (!r.final_scores) return std::nullopt;
    sum.accuracy += r.final_scores->accuracy;
    sum.nmi += r.final_scores->nmi;
    sum.f1 += r.final_scores->f1;
  }
  const double k = static_cast<double>(reports.size());
  return ClusteringScores{sum.accuracy / k, sum.nmi / k, sum.f1 / k};
}

inline SeedAggregate run_seeds(const AttributedGraph& graph, TrainConfig config,
                               const std::vector<std::uint64_t>& seeds,
                               const RunRequest& request = {}) {
  if (seeds.empty()) throw invalid_input("seed list is empty");
  SeedAggregate out;
  for (std::uint64_t seed : seeds) {
    config.seed = seed;
    out.seeds.push_back(seed);
    out.reports.push_back(run_pipeline(graph, config, request));
  }
  out.mean_scores = mean_scores(out.reports);
  return out;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_PIPELINE_HPP
