// Clusters a small stochastic block model with the node-wise sensor and prints
// the learned order distribution.

#include <iostream>

#include "smoothsense/smoothsense.hpp"

int main() {
  using namespace smoothsense;
  SbmSpec spec;
  spec.block_sizes = {30, 30, 30};
  spec.p_in = 0.3;
  spec.p_out = 0.02;
  spec.feature_dim = 12;
  spec.feature_noise = 0.4;
  spec.seed = 7;
  const AttributedGraph graph = generate_sbm(spec);

  TrainConfig config;
  config.mode = Mode::nas_gc;
  config.max_order = 10;
  config.hidden_dim = 16;
  config.max_epochs = 30;
  const RunReport report = run_pipeline(graph, config, {"sbm", {}, {}});

  std::cout << "status " << report.status << ", epochs " << report.epochs.size() << "\n";
  if (report.final_scores) {
    std::cout << "acc " << report.final_scores->accuracy << "  nmi " << report.final_scores->nmi
              << "  f1 " << report.final_scores->f1 << "\n";
  }
  std::cout << "order  nodes\n";
  for (const auto& [order, count] : report.order_histogram) {
    std::cout << order << "  " << count << "\n";
  }
}
