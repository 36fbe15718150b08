#ifndef SMOOTHSENSE_TEST_FIXTURES_HPP
#define SMOOTHSENSE_TEST_FIXTURES_HPP

#include <utility>
#include <vector>

#include "smoothsense/config.hpp"
#include "smoothsense/graph.hpp"

namespace fixtures {

using smoothsense::Index;

/// Two disjoint `size`-cliques; clique c carries the unit feature e_c.
inline smoothsense::AttributedGraph two_cliques(Index size = 10) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index c = 0; c < 2; ++c) {
    for (Index i = 0; i < size; ++i) {
      for (Index j = i + 1; j < size; ++j) edges.emplace_back(c * size + i, c * size + j);
    }
  }
  smoothsense::Matrix x = smoothsense::Matrix::Zero(2 * size, 2);
  std::vector<int> labels(static_cast<std::size_t>(2 * size));
  for (Index i = 0; i < 2 * size; ++i) {
    const int c = i < size ? 0 : 1;
    x(i, c) = 1.0;
    labels[static_cast<std::size_t>(i)] = c;
  }
  return smoothsense::build_graph(edges, x, labels);
}

/// Small, fast training setup for fixtures.
inline smoothsense::TrainConfig quick_config(smoothsense::Mode mode) {
  smoothsense::TrainConfig c;
  c.mode = mode;
  c.max_order = 8;
  c.fixed_k = 4;
  c.hidden_dim = 8;
  c.max_epochs = 15;
  return c;
}

}  // namespace fixtures

#endif  // SMOOTHSENSE_TEST_FIXTURES_HPP
