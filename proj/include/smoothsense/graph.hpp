#ifndef SMOOTHSENSE_GRAPH_HPP
#define SMOOTHSENSE_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "smoothsense/errors.hpp"

namespace smoothsense {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Undirected edge, stored with `u < v`.
struct Edge {
  Index u = 0;
  Index v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Nodes, an undirected unweighted edge set, a dense feature matrix and optional labels.
struct AttributedGraph {
  Index n = 0;
  Index m = 0;
  std::vector<Edge> edges;  // sorted, unique, no self-loops
  Matrix features;          // n x m
  std::optional<std::vector<int>> labels;
  std::optional<int> cluster_count;

  // Provenance carried through from loaders; empty for synthetic graphs.
  std::vector<std::string> node_names;
  std::vector<std::string> class_names;
  std::size_t dropped_self_loops = 0;
  std::size_t duplicate_edges = 0;

  std::vector<Index> degrees() const {
    std::vector<Index> deg(static_cast<std::size_t>(n), 0);
    for (const auto& e : edges) {
      ++deg[static_cast<std::size_t>(e.u)];
      ++deg[static_cast<std::size_t>(e.v)];
    }
    return deg;
  }

  /// Number of clusters to look for: explicit count, else number of label classes.
  std::optional<int> expected_clusters() const {
    if (cluster_count) return cluster_count;
    if (labels && !labels->empty()) {
      return *std::max_element(labels->begin(), labels->end()) + 1;
    }
    return std::nullopt;
  }
};

/// Validates inputs and canonicalizes the edge list. Self-loops are dropped and
/// counted; reversed duplicates collapse onto one stored edge.
inline AttributedGraph build_graph(const std::vector<std::pair<Index, Index>>& edge_list,
                                   Matrix features,
                                   std::optional<std::vector<int>> labels = std::nullopt) {
  AttributedGraph g;
  g.n = features.rows();
  g.m = features.cols();

  for (Index i = 0; i < features.rows(); ++i) {
    for (Index j = 0; j < features.cols(); ++j) {
      if (!std::isfinite(features(i, j))) {
        throw invalid_input("non-finite feature at row " + std::to_string(i) + ", column " +
                            std::to_string(j));
      }
    }
  }

  g.edges.reserve(edge_list.size());
  for (const auto& [a, b] : edge_list) {
    if (a < 0 || b < 0 || a >= g.n || b >= g.n) {
      throw invalid_input("edge endpoint out of range: (" + std::to_string(a) + ", " +
                          std::to_string(b) + ") with n = " + std::to_string(g.n));
    }
    if (a == b) {
      ++g.dropped_self_loops;
      continue;
    }
    g.edges.push_back(Edge{std::min(a, b), std::max(a, b)});
  }
  std::sort(g.edges.begin(), g.edges.end());
  const auto last = std::unique(g.edges.begin(), g.edges.end());
  g.duplicate_edges = static_cast<std::size_t>(std::distance(last, g.edges.end()));
  g.edges.erase(last, g.edges.end());

  if (labels) {
    if (static_cast<Index>(labels->size()) != g.n) {
      throw invalid_input("label count " + std::to_string(labels->size()) +
                          " does not match node count " + std::to_string(g.n));
    }
    for (int c : *labels) {
      if (c < 0) throw invalid_input("negative class id in labels");
    }
  }
  g.labels = std::move(labels);
  g.features = std::move(features);
  return g;
}

struct FilterOptions {
  /// Filter on A + I instead of A. The smoothness measure always uses A.
  bool self_loops = true;
};

/// The low-pass filter G = I - L/2 = (I + D^{-1/2} A D^{-1/2}) / 2, kept as the
/// sparse normalized adjacency S so that G Y = (Y + S Y) / 2.
class LowPassFilter {
 public:
  LowPassFilter() = default;

  LowPassFilter(const AttributedGraph& graph, FilterOptions options = {})
      : n_(graph.n), self_loops_(options.self_loops) {
    std::vector<double> deg(static_cast<std::size_t>(n_), self_loops_ ? 1.0 : 0.0);
    for (const auto& e : graph.edges) {
      deg[static_cast<std::size_t>(e.u)] += 1.0;
      deg[static_cast<std::size_t>(e.v)] += 1.0;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * graph.edges.size() + (self_loops_ ? static_cast<std::size_t>(n_) : 0));
    for (const auto& e : graph.edges) {
      const double w = 1.0 / std::sqrt(deg[static_cast<std::size_t>(e.u)] *
                                       deg[static_cast<std::size_t>(e.v)]);
      triplets.emplace_back(e.u, e.v, w);
      triplets.emplace_back(e.v, e.u, w);
    }
    if (self_loops_) {
      for (Index i = 0; i < n_; ++i) {
        triplets.emplace_back(i, i, 1.0 / deg[static_cast<std::size_t>(i)]);
      }
    }
    adjacency_.resize(n_, n_);
    adjacency_.setFromTriplets(triplets.begin(), triplets.end());
    adjacency_.makeCompressed();
  }

  Index size() const { return n_; }
  bool self_loops() const { return self_loops_; }
  const SparseMatrix& normalized_adjacency() const { return adjacency_; }

  Matrix apply(const Matrix& signals) const {
    if (signals.rows() != n_) {
      throw dimension_mismatch("filter expects " + std::to_string(n_) + " rows, got " +
                               std::to_string(signals.rows()));
    }
    Matrix out = adjacency_ * signals;
    out += signals;
    out *= 0.5;
    return out;
  }

  Vector apply(const Vector& signal) const {
    if (signal.size() != n_) {
      throw dimension_mismatch("filter expects length " + std::to_string(n_) + ", got " +
                               std::to_string(signal.size()));
    }
    Vector out = adjacency_ * signal;
    out += signal;
    out *= 0.5;
    return out;
  }

  /// Dense G, for small graphs and tests.
  Matrix dense() const {
    Matrix g = Matrix(adjacency_);
    g.diagonal().array() += 1.0;
    g *= 0.5;
    return g;
  }

 private:
  Index n_ = 0;
  bool self_loops_ = true;
  SparseMatrix adjacency_;
};

inline Matrix apply_filter(const AttributedGraph& graph, const Matrix& signals,
                           FilterOptions options = {}) {
  return LowPassFilter(graph, options).apply(signals);
}

/// Successive filtered signals G^k X for k = 1..M. Layers are held in memory
/// unless that would exceed the byte budget, in which case they are recomputed
/// on every visit.
class FilteredSignalStack {
 public:
  FilteredSignalStack() = default;

  FilteredSignalStack(LowPassFilter filter, Matrix origin, int max_order, bool store)
      : filter_(std::move(filter)), origin_(std::move(origin)), max_order_(max_order) {
    if (max_order_ < 1) throw invalid_input("max order must be at least 1");
    if (store) {
      layers_.reserve(static_cast<std::size_t>(max_order_));
      Matrix current = filter_.apply(origin_);
      for (int k = 1; k <= max_order_; ++k) {
        if (k > 1) current = filter_.apply(current);
        layers_.push_back(current);
      }
    }
  }

  int max_order() const { return max_order_; }
  bool stored() const { return !layers_.empty(); }
  Index rows() const { return origin_.rows(); }
  Index cols() const { return origin_.cols(); }
  const Matrix& origin() const { return origin_; }
  const LowPassFilter& filter() const { return filter_; }

  /// Layer k (1-based). Only available when the stack is stored.
  const Matrix& layer(int k) const {
    if (k < 1 || k > max_order_) {
      throw invalid_input("layer " + std::to_string(k) + " outside 1.." +
                          std::to_string(max_order_));
    }
    if (!stored()) throw invalid_input("layer access on a streaming stack; use visit()");
    return layers_[static_cast<std::size_t>(k - 1)];
  }

  Matrix layer_copy(int k) const {
    if (stored()) return layer(k);
    Matrix out;
    visit(k, [&](int j, const Matrix& y) {
      if (j == k) out = y;
    });
    return out;
  }

  /// Calls fn(k, G^k X) for k = 1..up_to in increasing order.
  template <class Fn>
  void visit(int up_to, Fn&& fn) const {
    up_to = std::min(up_to, max_order_);
    if (stored()) {
      for (int k = 1; k <= up_to; ++k) fn(k, layers_[static_cast<std::size_t>(k - 1)]);
      return;
    }
    if (up_to < 1) return;
    Matrix current = filter_.apply(origin_);
    for (int k = 1; k <= up_to; ++k) {
      if (k > 1) current = filter_.apply(current);
      fn(k, static_cast<const Matrix&>(current));
    }
  }

 private:
  LowPassFilter filter_;
  Matrix origin_;
  int max_order_ = 0;
  std::vector<Matrix> layers_;
};

struct StackOptions {
  FilterOptions filter;
  /// Upper bound on bytes held by stored layers; above it the stack streams.
  std::size_t memory_budget_bytes = std::size_t{1} << 31;
};

inline FilteredSignalStack filtered_stack(const AttributedGraph& graph, int max_order,
                                          StackOptions options = {}) {
  if (max_order < 1) throw invalid_input("max order must be at least 1");
  const double bytes = static_cast<double>(max_order) * static_cast<double>(graph.n) *
                       static_cast<double>(graph.m) * sizeof(double);
  const bool store = bytes <= static_cast<double>(options.memory_budget_bytes);
  return FilteredSignalStack(LowPassFilter(graph, options.filter), graph.features, max_order,
                             store);
}

/// Omega(f) = f^T L f with L = I - D^{-1/2} A D^{-1/2} on the raw adjacency.
/// Isolated nodes keep an identity row in L.
inline double smoothness(const AttributedGraph& graph, const Vector& signal) {
  if (signal.size() != graph.n) {
    throw dimension_mismatch("signal length " + std::to_string(signal.size()) +
                             " does not match node count " + std::to_string(graph.n));
  }
  const auto deg = graph.degrees();
  double total = 0.0;
  for (const auto& e : graph.edges) {
    const double a = signal[e.u] / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(e.u)]));
    const double b = signal[e.v] / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(e.v)]));
    total += (a - b) * (a - b);
  }
  for (Index i = 0; i < graph.n; ++i) {
    if (deg[static_cast<std::size_t>(i)] == 0) total += signal[i] * signal[i];
  }
  return total;
}

/// Omega(f / ||f||). Throws zero_signal for the zero vector.
inline double normalized_smoothness(const AttributedGraph& graph, const Vector& signal) {
  const double norm = signal.norm();
  if (!(norm > 0.0)) throw zero_signal("smoothness of a zero signal is undefined");
  return smoothness(graph, signal / norm);
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_GRAPH_HPP
