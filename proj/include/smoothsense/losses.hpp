#ifndef SMOOTHSENSE_LOSSES_HPP
#define SMOOTHSENSE_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smoothsense/errors.hpp"
#include "smoothsense/graph.hpp"

namespace smoothsense {

// Distances are Euclidean throughout.
//
//   L_tig = 1/|C| sum_c 1/(|c|(|c|-1)) sum_{i != j in c} ||x_i - x_j||
//   L_sep = 1/|C| sum_c 1/(|c|(|c|-1)) sum_{i in c, j not in c} ||x_i - x_j||
//
// The separation normalizer is the intra-cluster pair count, not the
// inter-cluster one; lambda_sep absorbs the difference. Clusters with fewer
// than two members contribute nothing to either sum.

namespace detail {

inline void check_partition(const Matrix& x, std::span<const int> assignments, int clusters) {
  if (static_cast<Index>(assignments.size()) != x.rows()) {
    throw dimension_mismatch("partition has " + std::to_string(assignments.size()) +
                             " entries for " + std::to_string(x.rows()) + " rows");
  }
  if (clusters < 1) throw invalid_input("cluster count must be positive");
  for (int c : assignments) {
    if (c < 0 || c >= clusters) {
      throw invalid_input("cluster id " + std::to_string(c) + " outside 0.." +
                          std::to_string(clusters - 1));
    }
  }
}

inline std::vector<Index> cluster_sizes(std::span<const int> assignments, int clusters) {
  std::vector<Index> sizes(static_cast<std::size_t>(clusters), 0);
  for (int c : assignments) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

inline double row_distance(const Matrix& x, Index i, Index j) {
  return (x.row(i) - x.row(j)).norm();
}

/// Per-cluster pair weight 1/(|C| |c| (|c|-1)); zero for singletons and empty clusters.
inline std::vector<double> pair_weights(const std::vector<Index>& sizes) {
  int nonempty = 0;
  for (Index s : sizes) nonempty += s > 0 ? 1 : 0;
  std::vector<double> w(sizes.size(), 0.0);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] >= 2) {
      w[c] = 1.0 / (static_cast<double>(nonempty) * static_cast<double>(sizes[c]) *
                    static_cast<double>(sizes[c] - 1));
    }
  }
  return w;
}

}  // namespace detail

/// Mean distance from row i to the other members of its cluster; empty for singletons.
inline std::optional<double> node_tightness(const Matrix& x, std::span<const int> assignments,
                                           Index i) {
  if (static_cast<Index>(assignments.size()) != x.rows() || i < 0 || i >= x.rows()) {
    throw dimension_mismatch("node index or partition size does not match representations");
  }
  const int own = assignments[static_cast<std::size_t>(i)];
  double total = 0.0;
  Index count = 0;
  for (Index j = 0; j < x.rows(); ++j) {
    if (j == i || assignments[static_cast<std::size_t>(j)] != own) continue;
    total += detail::row_distance(x, i, j);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

/// Mean over the other clusters of the mean distance from row i to that cluster.
inline double node_separation(const Matrix& x, std::span<const int> assignments, Index i) {
  if (static_cast<Index>(assignments.size()) != x.rows() || i < 0 || i >= x.rows()) {
    throw dimension_mismatch("node index or partition size does not match representations");
  }
  const int clusters = *std::max_element(assignments.begin(), assignments.end()) + 1;
  std::vector<double> sum(static_cast<std::size_t>(clusters), 0.0);
  std::vector<Index> count(static_cast<std::size_t>(clusters), 0);
  const int own = assignments[static_cast<std::size_t>(i)];
  for (Index j = 0; j < x.rows(); ++j) {
    const int c = assignments[static_cast<std::size_t>(j)];
    if (c == own) continue;
    sum[static_cast<std::size_t>(c)] += detail::row_distance(x, i, j);
    ++count[static_cast<std::size_t>(c)];
  }
  double total = 0.0;
  int foreign = 0;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    if (count[c] == 0) continue;
    total += sum[c] / static_cast<double>(count[c]);
    ++foreign;
  }
  if (foreign == 0) throw invalid_input("separation needs at least two non-empty clusters");
  return total / static_cast<double>(foreign);
}

struct LossOptions {
  /// Up to this many nodes every ordered pair is summed exactly.
  Index exact_max_nodes = 5000;
  /// Ordered pairs drawn per term when sampling.
  std::int64_t pair_budget = 2'000'000;
  std::uint64_t seed = 0;
};

struct LossValue {
  double tightness = 0.0;
  double separation = 0.0;
  double total = 0.0;
  Matrix gradient;  // dL/dX_bar, filled when requested
  std::size_t singleton_clusters = 0;
  bool sampled = false;
};

namespace detail {

inline double combine(double tightness, double separation, double lambda_tig, double lambda_sep) {
  if (lambda_sep == 0.0) return lambda_tig * tightness;
  if (!(separation > 0.0)) {
    throw degenerate_separation(
        "separation loss is zero: every cluster collapsed onto the same point");
  }
  return lambda_tig * tightness + lambda_sep / separation;
}

inline LossValue exact_loss(const Matrix& x, std::span<const int> assignments,
                            const std::vector<double>& w, double lambda_tig, double lambda_sep,
                            bool with_gradient) {
  const Index n = x.rows();
  LossValue out;
  Matrix dist(n, n);
  double tig = 0.0;
  double sep = 0.0;
  for (Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    const int ci = assignments[static_cast<std::size_t>(i)];
    const double wi = w[static_cast<std::size_t>(ci)];
    for (Index j = i + 1; j < n; ++j) {
      const double d = row_distance(x, i, j);
      dist(i, j) = d;
      dist(j, i) = d;
      const int cj = assignments[static_cast<std::size_t>(j)];
      if (ci == cj) {
        tig += 2.0 * wi * d;
      } else {
        sep += (wi + w[static_cast<std::size_t>(cj)]) * d;
      }
    }
  }
  out.tightness = tig;
  out.separation = sep;
  out.total = combine(tig, sep, lambda_tig, lambda_sep);
  if (!with_gradient) return out;

  // dL/dx_i = sum_j coef_ij (x_i - x_j) with coef_ij = (a_ij + a_ji) / d_ij.
  const double sep_scale = lambda_sep == 0.0 ? 0.0 : -lambda_sep / (sep * sep);
  Matrix coef = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const int ci = assignments[static_cast<std::size_t>(i)];
    const double wi = w[static_cast<std::size_t>(ci)];
    for (Index j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      if (d == 0.0) continue;
      const int cj = assignments[static_cast<std::size_t>(j)];
      const double c = ci == cj ? lambda_tig * 2.0 * wi / d
                                : sep_scale * (wi + w[static_cast<std::size_t>(cj)]) / d;
      coef(i, j) = c;
      coef(j, i) = c;
    }
  }
  Vector row_sum = coef.rowwise().sum();
  out.gradient = row_sum.asDiagonal() * x;
  out.gradient.noalias() -= coef * x;
  return out;
}

inline LossValue sampled_loss(const Matrix& x, std::span<const int> assignments,
                              const std::vector<double>& w, double lambda_tig, double lambda_sep,
                              bool with_gradient, const LossOptions& options) {
  const Index n = x.rows();
  LossValue out;
  out.sampled = true;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<Index> first(0, n - 1);
  std::uniform_int_distribution<Index> second(0, n - 2);
  const double scale = static_cast<double>(n) * static_cast<double>(n - 1) /
                       static_cast<double>(options.pair_budget);

  struct Pair {
    Index i, j;
    double d;
    bool same;
    double weight;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(options.pair_budget));
  double tig = 0.0;
  double sep = 0.0;
  for (std::int64_t s = 0; s < options.pair_budget; ++s) {
    const Index i = first(rng);
    Index j = second(rng);
    if (j >= i) ++j;
    const int ci = assignments[static_cast<std::size_t>(i)];
    const int cj = assignments[static_cast<std::size_t>(j)];
    const double d = row_distance(x, i, j);
    const double weight = w[static_cast<std::size_t>(ci)];
    if (ci == cj) {
      tig += weight * d;
    } else {
      sep += weight * d;
    }
    if (with_gradient) pairs.push_back({i, j, d, ci == cj, weight});
  }
  out.tightness = scale * tig;
  out.separation = scale * sep;
  out.total = combine(out.tightness, out.separation, lambda_tig, lambda_sep);
  if (!with_gradient) return out;

  const double sep_scale =
      lambda_sep == 0.0 ? 0.0 : -lambda_sep / (out.separation * out.separation);
  out.gradient = Matrix::Zero(n, x.cols());
  for (const auto& p : pairs) {
    if (p.d == 0.0) continue;
    const double c = scale * p.weight * (p.same ? lambda_tig : sep_scale) / p.d;
    const auto diff = (x.row(p.i) - x.row(p.j)).eval();
    out.gradient.row(p.i) += c * diff;
    out.gradient.row(p.j) -= c * diff;
  }
  return out;
}

}  // namespace detail

/// Both loss terms, their combination lambda_tig*L_tig + lambda_sep/L_sep and,
/// optionally, the gradient with respect to the representations.
inline LossValue evaluate_loss(const Matrix& x, std::span<const int> assignments, int clusters,
                               double lambda_tig, double lambda_sep, bool with_gradient = true,
                               const LossOptions& options = {}) {
  detail::check_partition(x, assignments, clusters);
  if (lambda_tig < 0.0 || lambda_sep < 0.0) throw invalid_input("loss weights must be >= 0");
  const auto sizes = detail::cluster_sizes(assignments, clusters);
  const auto w = detail::pair_weights(sizes);
  LossValue out = x.rows() <= options.exact_max_nodes
                      ? detail::exact_loss(x, assignments, w, lambda_tig, lambda_sep, with_gradient)
                      : detail::sampled_loss(x, assignments, w, lambda_tig, lambda_sep,
                                             with_gradient, options);
  for (Index s : sizes) out.singleton_clusters += s == 1 ? 1 : 0;
  return out;
}

inline double loss_tightness(const Matrix& x, std::span<const int> assignments, int clusters,
                             const LossOptions& options = {}) {
  return evaluate_loss(x, assignments, clusters, 1.0, 0.0, false, options).tightness;
}

inline double loss_separation(const Matrix& x, std::span<const int> assignments, int clusters,
                              const LossOptions& options = {}) {
  return evaluate_loss(x, assignments, clusters, 1.0, 0.0, false, options).separation;
}

inline double combined_loss(const Matrix& x, std::span<const int> assignments, int clusters,
                            double lambda_tig, double lambda_sep,
                            const LossOptions& options = {}) {
  return evaluate_loss(x, assignments, clusters, lambda_tig, lambda_sep, false, options).total;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_LOSSES_HPP
