#ifndef SMOOTHSENSE_METRICS_HPP
#define SMOOTHSENSE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smoothsense/errors.hpp"

namespace smoothsense {

/// Minimum-cost assignment on a square cost matrix (Hungarian method with
/// potentials, O(k^3)). Returns row -> column.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int k = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
  std::vector<int> match(k + 1, 0), way(k + 1, 0);  // match[col] = row, 1-based
  for (int row = 1; row <= k; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[col0] = 1;
      const int r0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= k; ++col) {
        if (used[col]) continue;
        const double cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= k; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(k, -1);
  for (int col = 1; col <= k; ++col) {
    if (match[col] > 0) assignment[match[col] - 1] = col - 1;
  }
  return assignment;
}

/// Optimal injective mapping of predicted clusters onto true classes.
struct LabelAlignment {
  std::vector<int> pred_ids;   // distinct predicted ids, ascending
  std::vector<int> true_ids;   // distinct true ids, ascending
  std::vector<std::vector<long>> confusion;  // pred x true counts
  /// mapping[p] = index into true_ids, or -1 when the cluster stays unmatched.
  std::vector<int> mapping;
  long matched = 0;
};

namespace detail {

inline std::vector<int> distinct(std::span<const int> labels) {
  std::vector<int> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline int index_of(const std::vector<int>& ids, int value) {
  return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), value) - ids.begin());
}

inline void check_labels(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw dimension_mismatch("prediction has " + std::to_string(pred.size()) +
                             " labels, ground truth " + std::to_string(truth.size()));
  }
  if (pred.empty()) throw invalid_input("metrics need at least one labelled node");
}

}  // namespace detail

/// Confusion matrix padded to square with zeros, solved by the Hungarian method
/// on negated counts.
inline LabelAlignment align_labels(std::span<const int> pred, std::span<const int> truth) {
  detail::check_labels(pred, truth);
  LabelAlignment a;
  a.pred_ids = detail::distinct(pred);
  a.true_ids = detail::distinct(truth);
  const std::size_t np = a.pred_ids.size();
  const std::size_t nt = a.true_ids.size();
  a.confusion.assign(np, std::vector<long>(nt, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++a.confusion[static_cast<std::size_t>(detail::index_of(a.pred_ids, pred[i]))]
                 [static_cast<std::size_t>(detail::index_of(a.true_ids, truth[i]))];
  }
  const std::size_t k = std::max(np, nt);
  std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
  std::vector<long> pred_size(np, 0), true_size(nt, 0);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t t = 0; t < nt; ++t) {
      pred_size[p] += a.confusion[p][t];
      true_size[t] += a.confusion[p][t];
    }
  }
  // Ties in overlap go to the pairing with the larger summed pairwise F1; the
  // tie-break term stays below one count.
  const double tie_scale = 1.0 / static_cast<double>(k + 1);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t t = 0; t < nt; ++t) {
      const double hit = static_cast<double>(a.confusion[p][t]);
      const double f1 = 2.0 * hit / static_cast<double>(pred_size[p] + true_size[t]);
      cost[p][t] = -(hit + tie_scale * f1);
    }
  }
  const auto assignment = hungarian(cost);
  a.mapping.assign(np, -1);
  for (std::size_t p = 0; p < np; ++p) {
    const int t = assignment[p];
    if (t >= 0 && static_cast<std::size_t>(t) < nt) {
      a.mapping[p] = t;
      a.matched += a.confusion[p][static_cast<std::size_t>(t)];
    }
  }
  return a;
}

/// Fraction of nodes whose cluster maps to their class under the best mapping.
inline double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const auto a = align_labels(pred, truth);
  return static_cast<double>(a.matched) / static_cast<double>(pred.size());
}

enum class NmiNormalization { geometric, arithmetic };

/// I(pred; truth) normalized by the geometric (default) or arithmetic mean of
/// the two entropies. Natural log; empty cells contribute nothing.
inline double nmi(std::span<const int> pred, std::span<const int> truth,
                  NmiNormalization norm = NmiNormalization::geometric) {
  detail::check_labels(pred, truth);
  const auto a = align_labels(pred, truth);
  const double n = static_cast<double>(pred.size());
  std::vector<double> row(a.pred_ids.size(), 0.0), col(a.true_ids.size(), 0.0);
  for (std::size_t p = 0; p < row.size(); ++p) {
    for (std::size_t t = 0; t < col.size(); ++t) {
      row[p] += static_cast<double>(a.confusion[p][t]);
      col[t] += static_cast<double>(a.confusion[p][t]);
    }
  }
  double mi = 0.0;
  for (std::size_t p = 0; p < row.size(); ++p) {
    for (std::size_t t = 0; t < col.size(); ++t) {
      const double c = static_cast<double>(a.confusion[p][t]);
      if (c > 0.0) mi += c / n * std::log(c * n / (row[p] * col[t]));
    }
  }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts) {
      if (c > 0.0) h -= c / n * std::log(c / n);
    }
    return h;
  };
  const double hp = entropy(row);
  const double ht = entropy(col);
  const double denom = norm == NmiNormalization::geometric ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
  if (denom <= 0.0) {
    // Both partitions trivial: identical by definition; one trivial: no information.
    return (hp == 0.0 && ht == 0.0) ? 1.0 : 0.0;
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

/// Per-class F1 under the accuracy alignment, averaged over the true classes.
/// A class left without a matched cluster scores 0.
inline double macro_f1(std::span<const int> pred, std::span<const int> truth) {
  const auto a = align_labels(pred, truth);
  const std::size_t nt = a.true_ids.size();
  std::vector<long> pred_size(a.pred_ids.size(), 0), true_size(nt, 0);
  for (std::size_t p = 0; p < a.pred_ids.size(); ++p) {
    for (std::size_t t = 0; t < nt; ++t) {
      pred_size[p] += a.confusion[p][t];
      true_size[t] += a.confusion[p][t];
    }
  }
  double total = 0.0;
  for (std::size_t p = 0; p < a.pred_ids.size(); ++p) {
    const int t = a.mapping[p];
    if (t < 0) continue;
    const double hit = static_cast<double>(a.confusion[p][static_cast<std::size_t>(t)]);
    if (hit == 0.0) continue;
    const double precision = hit / static_cast<double>(pred_size[p]);
    const double recall = hit / static_cast<double>(true_size[static_cast<std::size_t>(t)]);
    total += 2.0 * precision * recall / (precision + recall);
  }
  return total / static_cast<double>(nt);
}

struct ClusteringScores {
  double accuracy = 0.0;
  double nmi = 0.0;
  double f1 = 0.0;
};

inline ClusteringScores score_partition(std::span<const int> pred, std::span<const int> truth,
                                        NmiNormalization norm = NmiNormalization::geometric) {
  return {clustering_accuracy(pred, truth), nmi(pred, truth, norm), macro_f1(pred, truth)};
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_METRICS_HPP
