// Randomized property checks shared by the unit suite and the acceptance binary.
#ifndef SMOOTHSENSE_TESTS_PROPERTY_CHECKS_HPP
#define SMOOTHSENSE_TESTS_PROPERTY_CHECKS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smoothsense/smoothsense.hpp"

#include "oracles.hpp"

namespace checks {

using namespace smoothsense;

struct CheckResult {
  bool pass = true;
  std::string detail;
};

/// Normalized smoothness never rises from layer k-1 to layer k, with the
/// filter built without self-loops.
inline CheckResult monotone_smoothness(int graphs = 50, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> size(5, 30);
  CheckResult out;
  double worst = -1e300;
  long comparisons = 0;
  for (int t = 0; t < graphs; ++t) {
    const Index n = size(rng);
    auto edges = oracle::random_connected_edges(n, 0.15, rng);
    AttributedGraph g = build_graph(edges, oracle::random_matrix(n, 3, rng));
    StackOptions opts;
    opts.filter.self_loops = false;
    const int max_order = 10;
    const FilteredSignalStack stack = filtered_stack(g, max_order, opts);
    for (Index j = 0; j < g.m; ++j) {
      double prev = 0.0;
      bool have_prev = false;
      stack.visit(max_order, [&](int, const Matrix& layer) {
        const Vector col = layer.col(j);
        if (col.norm() < 1e-12) {
          have_prev = false;
          return;
        }
        const double now = normalized_smoothness(g, col);
        if (have_prev) {
          ++comparisons;
          worst = std::max(worst, now - prev);
          if (now > prev + 1e-9) out.pass = false;
        }
        prev = now;
        have_prev = true;
      });
    }
  }
  std::ostringstream s;
  s << comparisons << " layer pairs, largest increase " << worst;
  out.detail = s.str();
  return out;
}

/// Stub halting sequences: N, q and sum(q) against the closed form.
inline CheckResult halting_conservation(int sequences = 1000, std::uint64_t seed = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
  std::uniform_real_distribution<double> eps_dist(0.2, 3.0);
  std::uniform_int_distribution<int> cap(1, 20);
  CheckResult out;
  double worst = 0.0;
  int mismatches = 0;
  for (int t = 0; t < sequences; ++t) {
    const double eps = eps_dist(rng);
    const int m = cap(rng);
    std::vector<double> h(static_cast<std::size_t>(m));
    for (double& v : h) v = unit(rng);
    int calls = 0;
    const UnitSchedule u = accumulate_halting(
        [&](int k) {
          ++calls;
          return h[static_cast<std::size_t>(k - 1)];
        },
        eps, m);
    int expected_n = m;
    double cum = 0.0;
    for (int k = 1; k <= m; ++k) {
      if (cum + h[static_cast<std::size_t>(k - 1)] >= eps) {
        expected_n = k;
        break;
      }
      cum += h[static_cast<std::size_t>(k - 1)];
    }
    double total = 0.0;
    for (double q : u.weights) total += q;
    worst = std::max(worst, std::abs(total - eps));
    bool ok = u.order == expected_n && calls == expected_n &&
              static_cast<int>(u.weights.size()) == expected_n && std::abs(total - eps) <= 1e-12;
    for (int k = 1; ok && k < u.order; ++k) {
      ok = u.weights[static_cast<std::size_t>(k - 1)] == h[static_cast<std::size_t>(k - 1)];
    }
    if (!ok) ++mismatches;
  }
  out.pass = mismatches == 0;
  std::ostringstream s;
  s << sequences << " sequences, " << mismatches << " mismatches, max |sum q - eps| " << worst;
  out.detail = s.str();
  return out;
}

namespace detail_fd {

inline std::vector<double> flatten(const SensorParams& p) {
  std::vector<double> out;
  p.for_each_tensor([&](const char*, const double* d, Index size) { out.insert(out.end(), d, d + size); });
  return out;
}

inline void unflatten(SensorParams& p, const std::vector<double>& theta) {
  std::size_t at = 0;
  p.for_each_tensor([&](const char*, double* d, Index size) {
    for (Index i = 0; i < size; ++i) d[i] = theta[at++];
  });
}

}  // namespace detail_fd

struct GradientInstance {
  CellKind cell = CellKind::gated_recurrent;
  bool graph_level = false;
  std::uint64_t seed = 0;
};

/// Largest relative error between the analytic gradient and central
/// differences on one random instance (n=6, m=3, d=4, M=5, orders held fixed).
inline double gradient_error(const GradientInstance& inst, std::string* where = nullptr) {
  std::mt19937_64 rng(inst.seed);
  const Index n = 6, m = 3, d = 4;
  const int max_order = 5;
  AttributedGraph g = build_graph(oracle::random_connected_edges(n, 0.3, rng), oracle::random_matrix(n, m, rng));
  const FilteredSignalStack stack = filtered_stack(g, max_order);
  SensorParams p = init_params(inst.cell, m, d, inst.seed + 1000);
  std::normal_distribution<double> normal(0.0, 0.5);
  p.halt_bias = -1.0 + normal(rng);
  if (inst.graph_level) {
    p = with_graph_pooling(std::move(p));
    for (Index i = 0; i < p.pooling->weight.size(); ++i) p.pooling->weight.data()[i] += 0.3 * normal(rng);
    for (Index i = 0; i < p.pooling->bias.size(); ++i) p.pooling->bias[i] = 0.3 * normal(rng);
  }
  std::uniform_int_distribution<int> order(1, max_order);
  std::vector<int> forced(static_cast<std::size_t>(n));
  for (int& o : forced) o = order(rng);
  const int graph_order = order(rng);
  std::vector<int> assign = {0, 0, 0, 1, 1, 1};
  std::shuffle(assign.begin(), assign.end(), rng);
  const double lt = 1.0 + std::abs(normal(rng)), ls = 1.0 + std::abs(normal(rng));

  auto forward = [&](const SensorParams& q) {
    return inst.graph_level ? forward_graph(q, stack, 1.0, max_order, graph_order)
                            : forward_nodes(q, stack, 1.0, max_order, &forced);
  };
  const SensorForward fwd = forward(p);
  const LossValue loss = evaluate_loss(fwd.representation, assign, 2, lt, ls, true);
  const std::vector<double> analytic = detail_fd::flatten(sensor_backward(p, stack, fwd, loss.gradient));

  SensorParams work = p;
  const auto numeric = oracle::central_differences(
      [&](const std::vector<double>& theta) {
        detail_fd::unflatten(work, theta);
        return evaluate_loss(forward(work).representation, assign, 2, lt, ls, false).total;
      },
      detail_fd::flatten(p));

  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    const double err = std::abs(analytic[i] - numeric[i]) / scale;
    if (err > worst) {
      worst = err;
      if (where) {
        std::ostringstream s;
        s << "coordinate " << i << " analytic " << analytic[i] << " numeric " << numeric[i];
        *where = s.str();
      }
    }
  }
  return worst;
}

/// 20 instances: five for each combination of cell kind and mode.
inline CheckResult gradient_checks(int instances = 20) {
  CheckResult out;
  double worst = 0.0;
  std::string where;
  for (int i = 0; i < instances; ++i) {
    GradientInstance inst;
    inst.cell = (i % 2 == 0) ? CellKind::gated_recurrent : CellKind::simple_recurrent;
    inst.graph_level = (i / 2) % 2 == 1;
    inst.seed = 100 + static_cast<std::uint64_t>(i);
    std::string at;
    const double err = gradient_error(inst, &at);
    if (err > worst) {
      worst = err;
      where = "instance " + std::to_string(i) + ", " + at;
    }
  }
  out.pass = worst < 1e-4;
  std::ostringstream s;
  s << instances << " instances, max relative error " << worst;
  if (!where.empty()) s << " (" << where << ")";
  out.detail = s.str();
  return out;
}

/// Residual and orthonormality of the top eigenpairs on random symmetric
/// matrices, through both the dense and the Lanczos paths.
inline CheckResult eigen_residuals(int matrices = 30, std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> size(4, 80);
  CheckResult out;
  double worst_res = 0.0, worst_orth = 0.0;
  for (int t = 0; t < matrices; ++t) {
    const Index n = size(rng);
    Matrix a = oracle::random_matrix(n, n, rng);
    Matrix w = 0.5 * (a + a.transpose());
    std::uniform_int_distribution<int> rdist(1, static_cast<int>(std::min<Index>(6, n)));
    const int r = rdist(rng);
    for (bool lanczos : {false, true}) {
      EigenOptions opts;
      opts.dense_max_nodes = lanczos ? 0 : n;
      opts.seed = seed + static_cast<std::uint64_t>(t);
      const EigenPairs e = top_eigenvectors(w, r, opts);
      const double frob = w.norm();
      for (int k = 0; k < r; ++k) {
        const Vector v = e.vectors.col(k);
        const double res = (w * v - e.values[k] * v).norm() / frob;
        worst_res = std::max(worst_res, res);
      }
      const Eigen::MatrixXd gram = e.vectors.transpose() * e.vectors;
      worst_orth = std::max(worst_orth, (gram - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff());
    }
  }
  out.pass = worst_res <= 1e-8 && worst_orth <= 1e-8;
  std::ostringstream s;
  s << matrices << " matrices x 2 solvers, max residual/||W||_F " << worst_res << ", max orthonormality error "
    << worst_orth;
  out.detail = s.str();
  return out;
}

/// Hungarian accuracy vs exhaustive search, NMI vs the contingency formula.
inline CheckResult metric_oracles(int cases = 300, std::uint64_t seed = 14) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ksize(1, 5), nsize(1, 12);
  CheckResult out;
  int acc_bad = 0, nmi_bad = 0;
  double worst_nmi = 0.0;
  for (int t = 0; t < cases; ++t) {
    const int n = nsize(rng), kp = ksize(rng), kt = ksize(rng);
    std::uniform_int_distribution<int> pd(0, kp - 1), td(0, kt - 1);
    std::vector<int> pred(static_cast<std::size_t>(n)), truth(static_cast<std::size_t>(n));
    for (int& v : pred) v = pd(rng);
    for (int& v : truth) v = td(rng);
    if (std::abs(clustering_accuracy(pred, truth) - oracle::brute_force_accuracy(pred, truth)) > 1e-15) ++acc_bad;
    const bool trivial = std::all_of(pred.begin(), pred.end(), [&](int v) { return v == pred[0]; }) ||
                         std::all_of(truth.begin(), truth.end(), [&](int v) { return v == truth[0]; });
    if (!trivial) {
      const double diff = std::abs(nmi(pred, truth) - oracle::contingency_nmi(pred, truth));
      worst_nmi = std::max(worst_nmi, diff);
      if (diff > 1e-12) ++nmi_bad;
    }
  }
  out.pass = acc_bad == 0 && nmi_bad == 0;
  std::ostringstream s;
  s << cases << " cases, accuracy mismatches " << acc_bad << ", NMI mismatches " << nmi_bad
    << " (max diff " << worst_nmi << ")";
  out.detail = s.str();
  return out;
}

/// The two-cluster layout {(0,0),(0,1)} | {(5,0),(5,1)}.
inline CheckResult hand_layout_losses() {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 5, 0, 5, 1;
  const std::vector<int> assign = {0, 0, 1, 1};
  const double tig = loss_tightness(x, assign, 2);
  const double sep = loss_separation(x, assign, 2);
  const auto [otig, osep] = oracle::enumerate_losses(x.cast<double>(), assign);
  const double expected_sep = (10.0 + 2.0 * std::sqrt(26.0)) / 2.0;
  CheckResult out;
  out.pass = std::abs(tig - 1.0) <= 1e-12 && std::abs(sep - expected_sep) <= 1e-12 &&
             std::abs(tig - otig) <= 1e-12 && std::abs(sep - osep) <= 1e-12 && std::abs(sep - 10.099) < 5e-4;
  std::ostringstream s;
  s.precision(10);
  s << "L_tig " << tig << " (expected 1), L_sep " << sep << " (expected " << expected_sep << ")";
  out.detail = s.str();
  return out;
}

}  // namespace checks

#endif  // SMOOTHSENSE_TESTS_PROPERTY_CHECKS_HPP
