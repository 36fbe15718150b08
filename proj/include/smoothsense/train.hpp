#ifndef SMOOTHSENSE_TRAIN_HPP
#define SMOOTHSENSE_TRAIN_HPP

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smoothsense/config.hpp"
#include "smoothsense/errors.hpp"
#include "smoothsense/gradients.hpp"
#include "smoothsense/graph.hpp"
#include "smoothsense/losses.hpp"
#include "smoothsense/metrics.hpp"
#include "smoothsense/report.hpp"
#include "smoothsense/sensor.hpp"
#include "smoothsense/spectral.hpp"

namespace smoothsense {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  SensorParams m;
  SensorParams v;
  long t = 0;

  explicit AdamState(const SensorParams& params) : m(params.zeros_like()), v(params.zeros_like()) {}
};

/// One bias-corrected Adam update; increments state.t before use.
inline void adam_step(SensorParams& params, const GradientSet& grads, AdamState& state, double lr,
                      const AdamOptions& opt = {}) {
  if (!(lr > 0.0)) throw invalid_input("learning rate must be positive");
  if (grads.parameter_count() != params.parameter_count()) {
    throw dimension_mismatch("gradient set does not match the parameters");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));

  std::vector<const double*> g_ptr;
  grads.for_each_tensor([&](const char*, const double* data, Index) { g_ptr.push_back(data); });
  std::vector<double*> m_ptr, v_ptr;
  state.m.for_each_tensor([&](const char*, double* data, Index) { m_ptr.push_back(data); });
  state.v.for_each_tensor([&](const char*, double* data, Index) { v_ptr.push_back(data); });
  std::size_t t = 0;
  params.for_each_tensor([&](const char*, double* w, Index size) {
    const double* g = g_ptr[t];
    double* m = m_ptr[t];
    double* v = v_ptr[t];
    for (Index i = 0; i < size; ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
    }
    ++t;
  });
}

/// True when the population standard deviation of the last `window` losses
/// is below `threshold`.
inline bool should_stop_early(std::span<const double> losses, int window, double threshold) {
  if (window < 2) throw invalid_input("early-stop window must be at least 2");
  if (static_cast<int>(losses.size()) < window) return false;
  const auto tail = losses.last(static_cast<std::size_t>(window));
  double mean = 0.0;
  for (double l : tail) mean += l;
  mean /= window;
  double var = 0.0;
  for (double l : tail) var += (l - mean) * (l - mean);
  return std::sqrt(var / window) < threshold;
}

/// Learning rate for a 1-based epoch under the optional annealing schedule.
inline double scheduled_rate(const TrainConfig& c, int epoch) {
  const int decays = std::max(0, epoch - c.anneal_start_epoch);
  return c.learning_rate * std::pow(c.anneal_factor, decays);
}

inline NmiNormalization nmi_normalization(const TrainConfig& c) {
  return c.nmi_normalization == "arithmetic" ? NmiNormalization::arithmetic
                                             : NmiNormalization::geometric;
}

inline ClusterOptions cluster_options(const TrainConfig& c) {
  ClusterOptions o;
  o.eigen.dense_max_nodes = c.dense_eigen_max_nodes;
  o.eigen.seed = c.seed;
  o.kmeans.restarts = c.kmeans_restarts;
  o.kmeans.max_iters = c.kmeans_max_iters;
  o.kernel_dense_max_nodes = c.kernel_dense_max_nodes;
  o.row_normalize = c.row_normalize_embedding;
  return o;
}

inline LossOptions loss_options(const TrainConfig& c, std::uint64_t salt) {
  LossOptions o;
  o.exact_max_nodes = c.exact_pairs_max_nodes;
  o.pair_budget = c.pair_sampling_budget;
  o.seed = c.seed * 0x9e3779b97f4a7c15ULL + salt;
  return o;
}

inline StackOptions stack_options(const TrainConfig& c) {
  StackOptions o;
  o.filter.self_loops = c.self_loops;
  o.memory_budget_bytes = static_cast<std::size_t>(c.memory_budget_mb) * 1024 * 1024;
  return o;
}

inline int required_clusters(const AttributedGraph& g) {
  const auto r = g.expected_clusters();
  if (!r) throw invalid_input("number of clusters unknown: set it or provide labels");
  return *r;
}

struct TrainResult {
  SensorParams params;
  RunReport report;
  double epoch1_tightness = 0.0;
  double epoch1_separation = 0.0;
  double lambda_sep = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline SensorForward run_forward(const SensorParams& p, const FilteredSignalStack& stack,
                                 const TrainConfig& c) {
  return c.mode == Mode::as_gc ? forward_graph(p, stack, c.epsilon, c.max_order)
                               : forward_nodes(p, stack, c.epsilon, c.max_order);
}

inline std::vector<int> node_orders(const HaltingSchedule& s, Index n) {
  if (s.graph_level) return std::vector<int>(static_cast<std::size_t>(n), s.units.front().order);
  return s.orders();
}

inline double mean_of(const std::vector<int>& v) {
  double total = 0.0;
  for (int x : v) total += x;
  return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

inline std::optional<ClusteringScores> maybe_scores(const AttributedGraph& g,
                                                    const std::vector<int>& assignments,
                                                    const TrainConfig& c) {
  if (!g.labels) return std::nullopt;
  return score_partition(assignments, *g.labels, nmi_normalization(c));
}

/// One training run. With `proportion` set, lambda_sep is chosen after the
/// first loss evaluation so that lambda_sep / L_sep = proportion * lambda_tig * L_tig.
inline TrainResult train_run(const AttributedGraph& graph, const TrainConfig& config,
                             std::optional<double> proportion, const EpochCallback& on_epoch) {
  config.validate();
  if (config.mode == Mode::fixed_k) throw invalid_input("fixed-k runs are not trained");
  const int r = required_clusters(graph);
  const auto t0 = std::chrono::steady_clock::now();
  const FilteredSignalStack stack = filtered_stack(graph, config.max_order, stack_options(config));

  TrainResult out;
  RunReport& report = out.report;
  report.mode = to_string(config.mode);
  report.timings["filter"] = seconds_since(t0);

  SensorParams params = init_params(config.cell, graph.m, config.hidden_dim, config.seed);
  if (config.mode == Mode::as_gc) params = with_graph_pooling(std::move(params));
  AdamState adam(params);
  const ClusterOptions copts = cluster_options(config);
  double lambda_sep = config.lambda_sep;
  std::vector<double> losses;
  std::vector<int> assignments;

  const auto t1 = std::chrono::steady_clock::now();
  report.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const SensorForward fwd = run_forward(params, stack, config);
    if ((epoch - 1) % config.recluster_every == 0) {
      assignments = cluster(fwd.representation, r, config.seed + static_cast<std::uint64_t>(epoch),
                            copts)
                        .assignments;
    }
    const LossOptions lopts = loss_options(config, static_cast<std::uint64_t>(epoch));
    LossValue loss;
    try {
      if (epoch == 1 && proportion) {
        const LossValue probe =
            evaluate_loss(fwd.representation, assignments, r, 1.0, 0.0, false, lopts);
        out.epoch1_tightness = probe.tightness;
        out.epoch1_separation = probe.separation;
        lambda_sep = *proportion * config.lambda_tig * probe.tightness * probe.separation;
      }
      loss = evaluate_loss(fwd.representation, assignments, r, config.lambda_tig, lambda_sep, true,
                           lopts);
    } catch (const degenerate_separation& e) {
      report.status = "collapsed";
      report.message = std::string("epoch ") + std::to_string(epoch) + ": " + e.what();
      report.stop_reason = "collapse";
      break;
    }
    if (epoch == 1 && !proportion) {
      out.epoch1_tightness = loss.tightness;
      out.epoch1_separation = loss.separation;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss.total;
    rec.tightness = loss.tightness;
    rec.separation = loss.separation;
    rec.lambda_sep = lambda_sep;
    rec.mean_order = mean_of(node_orders(fwd.schedule, graph.n));
    rec.scores = maybe_scores(graph, assignments, config);
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    losses.push_back(loss.total);
    if (should_stop_early(losses, config.early_stop_window, config.early_stop_std)) {
      report.stop_reason = "early_stop";
      break;
    }
    const GradientSet grads = sensor_backward(params, stack, fwd, loss.gradient);
    adam_step(params, grads, adam, scheduled_rate(config, epoch));
  }
  report.timings["training"] = seconds_since(t1);

  const auto t2 = std::chrono::steady_clock::now();
  const SensorForward fwd = run_forward(params, stack, config);
  const ClusterPartition part = cluster(fwd.representation, r, config.seed, copts);
  report.assignments = part.assignments;
  report.selected_orders = node_orders(fwd.schedule, graph.n);
  report.order_histogram = order_histogram(report.selected_orders);
  report.final_scores = maybe_scores(graph, part.assignments, config);
  if (report.status == "ok") {
    try {
      report.final_loss = evaluate_loss(fwd.representation, part.assignments, r, config.lambda_tig,
                                        lambda_sep, false, loss_options(config, 0))
                              .total;
    } catch (const degenerate_separation& e) {
      report.status = "collapsed";
      report.message = std::string("final partition: ") + e.what();
    }
  }
  report.timings["final"] = seconds_since(t2);
  out.params = std::move(params);
  out.lambda_sep = lambda_sep;
  return out;
}

}  // namespace detail

/// Graph filtering of a fixed order followed by spectral clustering.
inline RunReport run_fixed_k(const AttributedGraph& graph, const TrainConfig& config) {
  config.validate();
  const int r = required_clusters(graph);
  const auto t0 = std::chrono::steady_clock::now();
  Matrix repr = graph.features;
  if (config.fixed_k > 0) {
    repr = FilteredSignalStack(LowPassFilter(graph, stack_options(config).filter), graph.features,
                               config.fixed_k, false)
               .layer_copy(config.fixed_k);
  }
  RunReport report;
  report.mode = to_string(Mode::fixed_k);
  report.stop_reason = "fixed";
  report.timings["filter"] = detail::seconds_since(t0);
  const auto t1 = std::chrono::steady_clock::now();
  const ClusterPartition part = cluster(repr, r, config.seed, cluster_options(config));
  report.timings["cluster"] = detail::seconds_since(t1);
  report.assignments = part.assignments;
  report.selected_orders.assign(static_cast<std::size_t>(graph.n), config.fixed_k);
  report.order_histogram = order_histogram(report.selected_orders);
  report.final_scores = detail::maybe_scores(graph, part.assignments, config);
  try {
    report.final_loss = evaluate_loss(repr, part.assignments, r, config.lambda_tig,
                                      config.lambda_sep, false, loss_options(config, 0))
                            .total;
  } catch (const degenerate_separation& e) {
    report.status = "collapsed";
    report.message = e.what();
  }
  return report;
}

/// Target ratios L_tig term : L_sep term of 1:p.
inline constexpr std::array<double, 8> kProportionGrid = {3, 4, 5, 10, 20, 30, 40, 50};

struct SweepRow {
  double proportion = 0.0;
  double lambda_sep = 0.0;
  double epoch1_loss = 0.0;
  double final_loss = 0.0;
  double normalized_loss = 0.0;  // final / epoch-1 loss
  int epochs = 0;
  std::string status;
  std::optional<ClusteringScores> scores;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t unsupervised_pick = 0;
  std::optional<std::size_t> oracle_pick;  // best accuracy, needs labels
  std::vector<TrainResult> runs;           // aligned with rows
};

/// Runs one full training per grid proportion with a shared seed.
inline SweepResult auto_select_proportion(const AttributedGraph& graph, const TrainConfig& base,
                                          const EpochCallback& on_epoch = {}) {
  SweepResult out;
  const double inf = std::numeric_limits<double>::infinity();
  double best_normalized = inf;
  double best_acc = -1.0;
  for (double p : kProportionGrid) {
    TrainResult run = detail::train_run(graph, base, p, on_epoch);
    SweepRow row;
    row.proportion = p;
    row.lambda_sep = run.lambda_sep;
    row.epochs = static_cast<int>(run.report.epochs.size());
    row.status = run.report.status;
    row.scores = run.report.final_scores;
    row.epoch1_loss = run.report.epochs.empty() ? inf : run.report.epochs.front().loss;
    row.final_loss = run.report.final_loss;
    row.normalized_loss = (row.status == "ok" && row.epoch1_loss > 0.0 && std::isfinite(row.epoch1_loss))
                              ? row.final_loss / row.epoch1_loss
                              : inf;
    const std::size_t idx = out.rows.size();
    if (row.normalized_loss < best_normalized) {
      best_normalized = row.normalized_loss;
      out.unsupervised_pick = idx;
    }
    if (row.scores && row.scores->accuracy > best_acc) {
      best_acc = row.scores->accuracy;
      out.oracle_pick = idx;
    }
    out.rows.push_back(row);
    out.runs.push_back(std::move(run));
  }
  return out;
}

/// Trains the sensor on one graph. With auto_proportion the full proportion
/// sweep runs and the unsupervised pick is returned.
inline TrainResult train(const AttributedGraph& graph, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  if (!config.auto_proportion) return detail::train_run(graph, config, std::nullopt, on_epoch);
  SweepResult sweep = auto_select_proportion(graph, config, on_epoch);
  return std::move(sweep.runs[sweep.unsupervised_pick]);
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_TRAIN_HPP
