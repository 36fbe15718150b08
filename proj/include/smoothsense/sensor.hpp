#ifndef SMOOTHSENSE_SENSOR_HPP
#define SMOOTHSENSE_SENSOR_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "smoothsense/errors.hpp"
#include "smoothsense/graph.hpp"

namespace smoothsense {

enum class CellKind { simple_recurrent, gated_recurrent };

inline const char* to_string(CellKind kind) {
  return kind == CellKind::gated_recurrent ? "gru" : "rnn";
}

inline int gate_count(CellKind kind) { return kind == CellKind::gated_recurrent ? 3 : 1; }

/// Graph-level readout g(Y) = weight * colmean(Y) + bias.
struct GraphPooling {
  Matrix weight;  // m x m
  Vector bias;    // m
};

/// Recurrent smoothness cell plus the halting unit.
///
/// Gated cells stack their gates row-wise in the order update (z), reset (r),
/// candidate (c):
///   z = sigmoid(Wz x + Uz s + bz)
///   r = sigmoid(Wr x + Ur s + br)
///   c = tanh(Wc x + Uc (r * s) + bc)
///   s' = (1 - z) * s + z * c
/// Simple cells compute s' = tanh(W x + U s + b).
struct SensorParams {
  CellKind cell = CellKind::gated_recurrent;
  Index input_dim = 0;
  Index hidden_dim = 0;
  Matrix input_weight;      // gates*d x m
  Matrix recurrent_weight;  // gates*d x d
  Vector bias;              // gates*d
  Vector halt_weight;       // d
  double halt_bias = 1.0;
  std::optional<GraphPooling> pooling;

  Index gate_rows() const { return gate_count(cell) * hidden_dim; }

  std::size_t parameter_count() const {
    std::size_t count = static_cast<std::size_t>(input_weight.size() + recurrent_weight.size() +
                                                 bias.size() + halt_weight.size() + 1);
    if (pooling) count += static_cast<std::size_t>(pooling->weight.size() + pooling->bias.size());
    return count;
  }

  /// Calls fn(name, data, size) for every tensor, scalar halt bias included.
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    fn("input_weight", input_weight.data(), input_weight.size());
    fn("recurrent_weight", recurrent_weight.data(), recurrent_weight.size());
    fn("bias", bias.data(), bias.size());
    fn("halt_weight", halt_weight.data(), halt_weight.size());
    fn("halt_bias", &halt_bias, Index{1});
    if (pooling) {
      fn("pooling_weight", pooling->weight.data(), pooling->weight.size());
      fn("pooling_bias", pooling->bias.data(), pooling->bias.size());
    }
  }

  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<SensorParams*>(this)->for_each_tensor(
        [&](const char* name, double* data, Index size) {
          fn(name, static_cast<const double*>(data), size);
        });
  }

  /// Same shapes, all zeros.
  SensorParams zeros_like() const {
    SensorParams z = *this;
    z.for_each_tensor([](const char*, double* data, Index size) {
      std::fill(data, data + size, 0.0);
    });
    return z;
  }
};

inline constexpr double kInitialHaltBias = 1.0;

/// Deterministic initialization: each tensor uniform in +-1/sqrt(fan_in),
/// halting bias fixed at kInitialHaltBias.
inline SensorParams init_params(CellKind cell, Index input_dim, Index hidden_dim,
                                std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw invalid_input("sensor dimensions must be positive, got input " +
                        std::to_string(input_dim) + ", hidden " + std::to_string(hidden_dim));
  }
  SensorParams p;
  p.cell = cell;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const Index rows = gate_count(cell) * hidden_dim;

  std::mt19937_64 rng(seed);
  auto fill = [&rng](double* data, Index size, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < size; ++i) data[i] = dist(rng);
  };
  p.input_weight.resize(rows, input_dim);
  p.recurrent_weight.resize(rows, hidden_dim);
  p.bias.resize(rows);
  p.halt_weight.resize(hidden_dim);
  fill(p.input_weight.data(), p.input_weight.size(), static_cast<double>(input_dim));
  fill(p.recurrent_weight.data(), p.recurrent_weight.size(), static_cast<double>(hidden_dim));
  fill(p.bias.data(), p.bias.size(), static_cast<double>(input_dim));
  fill(p.halt_weight.data(), p.halt_weight.size(), static_cast<double>(hidden_dim));
  p.halt_bias = kInitialHaltBias;
  return p;
}

/// Adds the graph-level readout, initialized to the identity map.
inline SensorParams with_graph_pooling(SensorParams p) {
  GraphPooling pool;
  pool.weight = Matrix::Identity(p.input_dim, p.input_dim);
  pool.bias = Vector::Zero(p.input_dim);
  p.pooling = std::move(pool);
  return p;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Keeps the halting output strictly inside (0, 1).
inline double clamp_open_unit(double h) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::min(std::max(h, lo), hi);
}

/// One cell step over a batch of rows. `input` already holds W x + b.
/// `gates` receives [z | r | c] for gated cells and is left empty otherwise.
inline void cell_forward(const SensorParams& p, const Matrix& prev, const Matrix& input,
                         Matrix& gates, Matrix& next) {
  const Index d = p.hidden_dim;
  if (p.cell == CellKind::simple_recurrent) {
    next = (input + prev * p.recurrent_weight.transpose()).array().tanh().matrix();
    gates.resize(0, 0);
    return;
  }
  const Index b = prev.rows();
  gates.resize(b, 3 * d);
  Matrix rec = prev * p.recurrent_weight.topRows(2 * d).transpose();
  rec += input.leftCols(2 * d);
  gates.leftCols(2 * d) = rec.unaryExpr([](double x) { return sigmoid(x); });
  Matrix reset_state = gates.middleCols(d, d).cwiseProduct(prev);
  Matrix cand = reset_state * p.recurrent_weight.bottomRows(d).transpose();
  cand += input.rightCols(d);
  gates.rightCols(d) = cand.array().tanh().matrix();
  const auto z = gates.leftCols(d).array();
  next = ((1.0 - z) * prev.array() + z * gates.rightCols(d).array()).matrix();
}

inline Vector halt_probs(const SensorParams& p, const Matrix& states) {
  Vector logits = states * p.halt_weight;
  Vector h(logits.size());
  for (Index i = 0; i < logits.size(); ++i) {
    h[i] = clamp_open_unit(sigmoid(logits[i] + p.halt_bias));
  }
  return h;
}

inline void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw invalid_input(std::string("non-finite ") + what);
}

}  // namespace detail

/// One recurrent update. Feed a zero state for the first step.
inline Vector cell_step(const SensorParams& p, const Vector& state, const Vector& input) {
  if (state.size() != p.hidden_dim || input.size() != p.input_dim) {
    throw dimension_mismatch("cell_step expects state " + std::to_string(p.hidden_dim) +
                             " and input " + std::to_string(p.input_dim) + ", got " +
                             std::to_string(state.size()) + " and " +
                             std::to_string(input.size()));
  }
  detail::check_finite(state, "cell state");
  detail::check_finite(input, "cell input");
  Matrix prev = state.transpose();
  Matrix in = (p.input_weight * input + p.bias).transpose();
  Matrix gates, next;
  detail::cell_forward(p, prev, in, gates, next);
  return next.row(0).transpose();
}

/// h = sigmoid(W_h s + b_h), strictly inside (0, 1).
inline double halt_prob(const SensorParams& p, const Vector& state) {
  if (state.size() != p.hidden_dim) {
    throw dimension_mismatch("halt_prob expects state of size " + std::to_string(p.hidden_dim));
  }
  detail::check_finite(state, "halting state");
  return detail::clamp_open_unit(detail::sigmoid(p.halt_weight.dot(state) + p.halt_bias));
}

/// Halting outcome for one unit (the whole graph, or one node).
struct UnitSchedule {
  int order = 0;                // N
  std::vector<double> weights;  // q^1..q^N
  std::vector<double> halts;    // h^1..h^N
};

struct HaltingSchedule {
  double epsilon = 1.0;
  bool graph_level = false;
  std::vector<UnitSchedule> units;

  std::vector<int> orders() const {
    std::vector<int> out;
    out.reserve(units.size());
    for (const auto& u : units) out.push_back(u.order);
    return out;
  }

  int max_order() const {
    int best = 0;
    for (const auto& u : units) best = std::max(best, u.order);
    return best;
  }

  const UnitSchedule& unit_for_node(Index i) const {
    return graph_level ? units.front() : units[static_cast<std::size_t>(i)];
  }
};

/// Halting rule shared by every sensor variant.
///
/// Consumes h^1, h^2, ... from `next_halt(k)` until the running sum reaches
/// `epsilon` or `max_order` steps were taken. Weights equal h^k before the
/// final step; the final weight is the remainder epsilon - sum(h^k, k < N), so
/// weights always sum to epsilon. A `forced_order` replaces the threshold test
/// with a fixed N (used when N must be held constant).
template <class HaltFn>
UnitSchedule accumulate_halting(HaltFn&& next_halt, double epsilon, int max_order,
                                std::optional<int> forced_order = std::nullopt) {
  if (!(epsilon > 0.0)) throw invalid_input("saturation threshold must be positive");
  if (max_order < 1) throw invalid_input("max order must be at least 1");
  if (forced_order && (*forced_order < 1 || *forced_order > max_order)) {
    throw invalid_input("forced order outside 1..max order");
  }
  UnitSchedule unit;
  double cumulative = 0.0;
  for (int k = 1; k <= max_order; ++k) {
    const double h = next_halt(k);
    unit.halts.push_back(h);
    const bool stop = forced_order ? (k == *forced_order)
                                   : (k == max_order || cumulative + h >= epsilon);
    if (stop) {
      unit.weights.push_back(epsilon - cumulative);
      unit.order = k;
      return unit;
    }
    unit.weights.push_back(h);
    cumulative += h;
  }
  return unit;  // unreachable: k == max_order always stops
}

/// Node-wise sensor on one node's inputs: `origin` is the unfiltered feature
/// row and `layers[k-1]` holds row i of G^k X.
inline UnitSchedule run_sensor_node(const SensorParams& p, const Vector& origin,
                                    const std::vector<Vector>& layers, double epsilon,
                                    int max_order,
                                    std::optional<int> forced_order = std::nullopt) {
  if (static_cast<int>(layers.size()) < max_order) {
    throw invalid_input("sensor needs " + std::to_string(max_order) + " layers, got " +
                        std::to_string(layers.size()));
  }
  Vector state = cell_step(p, Vector::Zero(p.hidden_dim), origin);
  return accumulate_halting(
      [&](int k) {
        state = cell_step(p, state, layers[static_cast<std::size_t>(k - 1)]);
        return halt_prob(p, state);
      },
      epsilon, max_order, forced_order);
}

/// Per-step activations kept for the backward pass. Step 0 is the warm-up step
/// on the unfiltered features.
struct StepCache {
  std::vector<Index> active;  // node ids (node-wise) or {0} (graph-level)
  Matrix prev;
  Matrix gates;
  Matrix next;
  Vector halts;
};

struct SensorForward {
  HaltingSchedule schedule;
  std::vector<StepCache> steps;
  Matrix representation;  // fused n x m output
  // Graph-level only: column means of X, GX, ... and the pooled cell inputs.
  std::vector<Vector> layer_means;
  std::vector<Vector> pooled_inputs;
};

/// X_bar = sum_k q^k G^k X, row-wise with each node's own weights.
inline Matrix fuse_representation(const FilteredSignalStack& stack,
                                  const HaltingSchedule& schedule) {
  const Index n = stack.rows();
  if (schedule.units.empty() ||
      (!schedule.graph_level && static_cast<Index>(schedule.units.size()) != n)) {
    throw invalid_input("schedule does not cover the stack's nodes");
  }
  for (const auto& u : schedule.units) {
    if (u.order < 1 || u.order > stack.max_order() ||
        static_cast<int>(u.weights.size()) != u.order) {
      throw invalid_input("schedule order " + std::to_string(u.order) +
                          " inconsistent with stack of max order " +
                          std::to_string(stack.max_order()));
    }
  }
  Matrix out = Matrix::Zero(n, stack.cols());
  stack.visit(schedule.max_order(), [&](int k, const Matrix& layer) {
    if (schedule.graph_level) {
      const auto& u = schedule.units.front();
      if (k <= u.order) out += u.weights[static_cast<std::size_t>(k - 1)] * layer;
      return;
    }
    for (Index i = 0; i < n; ++i) {
      const auto& u = schedule.units[static_cast<std::size_t>(i)];
      if (k <= u.order) out.row(i) += u.weights[static_cast<std::size_t>(k - 1)] * layer.row(i);
    }
  });
  return out;
}

/// The order-fixed baseline: X_bar = G^k X.
inline Matrix fixed_k_representation(const FilteredSignalStack& stack, int k) {
  if (k < 1 || k > stack.max_order()) {
    throw invalid_input("fixed order " + std::to_string(k) + " outside 1.." +
                        std::to_string(stack.max_order()));
  }
  return stack.layer_copy(k);
}

/// Node-wise forward over the whole graph. Every node runs its own recurrence
/// and stops consuming layers once it halts.
///
/// Input projections use W (G^k X)^T = G^k (X W^T), propagating the n x gates*d
/// projection through the filter instead of multiplying every layer by W.
inline SensorForward forward_nodes(const SensorParams& p, const FilteredSignalStack& stack,
                                   double epsilon, int max_order,
                                   const std::vector<int>* forced_orders = nullptr) {
  if (!(epsilon > 0.0)) throw invalid_input("saturation threshold must be positive");
  if (max_order < 1 || max_order > stack.max_order()) {
    throw invalid_input("max order " + std::to_string(max_order) + " outside 1.." +
                        std::to_string(stack.max_order()));
  }
  if (stack.cols() != p.input_dim) {
    throw dimension_mismatch("sensor input dim " + std::to_string(p.input_dim) +
                             " but features have " + std::to_string(stack.cols()) + " columns");
  }
  const Index n = stack.rows();
  if (forced_orders && static_cast<Index>(forced_orders->size()) != n) {
    throw invalid_input("forced orders must cover every node");
  }

  SensorForward fwd;
  fwd.schedule.epsilon = epsilon;
  fwd.schedule.graph_level = false;
  fwd.schedule.units.resize(static_cast<std::size_t>(n));

  Matrix projection = stack.origin() * p.input_weight.transpose();
  Matrix states(n, p.hidden_dim);
  {
    StepCache warm;
    warm.active.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) warm.active[static_cast<std::size_t>(i)] = i;
    warm.prev = Matrix::Zero(n, p.hidden_dim);
    Matrix input = projection.rowwise() + p.bias.transpose();
    detail::cell_forward(p, warm.prev, input, warm.gates, warm.next);
    states = warm.next;
    fwd.steps.push_back(std::move(warm));
  }

  std::vector<double> cumulative(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> active(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = i;

  for (int k = 1; k <= max_order && !active.empty(); ++k) {
    projection = stack.filter().apply(projection);
    const Index b = static_cast<Index>(active.size());
    StepCache step;
    step.active = active;
    step.prev.resize(b, p.hidden_dim);
    Matrix input(b, p.gate_rows());
    for (Index t = 0; t < b; ++t) {
      const Index i = active[static_cast<std::size_t>(t)];
      step.prev.row(t) = states.row(i);
      input.row(t) = projection.row(i) + p.bias.transpose();
    }
    detail::cell_forward(p, step.prev, input, step.gates, step.next);
    step.halts = detail::halt_probs(p, step.next);

    std::vector<Index> still_active;
    still_active.reserve(active.size());
    for (Index t = 0; t < b; ++t) {
      const Index i = active[static_cast<std::size_t>(t)];
      const auto ui = static_cast<std::size_t>(i);
      states.row(i) = step.next.row(t);
      auto& unit = fwd.schedule.units[ui];
      const double h = step.halts[t];
      unit.halts.push_back(h);
      const bool stop = forced_orders ? (k == (*forced_orders)[ui])
                                      : (k == max_order || cumulative[ui] + h >= epsilon);
      if (stop) {
        unit.weights.push_back(epsilon - cumulative[ui]);
        unit.order = k;
      } else {
        unit.weights.push_back(h);
        cumulative[ui] += h;
        still_active.push_back(i);
      }
    }
    fwd.steps.push_back(std::move(step));
    active.swap(still_active);
  }
  if (!active.empty()) throw invalid_input("forced orders exceed the max order");

  fwd.representation = fuse_representation(stack, fwd.schedule);
  return fwd;
}

/// Graph-level forward: one shared recurrence over pooled layers.
inline SensorForward forward_graph(const SensorParams& p, const FilteredSignalStack& stack,
                                   double epsilon, int max_order,
                                   std::optional<int> forced_order = std::nullopt) {
  if (max_order < 1 || max_order > stack.max_order()) {
    throw invalid_input("max order " + std::to_string(max_order) + " outside 1.." +
                        std::to_string(stack.max_order()));
  }
  if (stack.cols() != p.input_dim) {
    throw dimension_mismatch("sensor input dim " + std::to_string(p.input_dim) +
                             " but features have " + std::to_string(stack.cols()) + " columns");
  }
  SensorForward fwd;
  fwd.schedule.epsilon = epsilon;
  fwd.schedule.graph_level = true;

  auto pool = [&](const Matrix& layer) {
    Vector mean = layer.colwise().mean().transpose();
    fwd.layer_means.push_back(mean);
    Vector pooled = p.pooling ? Vector(p.pooling->weight * mean + p.pooling->bias) : mean;
    fwd.pooled_inputs.push_back(pooled);
    return pooled;
  };
  auto step_once = [&](const Matrix& prev, const Vector& pooled) {
    StepCache step;
    step.active = {0};
    step.prev = prev;
    Matrix input = (p.input_weight * pooled + p.bias).transpose();
    detail::cell_forward(p, step.prev, input, step.gates, step.next);
    step.halts = detail::halt_probs(p, step.next);
    return step;
  };

  fwd.steps.push_back(step_once(Matrix::Zero(1, p.hidden_dim), pool(stack.origin())));

  // Pooled inputs for every layer up to the cap; the loop below reads them in order.
  std::vector<Vector> layer_pooled;
  stack.visit(max_order, [&](int, const Matrix& layer) { layer_pooled.push_back(pool(layer)); });

  UnitSchedule unit = accumulate_halting(
      [&](int k) {
        StepCache step =
            step_once(fwd.steps.back().next, layer_pooled[static_cast<std::size_t>(k - 1)]);
        const double h = step.halts[0];
        fwd.steps.push_back(std::move(step));
        return h;
      },
      epsilon, max_order, forced_order);
  // Only the means actually consumed are kept.
  fwd.layer_means.resize(static_cast<std::size_t>(unit.order) + 1);
  fwd.pooled_inputs.resize(static_cast<std::size_t>(unit.order) + 1);
  fwd.schedule.units.push_back(std::move(unit));
  fwd.representation = fuse_representation(stack, fwd.schedule);
  return fwd;
}

inline HaltingSchedule run_sensor_graph(const SensorParams& p, const FilteredSignalStack& stack,
                                        double epsilon, int max_order) {
  return forward_graph(p, stack, epsilon, max_order).schedule;
}

inline HaltingSchedule run_sensor_nodes(const SensorParams& p, const FilteredSignalStack& stack,
                                        double epsilon, int max_order) {
  return forward_nodes(p, stack, epsilon, max_order).schedule;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_SENSOR_HPP
