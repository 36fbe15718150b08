#ifndef SMOOTHSENSE_GRADIENTS_HPP
#define SMOOTHSENSE_GRADIENTS_HPP

#include <string>
#include <vector>

#include "smoothsense/errors.hpp"
#include "smoothsense/graph.hpp"
#include "smoothsense/sensor.hpp"

namespace smoothsense {

/// Gradient with respect to every SensorParams tensor; same shapes.
using GradientSet = SensorParams;

namespace detail {

/// Reverse of cell_forward for a batch. Accumulates recurrent-weight
/// gradients into `grads`, writes dL/d(W x + b) to `d_input` and dL/ds_prev
/// to `d_prev`.
inline void cell_backward(const SensorParams& p, const StepCache& step, const Matrix& d_next,
                          GradientSet& grads, Matrix& d_input, Matrix& d_prev) {
  const Index d = p.hidden_dim;
  if (p.cell == CellKind::simple_recurrent) {
    d_input = (d_next.array() * (1.0 - step.next.array().square())).matrix();
    grads.recurrent_weight.noalias() += d_input.transpose() * step.prev;
    d_prev.noalias() = d_input * p.recurrent_weight;
    return;
  }
  const auto z = step.gates.leftCols(d).array();
  const auto r = step.gates.middleCols(d, d).array();
  const auto c = step.gates.rightCols(d).array();
  const auto prev = step.prev.array();
  const auto dn = d_next.array();

  d_input.resize(d_next.rows(), 3 * d);
  // candidate
  d_input.rightCols(d) = (dn * z * (1.0 - c.square())).matrix();
  Matrix d_reset_state = d_input.rightCols(d) * p.recurrent_weight.bottomRows(d);
  // update and reset gates
  d_input.leftCols(d) = (dn * (c - prev) * z * (1.0 - z)).matrix();
  d_input.middleCols(d, d) = (d_reset_state.array() * prev * r * (1.0 - r)).matrix();

  d_prev = (dn * (1.0 - z) + d_reset_state.array() * r).matrix();
  d_prev.noalias() += d_input.leftCols(2 * d) * p.recurrent_weight.topRows(2 * d);

  grads.recurrent_weight.topRows(2 * d).noalias() += d_input.leftCols(2 * d).transpose() * step.prev;
  Matrix reset_state = (r * prev).matrix();
  grads.recurrent_weight.bottomRows(d).noalias() += d_input.rightCols(d).transpose() * reset_state;
}

/// dL/dh^k from dL/dq^k: earlier halts enter their own weight and, with a
/// minus sign, the final remainder; h^N itself has no effect.
inline std::vector<double> halt_gradients(const std::vector<double>& d_weights) {
  const std::size_t order = d_weights.size();
  std::vector<double> d_halts(order, 0.0);
  for (std::size_t k = 0; k + 1 < order; ++k) d_halts[k] = d_weights[k] - d_weights[order - 1];
  return d_halts;
}

inline void check_gradients(const GradientSet& g) {
  g.for_each_tensor([](const char* name, const double* data, Index size) {
    for (Index i = 0; i < size; ++i) {
      if (!std::isfinite(data[i])) {
        throw non_finite_gradient(std::string("non-finite gradient in ") + name + "[" +
                                  std::to_string(i) + "]");
      }
    }
  });
}

inline GradientSet backward_nodes(const SensorParams& p, const FilteredSignalStack& stack,
                                  const SensorForward& fwd, const Matrix& d_repr) {
  const Index n = stack.rows();
  const auto& units = fwd.schedule.units;
  GradientSet grads = p.zeros_like();

  // dL/dq^{k,i} = <dL/dx_bar_i, [G^k X]^i>
  std::vector<std::vector<double>> d_weights(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    d_weights[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(units[static_cast<std::size_t>(i)].order));
  }
  stack.visit(fwd.schedule.max_order(), [&](int k, const Matrix& layer) {
    for (Index i = 0; i < n; ++i) {
      auto& dw = d_weights[static_cast<std::size_t>(i)];
      if (k <= static_cast<int>(dw.size())) {
        dw[static_cast<std::size_t>(k - 1)] = d_repr.row(i).dot(layer.row(i));
      }
    }
  });
  std::vector<std::vector<double>> d_halts(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    d_halts[static_cast<std::size_t>(i)] = halt_gradients(d_weights[static_cast<std::size_t>(i)]);
  }

  // Backpropagation through the steps; the input-weight gradient is gathered as
  // sum_k (Delta^k)^T G^k X = (sum_k G^k Delta^k)^T X, evaluated Horner-style.
  Matrix d_state = Matrix::Zero(n, p.hidden_dim);
  Matrix horner = Matrix::Zero(n, p.gate_rows());
  bool horner_nonzero = false;
  Matrix d_input, d_prev;
  for (std::size_t k = fwd.steps.size(); k-- > 0;) {
    const StepCache& step = fwd.steps[k];
    const Index b = static_cast<Index>(step.active.size());
    Matrix d_next(b, p.hidden_dim);
    for (Index t = 0; t < b; ++t) {
      const Index i = step.active[static_cast<std::size_t>(t)];
      d_next.row(t) = d_state.row(i);
      if (k == 0) continue;
      const auto& dh = d_halts[static_cast<std::size_t>(i)];
      const double g = dh[k - 1];
      if (g == 0.0) continue;
      const double h = step.halts[t];
      const double logit_grad = g * h * (1.0 - h);
      d_next.row(t) += logit_grad * p.halt_weight.transpose();
      grads.halt_weight += logit_grad * step.next.row(t).transpose();
      grads.halt_bias += logit_grad;
    }
    cell_backward(p, step, d_next, grads, d_input, d_prev);
    grads.bias += d_input.colwise().sum().transpose();

    if (horner_nonzero) horner = stack.filter().apply(horner);
    for (Index t = 0; t < b; ++t) {
      const Index i = step.active[static_cast<std::size_t>(t)];
      horner.row(i) += d_input.row(t);
      d_state.row(i) = d_prev.row(t);
    }
    horner_nonzero = true;
  }
  grads.input_weight.noalias() = horner.transpose() * stack.origin();
  return grads;
}

inline GradientSet backward_graph(const SensorParams& p, const FilteredSignalStack& stack,
                                  const SensorForward& fwd, const Matrix& d_repr) {
  const auto& unit = fwd.schedule.units.front();
  GradientSet grads = p.zeros_like();

  std::vector<double> d_weights(static_cast<std::size_t>(unit.order));
  stack.visit(unit.order, [&](int k, const Matrix& layer) {
    d_weights[static_cast<std::size_t>(k - 1)] = d_repr.cwiseProduct(layer).sum();
  });
  const auto d_halts = halt_gradients(d_weights);

  Matrix d_state = Matrix::Zero(1, p.hidden_dim);
  Matrix d_input, d_prev;
  for (std::size_t k = fwd.steps.size(); k-- > 0;) {
    const StepCache& step = fwd.steps[k];
    Matrix d_next = d_state;
    if (k > 0 && d_halts[k - 1] != 0.0) {
      const double h = step.halts[0];
      const double logit_grad = d_halts[k - 1] * h * (1.0 - h);
      d_next.row(0) += logit_grad * p.halt_weight.transpose();
      grads.halt_weight += logit_grad * step.next.row(0).transpose();
      grads.halt_bias += logit_grad;
    }
    cell_backward(p, step, d_next, grads, d_input, d_prev);
    const Vector di = d_input.row(0).transpose();
    grads.bias += di;
    const Vector& pooled = fwd.pooled_inputs[k];
    grads.input_weight.noalias() += di * pooled.transpose();
    if (p.pooling) {
      const Vector d_pooled = p.input_weight.transpose() * di;
      grads.pooling->weight.noalias() += d_pooled * fwd.layer_means[k].transpose();
      grads.pooling->bias += d_pooled;
    }
    d_state = d_prev;
  }
  return grads;
}

}  // namespace detail

/// Exact reverse-mode gradient of a loss on the fused representation with
/// respect to the sensor parameters. Halting orders are constants of the
/// forward pass; gradients flow through the weights q (the remainder included)
/// into the halting probabilities and the recurrent states.
inline GradientSet sensor_backward(const SensorParams& p, const FilteredSignalStack& stack,
                                   const SensorForward& fwd, const Matrix& d_repr) {
  if (d_repr.rows() != stack.rows() || d_repr.cols() != stack.cols()) {
    throw dimension_mismatch("representation gradient shape does not match the stack");
  }
  GradientSet g = fwd.schedule.graph_level ? detail::backward_graph(p, stack, fwd, d_repr)
                                           : detail::backward_nodes(p, stack, fwd, d_repr);
  detail::check_gradients(g);
  return g;
}

}  // namespace smoothsense

#endif  // SMOOTHSENSE_GRADIENTS_HPP
