#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <string>
#include <vector>

#include "homo/error.hpp"
#include "homo/nn/mlp.hpp"

namespace homo::nn {

// Handle to a value recorded on a GradientTape.
struct Var {
  std::size_t index = static_cast<std::size_t>(-1);
};

// Reverse-mode recorder for the handful of batched primitives the field
// networks and their losses need. Every value is a (features x batch) matrix;
// reductions produce 1x1 matrices.
//
// Models are registered with watch(); affine nodes accumulate into the slot of
// the model they read. Registered models must outlive the tape.
template <typename Scalar>
class GradientTape {
 public:
  using Matrix = MatrixX<Scalar>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  std::size_t watch(const MlpModel<Scalar>& model) {
    models_.push_back(&model);
    grads_.push_back(MlpGradients<Scalar>::zeros_like(model));
    return models_.size() - 1;
  }

  // Leaf that never receives or propagates gradient.
  Var constant(Matrix value) { return push(Op::constant, {}, std::move(value), false); }

  // Same numeric value as `v`, cut off from everything upstream.
  Var detach(Var v) { return constant(value(v)); }

  Var affine(std::size_t slot, std::size_t layer, Var x) {
    check_slot(slot);
    const auto& model = *models_[slot];
    if (layer >= model.layer_count()) throw TapeError("affine: layer index out of range");
    const Matrix& in = value(x);
    if (in.rows() != model.weights[layer].cols()) {
      throw DimensionError("affine: input rows", model.weights[layer].cols(), in.rows());
    }
    Matrix out = model.weights[layer] * in;
    out.colwise() += model.biases[layer];
    Var r = push(Op::affine, {x.index}, std::move(out), true);
    nodes_[r.index].slot = slot;
    nodes_[r.index].layer = layer;
    return r;
  }

  Var activate(Activation a, Var x) {
    Var r = push(Op::activation, {x.index}, apply_activation(a, value(x)), needs(x));
    nodes_[r.index].activation = a;
    return r;
  }

  // Stack inputs vertically; all parts must share the batch width.
  Var concat(std::initializer_list<Var> parts) {
    if (parts.size() == 0) throw TapeError("concat: no inputs");
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(*parts.begin()).cols();
    std::vector<std::size_t> inputs;
    bool grad = false;
    for (Var p : parts) {
      const Matrix& v = value(p);
      if (v.cols() != cols) throw DimensionError("concat: batch width", cols, v.cols());
      rows += v.rows();
      inputs.push_back(p.index);
      grad = grad || needs(p);
    }
    Matrix out(rows, cols);
    Eigen::Index offset = 0;
    for (Var p : parts) {
      const Matrix& v = value(p);
      out.middleRows(offset, v.rows()) = v;
      offset += v.rows();
    }
    return push(Op::concat, std::move(inputs), std::move(out), grad);
  }

  Var scale(Var x, Scalar s) {
    Var r = push(Op::scale, {x.index}, value(x) * s, needs(x));
    nodes_[r.index].factor = s;
    return r;
  }

  // Scales column j by weights(j): a per-sample scalar.
  Var scale_columns(Var x, const RowVector& weights) {
    const Matrix& v = value(x);
    if (weights.size() != v.cols()) throw DimensionError("scale_columns: weights", v.cols(), weights.size());
    Matrix out = v * weights.asDiagonal();
    Var r = push(Op::scale_columns, {x.index}, std::move(out), needs(x));
    nodes_[r.index].column_weights = weights;
    return r;
  }

  Var add(Var a, Var b) { return combine(a, b, Scalar(1)); }
  Var sub(Var a, Var b) { return combine(a, b, Scalar(-1)); }

  // Sum of squares of every entry, as a 1x1 value.
  Var squared_norm(Var x) {
    Matrix out(1, 1);
    out(0, 0) = value(x).squaredNorm();
    return push(Op::squared_norm, {x.index}, std::move(out), needs(x));
  }

  const Matrix& value(Var v) const {
    if (v.index >= nodes_.size()) throw TapeError("value: variable not recorded on this tape");
    return nodes_[v.index].value;
  }

  bool requires_grad(Var v) const { return needs(v); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output) = seed and runs the reverse pass. Parameter gradients are
  // accumulated into the watched slots.
  void backward(Var output, const Matrix& seed) {
    if (nodes_.empty() || output.index >= nodes_.size()) {
      throw TapeError("backward: no forward pass recorded for this output");
    }
    const Matrix& out = nodes_[output.index].value;
    if (seed.rows() != out.rows() || seed.cols() != out.cols()) {
      throw DimensionError("backward: seed size", out.size(), seed.size());
    }
    for (auto& n : nodes_) n.has_grad = false;
    accumulate(output.index, seed);
    for (std::size_t i = output.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.requires_grad) continue;
      propagate(n);
    }
  }

  void backward(Var scalar_output) {
    backward(scalar_output, Matrix::Ones(1, 1));
  }

  const MlpGradients<Scalar>& gradients(std::size_t slot) const {
    check_slot(slot);
    return grads_[slot];
  }

  const MlpModel<Scalar>& model(std::size_t slot) const {
    check_slot(slot);
    return *models_[slot];
  }

 private:
  enum class Op { constant, affine, activation, concat, scale, scale_columns, add, squared_norm };

  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::size_t slot = 0;
    std::size_t layer = 0;
    Activation activation = Activation::relu;
    Scalar factor = Scalar(1);
    RowVector column_weights;
  };

  bool needs(Var v) const {
    if (v.index >= nodes_.size()) throw TapeError("variable not recorded on this tape");
    return nodes_[v.index].requires_grad;
  }

  void check_slot(std::size_t slot) const {
    if (slot >= models_.size()) throw TapeError("model slot " + std::to_string(slot) + " not watched");
  }

  Var push(Op op, std::vector<std::size_t> inputs, Matrix value, bool requires_grad) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var combine(Var a, Var b, Scalar sign) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
      throw DimensionError("add: operand size", va.size(), vb.size());
    }
    Var r = push(Op::add, {a.index, b.index}, va + sign * vb, needs(a) || needs(b));
    nodes_[r.index].factor = sign;
    return r;
  }

  template <typename Derived>
  void accumulate(std::size_t index, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[index];
    if (!n.requires_grad) return;
    if (n.has_grad) {
      n.grad += g;
    } else {
      n.grad = g;
      n.has_grad = true;
    }
  }

  void propagate(const Node& n) {
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::constant:
        break;
      case Op::affine: {
        const Matrix& x = nodes_[n.inputs[0]].value;
        auto& pg = grads_[n.slot];
        pg.weights[n.layer].noalias() += g * x.transpose();
        pg.biases[n.layer] += g.rowwise().sum();
        if (nodes_[n.inputs[0]].requires_grad) {
          accumulate(n.inputs[0], models_[n.slot]->weights[n.layer].transpose() * g);
        }
        break;
      }
      case Op::activation: {
        if (n.activation == Activation::relu) {
          const Matrix& pre = nodes_[n.inputs[0]].value;
          accumulate(n.inputs[0], (pre.array() > Scalar(0)).select(g, Scalar(0)).matrix());
        } else {
          accumulate(n.inputs[0], (g.array() * (Scalar(1) - n.value.array().square())).matrix());
        }
        break;
      }
      case Op::concat: {
        Eigen::Index offset = 0;
        for (std::size_t in : n.inputs) {
          const Eigen::Index rows = nodes_[in].value.rows();
          accumulate(in, g.middleRows(offset, rows));
          offset += rows;
        }
        break;
      }
      case Op::scale:
        accumulate(n.inputs[0], g * n.factor);
        break;
      case Op::scale_columns:
        accumulate(n.inputs[0], g * n.column_weights.asDiagonal());
        break;
      case Op::add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g * n.factor);
        break;
      case Op::squared_norm:
        accumulate(n.inputs[0], nodes_[n.inputs[0]].value * (Scalar(2) * g(0, 0)));
        break;
    }
  }

  std::vector<Node> nodes_;
  std::vector<const MlpModel<Scalar>*> models_;
  std::vector<MlpGradients<Scalar>> grads_;
};

// Records the forward pass of `model` (watched as `slot`) on the tape.
template <typename Scalar>
Var mlp_forward(GradientTape<Scalar>& tape, const MlpModel<Scalar>& model, std::size_t slot, Var input) {
  if (&tape.model(slot) != &model) throw TapeError("mlp_forward: slot is bound to a different model");
  const auto rows = tape.value(input).rows();
  if (rows != model.input_dim()) {
    throw DimensionError("mlp_forward: input length", model.input_dim(), rows);
  }
  Var h = input;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    h = tape.affine(slot, i, h);
    if (i + 1 < model.layer_count()) h = tape.activate(model.activation, h);
  }
  return h;
}

// Reverse pass from `output` seeded with `output_gradient`; returns the
// gradients of the model in `slot`.
template <typename Scalar>
const MlpGradients<Scalar>& mlp_backward(GradientTape<Scalar>& tape, Var output,
                                         const MatrixX<Scalar>& output_gradient, std::size_t slot = 0) {
  tape.backward(output, output_gradient);
  return tape.gradients(slot);
}

}  // namespace homo::nn
