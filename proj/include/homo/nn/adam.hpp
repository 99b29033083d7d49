#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "homo/error.hpp"
#include "homo/nn/mlp.hpp"

namespace homo::nn {

template <typename Scalar>
struct AdamState {
  long step_count = 0;
  std::vector<MatrixX<Scalar>> m_weights, v_weights;
  std::vector<VectorX<Scalar>> m_biases, v_biases;
  Scalar learning_rate = Scalar(0.005);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const MlpModel<Scalar>& model, Scalar learning_rate) {
  AdamState<Scalar> s;
  s.learning_rate = learning_rate;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    s.m_weights.push_back(MatrixX<Scalar>::Zero(model.weights[i].rows(), model.weights[i].cols()));
    s.v_weights.push_back(MatrixX<Scalar>::Zero(model.weights[i].rows(), model.weights[i].cols()));
    s.m_biases.push_back(VectorX<Scalar>::Zero(model.biases[i].size()));
    s.v_biases.push_back(VectorX<Scalar>::Zero(model.biases[i].size()));
  }
  return s;
}

namespace detail {

template <typename Param, typename Moment>
void adam_update(Param& p, const Param& g, Moment& m, Moment& v, const auto& state, double c1, double c2) {
  using Scalar = typename Param::Scalar;
  m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
  v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseProduct(g);
  p.array() -= state.learning_rate * (m.array() / Scalar(c1)) /
               ((v.array() / Scalar(c2)).sqrt() + state.epsilon);
}

}  // namespace detail

// One bias-corrected Adam update. Gradients are validated before anything is
// modified, so a rejected step leaves model and state untouched.
template <typename Scalar>
void adam_step(MlpModel<Scalar>& model, const MlpGradients<Scalar>& grads, AdamState<Scalar>& state) {
  const auto layers = model.layer_count();
  if (grads.weights.size() != layers || grads.biases.size() != layers || state.m_weights.size() != layers) {
    throw DimensionError("adam_step: layer count", static_cast<long>(layers),
                         static_cast<long>(grads.weights.size()));
  }
  for (std::size_t i = 0; i < layers; ++i) {
    if (grads.weights[i].rows() != model.weights[i].rows() || grads.weights[i].cols() != model.weights[i].cols() ||
        grads.biases[i].size() != model.biases[i].size()) {
      throw DimensionError("adam_step: gradient shape of layer " + std::to_string(i), model.weights[i].size(),
                           grads.weights[i].size());
    }
    if (!grads.weights[i].allFinite() || !grads.biases[i].allFinite()) {
      throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(i));
    }
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(static_cast<double>(state.beta1), t);
  const double c2 = 1.0 - std::pow(static_cast<double>(state.beta2), t);
  for (std::size_t i = 0; i < layers; ++i) {
    detail::adam_update(model.weights[i], grads.weights[i], state.m_weights[i], state.v_weights[i], state, c1, c2);
    detail::adam_update(model.biases[i], grads.biases[i], state.m_biases[i], state.v_biases[i], state, c1, c2);
  }
  if (!model.all_finite()) throw NumericError("adam_step: parameters became non-finite");
}

}  // namespace homo::nn
