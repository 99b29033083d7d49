#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "homo/error.hpp"
#include "homo/rng.hpp"

namespace homo::nn {

enum class Activation { relu, tanh };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Dense multilayer perceptron. Inputs are column-major batches: one sample
// per column, one feature per row. Hidden layers use `activation`, the output
// layer is linear.
template <typename Scalar>
struct MlpModel {
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  std::vector<Eigen::Index> layer_sizes;
  std::vector<Matrix> weights;  // weights[i]: layer_sizes[i+1] x layer_sizes[i]
  std::vector<Vector> biases;   // biases[i]: layer_sizes[i+1]
  Activation activation = Activation::relu;

  std::size_t layer_count() const { return weights.size(); }
  Eigen::Index input_dim() const { return layer_sizes.front(); }
  Eigen::Index output_dim() const { return layer_sizes.back(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
    }
    return true;
  }
};

// Per-parameter gradient buffers shaped like an MlpModel.
template <typename Scalar>
struct MlpGradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  static MlpGradients zeros_like(const MlpModel<Scalar>& model) {
    MlpGradients g;
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
      g.weights.push_back(MatrixX<Scalar>::Zero(model.weights[i].rows(), model.weights[i].cols()));
      g.biases.push_back(VectorX<Scalar>::Zero(model.biases[i].size()));
    }
    return g;
  }
};

inline Eigen::Index parameter_count(const std::vector<Eigen::Index>& layer_sizes) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    n += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
  }
  return n;
}

// Glorot-uniform weights, zero biases. Weights are drawn layer by layer in
// row-major order from `rng.uniform()`.
template <typename Scalar = double>
MlpModel<Scalar> init_model(const std::vector<Eigen::Index>& layer_sizes, Activation activation,
                            SeededRng& rng) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("init_model: need at least an input and an output size, got " +
                      std::to_string(layer_sizes.size()));
  }
  for (auto s : layer_sizes) {
    if (s <= 0) throw ConfigError("init_model: layer sizes must be positive");
  }
  MlpModel<Scalar> model;
  model.layer_sizes = layer_sizes;
  model.activation = activation;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const auto fan_in = layer_sizes[i];
    const auto fan_out = layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    MatrixX<Scalar> w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        w(r, c) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(VectorX<Scalar>::Zero(fan_out));
  }
  return model;
}

template <typename Derived>
auto apply_activation(Activation a, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(z.rows(), z.cols());
  if (a == Activation::relu) {
    out = z.cwiseMax(Scalar(0));
  } else {
    out = z.array().tanh().matrix();
  }
  return out;
}

// Batched forward pass without gradient recording.
template <typename Scalar, typename Derived>
MatrixX<Scalar> mlp_forward(const MlpModel<Scalar>& model, const Eigen::MatrixBase<Derived>& input) {
  if (input.rows() != model.input_dim()) {
    throw DimensionError("mlp_forward: input length", model.input_dim(), input.rows());
  }
  MatrixX<Scalar> h = input;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    MatrixX<Scalar> z = model.weights[i] * h;
    z.colwise() += model.biases[i];
    h = (i + 1 < model.layer_count()) ? apply_activation(model.activation, z) : std::move(z);
  }
  return h;
}

}  // namespace homo::nn
