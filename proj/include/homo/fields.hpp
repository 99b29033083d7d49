#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "homo/nn/mlp.hpp"
#include "homo/rng.hpp"

namespace homo {

using Mlp = nn::MlpModel<double>;
using MlpGradients = nn::MlpGradients<double>;

enum class Reduction { mean, sum };

std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view name);

// Dyadic step sizes 1/128, 1/64, ..., 1/2 and optionally 1.
std::vector<double> dyadic_steps(bool include_one);

// Active loss terms (M1, M2, M3, SC) and how the batch is split between
// true-target and self-consistency elements.
struct LossConfig {
  bool use_m1 = true;
  bool use_m2 = false;
  bool use_m3 = false;
  bool use_sc = false;
  double true_target_fraction = 0.75;
  // Steps self-consistency elements are drawn from. 2d must not exceed 1, so
  // the default omits d = 1.
  std::vector<double> step_set = dyadic_steps(false);
  Reduction reduction = Reduction::sum;
  // When set, M2/M3 gradients also reach u1 (and M3 reaches u2) through the
  // predictions fed forward as network inputs. When clear, those inputs enter
  // the matching terms as constants and each network only sees its own term.
  bool chain_gradients = false;

  bool any_matching() const { return use_m1 || use_m2 || use_m3; }
  bool needs_u2() const { return use_m2 || use_m3; }
  bool needs_u3() const { return use_m3; }
  // Step size is an extra network input exactly when SC is active.
  bool step_conditioned() const { return use_sc; }

  // Canonical "M1+M2+M3+SC"-style label.
  std::string label() const;
  static LossConfig from_label(std::string_view label);
};

void validate(const LossConfig& cfg);

struct Architecture {
  std::vector<Eigen::Index> hidden = {100, 100};
  nn::Activation activation = nn::Activation::relu;
};

enum class FieldRole { velocity, acceleration, jerk };

// Input dims: u1 (x, t[, d]) -> 3|4; u2 (u1, x, t[, d]) -> 5|6;
// u3 (u2, u1, x, t[, d]) -> 7|8. Every field outputs 2 values.
Eigen::Index field_input_dim(FieldRole role, bool step_conditioned);
std::vector<Eigen::Index> field_layer_sizes(FieldRole role, bool step_conditioned, const Architecture& arch);

// The u1/u2/u3 networks of one model. Batched evaluation: one sample per
// column, per-sample time t and conditioning step d as row vectors.
struct FieldModels {
  Mlp u1;
  std::optional<Mlp> u2;
  std::optional<Mlp> u3;
  bool step_conditioned = false;

  int order() const { return u3 ? 3 : (u2 ? 2 : 1); }
  Eigen::Index parameter_count() const;

  Eigen::Matrix2Xd velocity(const Eigen::Matrix2Xd& x, const Eigen::RowVectorXd& t,
                            const Eigen::RowVectorXd& d) const;
  Eigen::Matrix2Xd acceleration(const Eigen::Matrix2Xd& v, const Eigen::Matrix2Xd& x, const Eigen::RowVectorXd& t,
                                const Eigen::RowVectorXd& d) const;
  Eigen::Matrix2Xd jerk(const Eigen::Matrix2Xd& a, const Eigen::Matrix2Xd& v, const Eigen::Matrix2Xd& x,
                        const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& d) const;
};

// u1 always; u2 when M2 or M3 is active; u3 when M3 is active. Networks are
// initialized in the order u1, u2, u3 from `rng`.
FieldModels make_field_models(const LossConfig& cfg, const Architecture& arch, SeededRng& rng);

// Stacks field inputs in network order; `d` is appended only when conditioned.
Eigen::MatrixXd field_input(std::initializer_list<const Eigen::Matrix2Xd*> vectors, const Eigen::RowVectorXd& t,
                            const Eigen::RowVectorXd& d, bool step_conditioned);

}  // namespace homo
