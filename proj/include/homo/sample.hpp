#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "homo/error.hpp"

namespace homo {

// Anything exposing batched u1/u2/u3 evaluation the way FieldModels does.
template <typename F>
concept TaylorFields = requires(const F& f, const Eigen::Matrix2Xd& x, const Eigen::RowVectorXd& r) {
  { f.order() } -> std::convertible_to<int>;
  { f.velocity(x, r, r) } -> std::convertible_to<Eigen::Matrix2Xd>;
  { f.acceleration(x, x, r, r) } -> std::convertible_to<Eigen::Matrix2Xd>;
  { f.jerk(x, x, x, r, r) } -> std::convertible_to<Eigen::Matrix2Xd>;
};

inline constexpr double kDeltaTFloor = 1.0 / 128.0;

struct SamplerConfig {
  int order = 2;  // 1 = Shortcut step, 2 = HOMO, 3 = third-order HOMO
  int steps = 1;  // M; the uniform step is 1/M
  double delta_t_floor = kDeltaTFloor;
};

void validate(const SamplerConfig& cfg);

// Conditioning value fed to the networks for a step of size `step`: the
// largest dyadic value in [floor, 1] not exceeding it, or 0 below the floor.
double conditioning_step(double step, double floor = kDeltaTFloor);

// x + h u1 + h^2/2 u2(u1, .) + h^3/6 u3(u2, u1, .), with per-sample step h and
// conditioning d. Terms are added left to right, so a zero higher-order field
// leaves the lower-order result bit-identical.
template <TaylorFields F>
Eigen::Matrix2Xd taylor_advance(const F& fields, const Eigen::Matrix2Xd& x, const Eigen::RowVectorXd& t,
                                const Eigen::RowVectorXd& step, const Eigen::RowVectorXd& cond, int order) {
  if (order < 1 || order > 3) throw RangeError("taylor_advance: order must be 1, 2 or 3");
  if (order > fields.order()) {
    throw ConfigError("taylor_advance: order " + std::to_string(order) + " needs fields of that order, have " +
                      std::to_string(fields.order()));
  }
  const Eigen::Matrix2Xd v = fields.velocity(x, t, cond);
  Eigen::Matrix2Xd next = x + v * step.asDiagonal();
  if (order >= 2) {
    const Eigen::Matrix2Xd a = fields.acceleration(v, x, t, cond);
    const Eigen::RowVectorXd c2 = step.array().square() / 2.0;
    next += a * c2.asDiagonal();
    if (order >= 3) {
      const Eigen::Matrix2Xd j = fields.jerk(a, v, x, t, cond);
      const Eigen::RowVectorXd c3 = step.array().cube() / 6.0;
      next += j * c3.asDiagonal();
    }
  }
  return next;
}

// One step from time t with the step-size rule of HOMO inference: d at or
// above the floor advances by d conditioned on d; a smaller d (including 0)
// advances by the floor conditioned on 0.
template <TaylorFields F>
Eigen::Matrix2Xd homo_step(const F& fields, const Eigen::Matrix2Xd& x, double t, double d, int order,
                           double floor = kDeltaTFloor) {
  const bool large = d >= floor;
  const double step = large ? d : floor;
  const double cond = large ? d : 0.0;
  if (t < 0.0 || t + step > 1.0 + 1e-12) {
    throw RangeError("homo_step: t + step = " + std::to_string(t + step) + " leaves [0, 1]");
  }
  const Eigen::Index n = x.cols();
  return taylor_advance(fields, x, Eigen::RowVectorXd::Constant(n, t), Eigen::RowVectorXd::Constant(n, step),
                        Eigen::RowVectorXd::Constant(n, cond), order);
}

// M uniform steps of size 1/M from t = 0 to t = 1. Returns all M + 1 states;
// state n sits at t = n / M.
template <TaylorFields F>
std::vector<Eigen::Matrix2Xd> sample(const F& fields, const SamplerConfig& cfg, const Eigen::Matrix2Xd& x_init) {
  validate(cfg);
  const double step = 1.0 / cfg.steps;
  const double cond = conditioning_step(step, cfg.delta_t_floor);
  const Eigen::Index n = x_init.cols();
  const Eigen::RowVectorXd step_row = Eigen::RowVectorXd::Constant(n, step);
  const Eigen::RowVectorXd cond_row = Eigen::RowVectorXd::Constant(n, cond);
  std::vector<Eigen::Matrix2Xd> trajectory;
  trajectory.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  trajectory.push_back(x_init);
  for (int i = 0; i < cfg.steps; ++i) {
    const double t = static_cast<double>(i) / cfg.steps;
    trajectory.push_back(taylor_advance(fields, trajectory.back(), Eigen::RowVectorXd::Constant(n, t), step_row,
                                        cond_row, cfg.order));
  }
  return trajectory;
}

template <TaylorFields F>
Eigen::Matrix2Xd sample_endpoint(const F& fields, const SamplerConfig& cfg, const Eigen::Matrix2Xd& x_init) {
  return sample(fields, cfg, x_init).back();
}

}  // namespace homo
