#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace homo {

enum class ScheduleKind { vp, smoothstep };

// Interpolation x_t = alpha_t x0 + beta_t x1.
//
//   vp:          alpha_t = exp(-a (1-t)^2 / 4 - b (1-t) / 2), beta_t = sqrt(1 - alpha_t^2)
//                t = 0 sits (almost) on x1, t = 1 sits exactly on x0.
//   smoothstep:  alpha_t = 1 - (3t^2 - 2t^3), beta_t = 3t^2 - 2t^3
//                t = 0 sits on x0, t = 1 sits on x1.
struct Schedule {
  ScheduleKind kind = ScheduleKind::vp;
  double a = 19.9;
  double b = 0.1;

  static Schedule vp(double a = 19.9, double b = 0.1) { return {ScheduleKind::vp, a, b}; }
  static Schedule smoothstep() { return {ScheduleKind::smoothstep, 0.0, 0.0}; }
};

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

// Which interpolation endpoint the path starts from at t = 0. Samplers start
// from the source distribution at t = 0 and end on the target at t = 1, so the
// source sample is fed into this slot.
enum class Endpoint { x0, x1 };
Endpoint start_endpoint(const Schedule& s);

struct ScheduleValue {
  double alpha;
  double beta;
};

// order-th t-derivative of (alpha_t, beta_t), order in 0..3.
ScheduleValue schedule_eval(const Schedule& s, double t, int order);

// All four orders at once; cheaper than four schedule_eval calls.
struct ScheduleJet {
  ScheduleValue d[4];
};
ScheduleJet schedule_jet(const Schedule& s, double t);

struct PathPoint {
  double t = 0.0;
  Eigen::Vector2d x_t = Eigen::Vector2d::Zero();
  Eigen::Vector2d dx = Eigen::Vector2d::Zero();    // velocity target
  Eigen::Vector2d ddx = Eigen::Vector2d::Zero();   // acceleration target
  Eigen::Vector2d dddx = Eigen::Vector2d::Zero();  // jerk target
};

PathPoint make_path_point(const Schedule& s, const Eigen::Vector2d& x0, const Eigen::Vector2d& x1, double t);

}  // namespace homo
