#include "homo/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "homo/error.hpp"

namespace homo {

namespace {

constexpr double kSingularBeta = 1e-12;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("schedule: t = " + std::to_string(t) + " outside [0, 1]");
}

// vp: alpha = exp(e(t)) with e(t) = -a s^2/4 - b s/2, s = 1 - t.
//   e'  = a s/2 + b/2,  e'' = -a/2,  e''' = 0
//   alpha'   = alpha e'
//   alpha''  = alpha (e'^2 + e'')
//   alpha''' = alpha (e'^3 + 3 e' e'')
// beta = sqrt(g), g = 1 - alpha^2:
//   g'   = -2 alpha alpha'
//   g''  = -2 (alpha'^2 + alpha alpha'')
//   g''' = -2 (3 alpha' alpha'' + alpha alpha''')
//   beta'   = g' / (2 beta)
//   beta''  = (g'' - 2 beta'^2) / (2 beta)
//   beta''' = (g''' - 6 beta' beta'') / (2 beta)
ScheduleJet vp_jet(double a, double b, double t, int max_order) {
  const double s = 1.0 - t;
  const double e1 = 0.5 * a * s + 0.5 * b;
  const double e2 = -0.5 * a;
  const double al0 = std::exp(-0.25 * a * s * s - 0.5 * b * s);
  const double al1 = al0 * e1;
  const double al2 = al0 * (e1 * e1 + e2);
  const double al3 = al0 * (e1 * e1 * e1 + 3.0 * e1 * e2);
  const double g = 1.0 - al0 * al0;
  const double be0 = std::sqrt(std::max(g, 0.0));

  ScheduleJet jet{};
  jet.d[0] = {al0, be0};
  if (max_order == 0) return jet;
  if (be0 < kSingularBeta) {
    throw SingularityError("vp schedule: beta_t = " + std::to_string(be0) + " at t = " + std::to_string(t) +
                           ", derivatives are singular");
  }
  const double g1 = -2.0 * al0 * al1;
  const double g2 = -2.0 * (al1 * al1 + al0 * al2);
  const double g3 = -2.0 * (3.0 * al1 * al2 + al0 * al3);
  const double be1 = g1 / (2.0 * be0);
  const double be2 = (g2 - 2.0 * be1 * be1) / (2.0 * be0);
  const double be3 = (g3 - 6.0 * be1 * be2) / (2.0 * be0);
  jet.d[1] = {al1, be1};
  jet.d[2] = {al2, be2};
  jet.d[3] = {al3, be3};
  return jet;
}

ScheduleJet smoothstep_jet(double t) {
  const double b0 = 3.0 * t * t - 2.0 * t * t * t;
  const double b1 = 6.0 * t - 6.0 * t * t;
  const double b2 = 6.0 - 12.0 * t;
  const double b3 = -12.0;
  ScheduleJet jet{};
  jet.d[0] = {1.0 - b0, b0};
  jet.d[1] = {-b1, b1};
  jet.d[2] = {-b2, b2};
  jet.d[3] = {-b3, b3};
  return jet;
}

}  // namespace

std::string_view to_string(ScheduleKind kind) { return kind == ScheduleKind::vp ? "vp" : "smoothstep"; }

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "vp") return ScheduleKind::vp;
  if (name == "smoothstep") return ScheduleKind::smoothstep;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

Endpoint start_endpoint(const Schedule& s) { return s.kind == ScheduleKind::vp ? Endpoint::x1 : Endpoint::x0; }

ScheduleValue schedule_eval(const Schedule& s, double t, int order) {
  if (order < 0 || order > 3) throw RangeError("schedule_eval: order must be in 0..3");
  check_time(t);
  const ScheduleJet jet = s.kind == ScheduleKind::vp ? vp_jet(s.a, s.b, t, order) : smoothstep_jet(t);
  return jet.d[order];
}

ScheduleJet schedule_jet(const Schedule& s, double t) {
  check_time(t);
  return s.kind == ScheduleKind::vp ? vp_jet(s.a, s.b, t, 3) : smoothstep_jet(t);
}

PathPoint make_path_point(const Schedule& s, const Eigen::Vector2d& x0, const Eigen::Vector2d& x1, double t) {
  const ScheduleJet jet = schedule_jet(s, t);
  PathPoint p;
  p.t = t;
  p.x_t = jet.d[0].alpha * x0 + jet.d[0].beta * x1;
  p.dx = jet.d[1].alpha * x0 + jet.d[1].beta * x1;
  p.ddx = jet.d[2].alpha * x0 + jet.d[2].beta * x1;
  p.dddx = jet.d[3].alpha * x0 + jet.d[3].beta * x1;
  return p;
}

}  // namespace homo
