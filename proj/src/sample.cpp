#include "homo/sample.hpp"

namespace homo {

void validate(const SamplerConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("sampler: steps must be >= 1");
  if (cfg.order < 1 || cfg.order > 3) throw ConfigError("sampler: order must be 1, 2 or 3");
  if (!(cfg.delta_t_floor > 0.0 && cfg.delta_t_floor <= 1.0)) throw ConfigError("sampler: delta_t_floor in (0, 1]");
}

double conditioning_step(double step, double floor) {
  if (step < floor) return 0.0;
  double d = 1.0;
  while (d > step) d *= 0.5;
  return d < floor ? floor : d;
}

}  // namespace homo
