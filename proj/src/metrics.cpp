#include "homo/metrics.hpp"

#include <limits>

#include "homo/error.hpp"

namespace homo {

namespace {

double mean_nearest(const Eigen::Matrix2Xd& from, const Eigen::Matrix2Xd& to) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    const double best = (to.colwise() - from.col(i)).colwise().squaredNorm().minCoeff();
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.cols());
}

}  // namespace

double euclidean_distance_loss(const PointCloud& generated, const PointCloud& target) {
  if (generated.size() == 0 || target.size() == 0) {
    throw ConfigError("euclidean_distance_loss: both clouds must be non-empty");
  }
  return 0.5 * (mean_nearest(generated.points, target.points) + mean_nearest(target.points, generated.points));
}

std::int64_t count_params(const LossConfig& cfg, const Architecture& arch) {
  validate(cfg);
  const bool cond = cfg.step_conditioned();
  std::int64_t n = nn::parameter_count(field_layer_sizes(FieldRole::velocity, cond, arch));
  if (cfg.needs_u2()) n += nn::parameter_count(field_layer_sizes(FieldRole::acceleration, cond, arch));
  if (cfg.needs_u3()) n += nn::parameter_count(field_layer_sizes(FieldRole::jerk, cond, arch));
  return n;
}

std::int64_t forward_flops(const std::vector<Eigen::Index>& layer_sizes) {
  std::int64_t f = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) f += 2 * layer_sizes[i] * layer_sizes[i + 1];
  return f;
}

std::int64_t estimate_flops(const LossConfig& cfg, const Architecture& arch, std::int64_t batch) {
  validate(cfg);
  const bool cond = cfg.step_conditioned();
  std::int64_t f = forward_flops(field_layer_sizes(FieldRole::velocity, cond, arch));
  if (cfg.needs_u2()) f += forward_flops(field_layer_sizes(FieldRole::acceleration, cond, arch));
  if (cfg.needs_u3()) f += forward_flops(field_layer_sizes(FieldRole::jerk, cond, arch));
  return f * batch;
}

}  // namespace homo
