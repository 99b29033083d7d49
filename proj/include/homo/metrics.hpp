#pragma once

#include <cstdint>
#include <string>

#include "homo/datasets.hpp"
#include "homo/fields.hpp"

namespace homo {

// Symmetric mean nearest-neighbour distance:
//   1/2 (mean_g min_t |g - t| + mean_t min_g |t - g|)
// Exact brute force over all pairs.
double euclidean_distance_loss(const PointCloud& generated, const PointCloud& target);

// Parameters of every network a loss configuration trains.
std::int64_t count_params(const LossConfig& cfg, const Architecture& arch);

// 2 * fan_in * fan_out per affine layer.
std::int64_t forward_flops(const std::vector<Eigen::Index>& layer_sizes);

// One forward pass of every active network per batch element. An estimate
// only; bias adds and activations are not counted.
std::int64_t estimate_flops(const LossConfig& cfg, const Architecture& arch, std::int64_t batch = 1);

struct MetricReport {
  std::string dataset;
  std::string loss_config;
  double euclidean_distance = 0.0;
  std::uint64_t seed = 0;
  std::int64_t param_count = 0;
  std::int64_t flop_estimate = 0;
};

}  // namespace homo
