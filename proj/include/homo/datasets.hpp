#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "homo/rng.hpp"

namespace homo {

enum class CloudLabel { source, target, generated };

std::string_view to_string(CloudLabel label);
CloudLabel parse_cloud_label(std::string_view name);

// A set of 2-D samples, one per column.
struct PointCloud {
  Eigen::Matrix2Xd points;
  CloudLabel label = CloudLabel::source;

  Eigen::Index size() const { return points.cols(); }
};

enum class DatasetKind { gaussian_modes, circle, irregular_ring, spiral, spin, round_spin, dot_circle };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

// Source/target pair recipe. Shape parameterizations (noiseless curves):
//
//   gaussian_modes  mode i center = R (cos 2 pi i/k, sin 2 pi i/k), R = source_radius
//                   or target_radius; isotropic noise, per-coordinate variance.
//   circle          rings of radius source_radius / target_radius, uniform angle,
//                   radial noise.
//   irregular_ring  source ring source_radius; target r(theta) =
//                   target_radius (1 + irregular_amplitude sin(irregular_frequency theta)),
//                   radial noise.
//   spiral, spin,   source ring source_radius; target Archimedean spiral
//   round_spin      r(theta) = spiral_inner_radius + (target_radius - spiral_inner_radius)
//                   theta / (2 pi rounds), theta uniform in [0, 2 pi rounds],
//                   isotropic noise.
//   dot_circle      source = dot_points from N(0, variance I) followed by
//                   (total_points - dot_points) on a ring of radius source_radius;
//                   target = spiral as above with `rounds`.
//
// Noise standard deviation is sqrt(variance) everywhere. Gaussian modes use
// points_per_mode per mode; every other kind uses total_points per cloud.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::gaussian_modes;
  int mode_count = 8;
  double source_radius = 6.0;
  double target_radius = 13.0;
  double variance = 0.3;
  int points_per_mode = 100;
  int total_points = 600;
  int rounds = 1;
  double spiral_inner_radius = 1.0;
  double irregular_amplitude = 0.25;
  int irregular_frequency = 3;
  int dot_points = 300;

  static DatasetSpec gaussian_modes(int k, double r_src, double r_tgt, int per_mode);
  static DatasetSpec circle(int points);
  static DatasetSpec irregular_ring(int points);
  static DatasetSpec spiral(int points);
  static DatasetSpec spin(int points, int rounds = 1);
  static DatasetSpec dot_circle(int points);

  Eigen::Index source_count() const;
  Eigen::Index target_count() const;
};

void validate(const DatasetSpec& spec);

struct DatasetSample {
  PointCloud source;
  PointCloud target;
};

// Draws the source cloud then the target cloud from `rng`, point by point, in
// the order documented on DatasetSpec (modes in index order; per point the
// shape parameter first, then x noise, then y noise).
DatasetSample sample_dataset(const DatasetSpec& spec, SeededRng& rng);

// Loss configuration and step budget of one cell of a paper table.
struct ExperimentCell {
  std::string loss_label;  // e.g. "M1+M2+SC"
  int steps = 1000;
  double paper_metric = 0.0;  // value reported in the paper's table, for side-by-side display
};

struct PaperExperiment {
  std::string name;
  std::string table;  // "t1", "t2" or "t3"
  DatasetSpec dataset;
  int batch_size = 1600;
  double learning_rate = 0.005;
  std::vector<ExperimentCell> cells;

  const ExperimentCell& cell(std::string_view loss_label) const;
};

const std::vector<PaperExperiment>& list_paper_experiments();
const PaperExperiment& find_experiment(std::string_view name);

// CSV with header `x,y,label`, 17 significant digits.
void write_cloud_csv(std::ostream& out, const std::vector<PointCloud>& clouds);
std::vector<PointCloud> read_cloud_csv(std::istream& in);

}  // namespace homo
