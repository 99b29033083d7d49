#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "homo/datasets.hpp"
#include "homo/error.hpp"
#include "homo/fields.hpp"
#include "homo/rng.hpp"
#include "homo/trajectory.hpp"

namespace homo {

// Draws (d, t): d uniform over `step_set`, t uniform over the grid
// {0, d, 2d, ...} restricted to t + 2d <= 1. When no grid point satisfies the
// bound (d = 1) t is 0; batch assembly then clamps the element to two
// half-steps of 1/2.
std::pair<double, double> sample_step_and_time(SeededRng& rng, const std::vector<double>& step_set);

// Columns [0, true_count) are true-target elements (d = 0, supervised by the
// path derivatives); the remaining columns are self-consistency elements with
// t + 2d <= 1.
struct TrainBatch {
  Eigen::Matrix2Xd x0;
  Eigen::Matrix2Xd x1;
  Eigen::RowVectorXd t;
  Eigen::RowVectorXd d;
  Eigen::Index true_count = 0;

  Eigen::Matrix2Xd x_t;   // every element
  Eigen::Matrix2Xd dx;    // true-target elements only
  Eigen::Matrix2Xd ddx;
  Eigen::Matrix2Xd dddx;

  // When set, the SC loss uses these values instead of building the target
  // from the models.
  std::optional<Eigen::Matrix2Xd> frozen_sc_target;

  Eigen::Index size() const { return t.size(); }
  Eigen::Index sc_count() const { return size() - true_count; }
  bool is_true_target(Eigen::Index i) const { return i < true_count; }
};

// Share of the batch that gets true targets: true_target_fraction when both
// matching and SC terms are on, 1 without SC, 0 without matching terms.
double effective_true_fraction(const LossConfig& cfg);

// Pairs uniformly drawn source and target points (with replacement) and
// places them in the x0/x1 slots according to the schedule's start endpoint.
TrainBatch assemble_batch(const PointCloud& source, const PointCloud& target, const Schedule& schedule,
                          const LossConfig& cfg, Eigen::Index batch_size, SeededRng& rng);

// Fills x_t and the true derivative targets from x0, x1, t.
void attach_path_targets(TrainBatch& batch, const Schedule& schedule);

// (u1(x_t, t, d) + u1(x_{t+d}, t + d, d)) / 2, where x_{t+d} is the model's own
// Taylor step of the highest order available. Plain values: no gradient.
Eigen::Matrix2Xd self_consistency_target(const FieldModels& models, const Eigen::Matrix2Xd& x_t,
                                         const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& d);

struct LossBreakdown {
  double total = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double sc = 0.0;
};

struct FieldGradients {
  MlpGradients u1;
  std::optional<MlpGradients> u2;
  std::optional<MlpGradients> u3;
};

struct LossResult {
  LossBreakdown terms;
  FieldGradients grads;
};

struct LossOptions {
  // Cut the SC target out of the gradient. Only ablations turn this off.
  bool stopgrad = true;
};

LossResult homo_loss(const FieldModels& models, const TrainBatch& batch, const LossConfig& cfg,
                     const LossOptions& options = {});

struct TrainSettings {
  DatasetSpec dataset;
  Schedule schedule;
  LossConfig loss;
  Architecture architecture;
  double learning_rate = 0.005;
  int steps = 1000;
  Eigen::Index batch_size = 1600;
  std::uint64_t seed = 0;
};

void validate(const TrainSettings& settings);

// Seed streams split from SeededRng(seed).
enum class RunStream : std::uint64_t { data = 0, init = 1, batches = 2, evaluation = 3 };

struct TrainResult {
  FieldModels models;
  std::vector<LossBreakdown> history;
  DatasetSample data;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(int step, LossBreakdown terms, TrainResult partial);

  int step() const { return step_; }
  const LossBreakdown& terms() const { return terms_; }
  const TrainResult& partial() const { return partial_; }

 private:
  int step_;
  LossBreakdown terms_;
  TrainResult partial_;
};

// Runs exactly settings.steps Adam updates of every network.
TrainResult train(const TrainSettings& settings);

// Same, on caller-provided clouds and initial models.
TrainResult train(const TrainSettings& settings, DatasetSample data, FieldModels models);

}  // namespace homo
