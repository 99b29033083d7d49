#include "homo/train.hpp"

#include <cmath>
#include <string>

#include "homo/nn/adam.hpp"
#include "homo/nn/tape.hpp"
#include "homo/sample.hpp"

namespace homo {

namespace {

using Tape = nn::GradientTape<double>;
using nn::Var;

Eigen::MatrixXd row_matrix(const Eigen::RowVectorXd& r) { return r; }

// Field networks recorded on a tape.
class TapeFields {
 public:
  TapeFields(Tape& tape, const FieldModels& models) : tape_(tape), models_(models) {
    s1_ = tape.watch(models.u1);
    if (models.u2) s2_ = tape.watch(*models.u2);
    if (models.u3) s3_ = tape.watch(*models.u3);
  }

  Var velocity(Var x, Var t, Var d) { return nn::mlp_forward(tape_, models_.u1, s1_, input({x}, t, d)); }
  Var acceleration(Var v, Var x, Var t, Var d) {
    return nn::mlp_forward(tape_, *models_.u2, s2_, input({v, x}, t, d));
  }
  Var jerk(Var a, Var v, Var x, Var t, Var d) {
    return nn::mlp_forward(tape_, *models_.u3, s3_, input({a, v, x}, t, d));
  }

  FieldGradients gradients() const {
    FieldGradients g{tape_.gradients(s1_), std::nullopt, std::nullopt};
    if (models_.u2) g.u2 = tape_.gradients(s2_);
    if (models_.u3) g.u3 = tape_.gradients(s3_);
    return g;
  }

 private:
  Var input(std::initializer_list<Var> vectors, Var t, Var d) {
    if (vectors.size() == 1) {
      const Var x = *vectors.begin();
      return models_.step_conditioned ? tape_.concat({x, t, d}) : tape_.concat({x, t});
    }
    if (vectors.size() == 2) {
      const Var* p = vectors.begin();
      return models_.step_conditioned ? tape_.concat({p[0], p[1], t, d}) : tape_.concat({p[0], p[1], t});
    }
    const Var* p = vectors.begin();
    return models_.step_conditioned ? tape_.concat({p[0], p[1], p[2], t, d}) : tape_.concat({p[0], p[1], p[2], t});
  }

  Tape& tape_;
  const FieldModels& models_;
  std::size_t s1_ = 0, s2_ = 0, s3_ = 0;
};

Var reduce(Tape& tape, Var prediction, const Eigen::Matrix2Xd& target, Reduction reduction) {
  Var r = tape.squared_norm(tape.sub(prediction, tape.constant(target)));
  if (reduction == Reduction::mean) r = tape.scale(r, 1.0 / static_cast<double>(target.cols()));
  return r;
}

Var reduce(Tape& tape, Var prediction, Var target, Reduction reduction, Eigen::Index count) {
  Var r = tape.squared_norm(tape.sub(prediction, target));
  if (reduction == Reduction::mean) r = tape.scale(r, 1.0 / static_cast<double>(count));
  return r;
}

}  // namespace

std::pair<double, double> sample_step_and_time(SeededRng& rng, const std::vector<double>& step_set) {
  if (step_set.empty()) throw ConfigError("sample_step_and_time: empty step set");
  const double d = step_set[rng.index(step_set.size())];
  const double slots = std::floor((1.0 - 2.0 * d) / d + 1e-9) + 1.0;
  if (slots < 1.0) return {d, 0.0};
  const auto j = rng.index(static_cast<std::uint64_t>(slots));
  return {d, static_cast<double>(j) * d};
}

double effective_true_fraction(const LossConfig& cfg) {
  if (!cfg.use_sc) return 1.0;
  if (!cfg.any_matching()) return 0.0;
  return cfg.true_target_fraction;
}

void attach_path_targets(TrainBatch& batch, const Schedule& schedule) {
  const Eigen::Index n = batch.size();
  const Eigen::Index k = batch.true_count;
  batch.x_t.resize(2, n);
  batch.dx.resize(2, k);
  batch.ddx.resize(2, k);
  batch.dddx.resize(2, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ScheduleJet jet = schedule_jet(schedule, batch.t(i));
    batch.x_t.col(i) = jet.d[0].alpha * batch.x0.col(i) + jet.d[0].beta * batch.x1.col(i);
    if (i < k) {
      batch.dx.col(i) = jet.d[1].alpha * batch.x0.col(i) + jet.d[1].beta * batch.x1.col(i);
      batch.ddx.col(i) = jet.d[2].alpha * batch.x0.col(i) + jet.d[2].beta * batch.x1.col(i);
      batch.dddx.col(i) = jet.d[3].alpha * batch.x0.col(i) + jet.d[3].beta * batch.x1.col(i);
    }
  }
}

TrainBatch assemble_batch(const PointCloud& source, const PointCloud& target, const Schedule& schedule,
                          const LossConfig& cfg, Eigen::Index batch_size, SeededRng& rng) {
  validate(cfg);
  if (batch_size <= 0) throw ConfigError("batch size must be > 0");
  if (source.size() == 0 || target.size() == 0) throw ConfigError("training clouds must be non-empty");
  const double fraction = effective_true_fraction(cfg);
  const auto k = static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(batch_size)));

  TrainBatch b;
  b.true_count = k;
  b.x0.resize(2, batch_size);
  b.x1.resize(2, batch_size);
  b.t.resize(batch_size);
  b.d.resize(batch_size);
  const bool source_is_x0 = start_endpoint(schedule) == Endpoint::x0;
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    const auto si = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(source.size())));
    const auto ti = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(target.size())));
    auto [d, t] = sample_step_and_time(rng, cfg.step_set);
    if (i < k) {
      d = 0.0;
    } else if (2.0 * d > 1.0) {
      d = 0.5;
      t = 0.0;
    }
    b.t(i) = t;
    b.d(i) = d;
    b.x0.col(i) = source_is_x0 ? source.points.col(si) : target.points.col(ti);
    b.x1.col(i) = source_is_x0 ? target.points.col(ti) : source.points.col(si);
  }
  attach_path_targets(b, schedule);
  return b;
}

Eigen::Matrix2Xd self_consistency_target(const FieldModels& models, const Eigen::Matrix2Xd& x_t,
                                         const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& d) {
  const Eigen::Matrix2Xd s_t = models.velocity(x_t, t, d);
  const Eigen::Matrix2Xd x_next = taylor_advance(models, x_t, t, d, d, models.order());
  const Eigen::RowVectorXd t_next = t + d;
  const Eigen::Matrix2Xd s_next = models.velocity(x_next, t_next, d);
  return (s_t + s_next) * 0.5;
}

LossResult homo_loss(const FieldModels& models, const TrainBatch& batch, const LossConfig& cfg,
                     const LossOptions& options) {
  validate(cfg);
  if (cfg.needs_u2() && !models.u2) throw ConfigError("loss: M2/M3 enabled but no u2 network");
  if (cfg.needs_u3() && !models.u3) throw ConfigError("loss: M3 enabled but no u3 network");
  const Eigen::Index k = batch.true_count;
  const Eigen::Index n_sc = batch.sc_count();
  if (cfg.any_matching() && k == 0) {
    throw ConfigError("loss: matching terms enabled but the true-target sub-batch is empty; raise true_target_fraction");
  }
  if (cfg.use_sc && n_sc == 0) {
    throw ConfigError("loss: SC enabled but the self-consistency sub-batch is empty; lower true_target_fraction");
  }

  Tape tape;
  TapeFields f(tape, models);
  LossResult result;
  std::vector<Var> terms;

  if (cfg.any_matching()) {
    const Var x = tape.constant(batch.x_t.leftCols(k));
    const Var t = tape.constant(row_matrix(batch.t.head(k)));
    const Var d = tape.constant(Eigen::MatrixXd::Zero(1, k));
    const Var v = f.velocity(x, t, d);
    if (cfg.use_m1) {
      const Var m1 = reduce(tape, v, batch.dx, cfg.reduction);
      result.terms.m1 = tape.value(m1)(0, 0);
      terms.push_back(m1);
    }
    if (cfg.needs_u2()) {
      const Var v_in = cfg.chain_gradients ? v : tape.detach(v);
      const Var a = f.acceleration(v_in, x, t, d);
      if (cfg.use_m2) {
        const Var m2 = reduce(tape, a, batch.ddx, cfg.reduction);
        result.terms.m2 = tape.value(m2)(0, 0);
        terms.push_back(m2);
      }
      if (cfg.use_m3) {
        const Var a_in = cfg.chain_gradients ? a : tape.detach(a);
        const Var j = f.jerk(a_in, v_in, x, t, d);
        const Var m3 = reduce(tape, j, batch.dddx, cfg.reduction);
        result.terms.m3 = tape.value(m3)(0, 0);
        terms.push_back(m3);
      }
    }
  }

  if (cfg.use_sc) {
    const Eigen::RowVectorXd d_row = batch.d.tail(n_sc);
    const Var x = tape.constant(batch.x_t.rightCols(n_sc));
    const Var t = tape.constant(row_matrix(batch.t.tail(n_sc)));
    const Var d = tape.constant(row_matrix(d_row));
    const Var query = f.velocity(x, t, tape.constant(row_matrix(2.0 * d_row)));
    Var target;
    if (batch.frozen_sc_target) {
      target = tape.constant(*batch.frozen_sc_target);
    } else {
      const Var s_t = f.velocity(x, t, d);
      Var x_next = tape.add(x, tape.scale_columns(s_t, d_row));
      if (models.u2) {
        const Var a = f.acceleration(s_t, x, t, d);
        const Eigen::RowVectorXd c2 = d_row.array().square() / 2.0;
        x_next = tape.add(x_next, tape.scale_columns(a, c2));
        if (models.u3) {
          const Var j = f.jerk(a, s_t, x, t, d);
          const Eigen::RowVectorXd c3 = d_row.array().cube() / 6.0;
          x_next = tape.add(x_next, tape.scale_columns(j, c3));
        }
      }
      const Var t_next = tape.constant(row_matrix(batch.t.tail(n_sc) + d_row));
      const Var s_next = f.velocity(x_next, t_next, d);
      target = tape.scale(tape.add(s_t, s_next), 0.5);
      if (options.stopgrad) target = tape.detach(target);
    }
    const Var sc = reduce(tape, query, target, cfg.reduction, n_sc);
    result.terms.sc = tape.value(sc)(0, 0);
    terms.push_back(sc);
  }

  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  result.terms.total = tape.value(total)(0, 0);
  tape.backward(total);
  result.grads = f.gradients();
  return result;
}

void validate(const TrainSettings& s) {
  validate(s.dataset);
  validate(s.loss);
  if (s.steps < 0) throw ConfigError("train: steps must be >= 0");
  if (s.batch_size <= 0) throw ConfigError("train: batch_size must be > 0");
  if (!(s.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (s.architecture.hidden.empty()) throw ConfigError("train: need at least one hidden layer");
}

DivergenceError::DivergenceError(int step, LossBreakdown terms, TrainResult partial)
    : NumericError("training diverged at step " + std::to_string(step) + " (total=" + std::to_string(terms.total) +
                   " m1=" + std::to_string(terms.m1) + " m2=" + std::to_string(terms.m2) +
                   " m3=" + std::to_string(terms.m3) + " sc=" + std::to_string(terms.sc) + ")"),
      step_(step),
      terms_(terms),
      partial_(std::move(partial)) {}

TrainResult train(const TrainSettings& settings) {
  validate(settings);
  const SeededRng root(settings.seed);
  SeededRng data_rng = root.split(static_cast<std::uint64_t>(RunStream::data));
  SeededRng init_rng = root.split(static_cast<std::uint64_t>(RunStream::init));
  DatasetSample data = sample_dataset(settings.dataset, data_rng);
  FieldModels models = make_field_models(settings.loss, settings.architecture, init_rng);
  return train(settings, std::move(data), std::move(models));
}

TrainResult train(const TrainSettings& settings, DatasetSample data, FieldModels models) {
  validate(settings);
  SeededRng batch_rng = SeededRng(settings.seed).split(static_cast<std::uint64_t>(RunStream::batches));

  TrainResult result{std::move(models), {}, std::move(data)};
  auto& m = result.models;
  auto adam1 = nn::make_adam_state(m.u1, settings.learning_rate);
  std::optional<nn::AdamState<double>> adam2, adam3;
  if (m.u2) adam2 = nn::make_adam_state(*m.u2, settings.learning_rate);
  if (m.u3) adam3 = nn::make_adam_state(*m.u3, settings.learning_rate);
  result.history.reserve(static_cast<std::size_t>(settings.steps));

  for (int step = 0; step < settings.steps; ++step) {
    const TrainBatch batch = assemble_batch(result.data.source, result.data.target, settings.schedule,
                                            settings.loss, settings.batch_size, batch_rng);
    LossResult loss = homo_loss(m, batch, settings.loss);
    if (!std::isfinite(loss.terms.total)) throw DivergenceError(step, loss.terms, result);
    result.history.push_back(loss.terms);
    try {
      nn::adam_step(m.u1, loss.grads.u1, adam1);
      if (m.u2) nn::adam_step(*m.u2, *loss.grads.u2, *adam2);
      if (m.u3) nn::adam_step(*m.u3, *loss.grads.u3, *adam3);
    } catch (const NumericError&) {
      throw DivergenceError(step, loss.terms, result);
    }
  }
  return result;
}

}  // namespace homo
