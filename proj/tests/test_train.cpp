#include "doctest.h"

#include <map>
#include <set>

#include "homo/error.hpp"
#include "homo/train.hpp"
#include "oracles.hpp"

using namespace homo;

namespace {

Architecture small_arch(nn::Activation act = nn::Activation::tanh) {
  Architecture a;
  a.hidden = {8, 8};
  a.activation = act;
  return a;
}

// Single linear layer networks with hand-set weights.
Mlp linear(Eigen::Index in, const Eigen::MatrixXd& w, const Eigen::Vector2d& b) {
  Mlp m;
  m.layer_sizes = {in, 2};
  m.weights = {w};
  m.biases = {b};
  m.activation = nn::Activation::relu;
  return m;
}

bool all_zero(const MlpGradients& g) {
  for (const auto& w : g.weights) {
    if (!w.isZero(0.0)) return false;
  }
  for (const auto& b : g.biases) {
    if (!b.isZero(0.0)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("loss labels") {
  CHECK(LossConfig::from_label("M1+M2+SC").label() == "M1+M2+SC");
  CHECK(LossConfig::from_label(" sc + m1 ").label() == "M1+SC");
  CHECK(LossConfig::from_label("M1+M2+M3+SC").needs_u3());
  CHECK_THROWS_AS(LossConfig::from_label("M4"), ConfigError);
  CHECK_THROWS_AS(LossConfig::from_label(""), ConfigError);
}

TEST_CASE("step and time sampling") {
  SeededRng rng(1);
  const auto steps = dyadic_steps(true);
  REQUIRE(steps.size() == 8);
  std::map<double, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto [d, t] = sample_step_and_time(rng, steps);
    ++counts[d];
    if (d < 1.0) {
      CHECK(t + 2 * d <= 1.0 + 1e-12);
      CHECK(std::abs(t / d - std::round(t / d)) < 1e-9);
    } else {
      CHECK(t == 0.0);
    }
  }
  REQUIRE(counts.size() == 8);
  for (const auto& [d, c] : counts) CHECK(std::abs(static_cast<double>(c) / n - 0.125) < 0.01);

  std::set<double> times;
  for (int i = 0; i < 20000; ++i) times.insert(sample_step_and_time(rng, {1.0 / 128}).second);
  CHECK(times.size() == 127);
  CHECK(*times.rbegin() == doctest::Approx(1.0 - 2.0 / 128));
}

TEST_CASE("batch assembly: split, d = 0 for true targets, d = 1 clamp") {
  SeededRng rng(2);
  auto cfg = LossConfig::from_label("M1+SC");
  const auto b = oracle::random_batch(cfg, Schedule::vp(), 40, rng);
  CHECK(b.true_count == 30);
  CHECK(b.true_count + b.sc_count() == 40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    if (b.is_true_target(i)) {
      CHECK(b.d(i) == 0.0);
    } else {
      CHECK(b.d(i) > 0.0);
      CHECK(b.t(i) + 2 * b.d(i) <= 1.0 + 1e-12);
    }
  }
  cfg.step_set = {1.0};
  const auto c = oracle::random_batch(cfg, Schedule::vp(), 8, rng);
  for (Eigen::Index i = c.true_count; i < 8; ++i) {
    CHECK(c.d(i) == 0.5);
    CHECK(c.t(i) == 0.0);
  }
  CHECK(oracle::random_batch(LossConfig::from_label("M1"), Schedule::vp(), 10, rng).true_count == 10);
  CHECK(oracle::random_batch(LossConfig::from_label("SC"), Schedule::vp(), 10, rng).true_count == 0);
}

TEST_CASE("batch assembly: vp puts the source sample in x1") {
  PointCloud src{Eigen::Matrix2Xd::Constant(2, 3, -1.0), CloudLabel::source};
  PointCloud tgt{Eigen::Matrix2Xd::Constant(2, 3, 5.0), CloudLabel::target};
  SeededRng rng(3);
  const auto cfg = LossConfig::from_label("M1");
  const auto vp = assemble_batch(src, tgt, Schedule::vp(), cfg, 4, rng);
  CHECK(vp.x1(0, 0) == -1.0);
  CHECK(vp.x0(0, 0) == 5.0);
  const auto ss = assemble_batch(src, tgt, Schedule::smoothstep(), cfg, 4, rng);
  CHECK(ss.x0(0, 0) == -1.0);
  CHECK(ss.x1(0, 0) == 5.0);
}

TEST_CASE("self-consistency target: constant and identity fields") {
  FieldModels m;
  m.step_conditioned = true;
  m.u1 = linear(4, Eigen::MatrixXd::Zero(2, 4), {0.3, -0.7});
  m.u2 = linear(6, Eigen::MatrixXd::Zero(2, 6), {0.0, 0.0});
  Eigen::Matrix2Xd x(2, 2);
  x << 1, 2, 3, 4;
  const Eigen::RowVectorXd t = Eigen::RowVectorXd::Constant(2, 0.25);
  const Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(2, 0.125);
  const auto c = self_consistency_target(m, x, t, d);
  CHECK(c(0, 0) == doctest::Approx(0.3));
  CHECK(c(1, 1) == doctest::Approx(-0.7));

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 4);
  w(0, 0) = w(1, 1) = 1.0;
  m.u1 = linear(4, w, {0.0, 0.0});
  const auto id = self_consistency_target(m, x, t, d);
  CHECK((id - x * (1.0 + 0.125 / 2)).norm() < 1e-14);
}

TEST_CASE("loss: exact fit and hand-computed single element") {
  FieldModels m;
  m.u1 = linear(3, Eigen::MatrixXd::Zero(2, 3), {0.0, 0.0});
  TrainBatch b;
  b.x0 = Eigen::Matrix2Xd::Zero(2, 1);
  b.x1 = Eigen::Matrix2Xd::Zero(2, 1);
  b.t = Eigen::RowVectorXd::Constant(1, 0.5);
  b.d = Eigen::RowVectorXd::Zero(1);
  b.true_count = 1;
  b.x_t = Eigen::Matrix2Xd::Zero(2, 1);
  b.dx = Eigen::Matrix2Xd(2, 1);
  b.dx << 3.0, 4.0;
  b.ddx = b.dddx = Eigen::Matrix2Xd::Zero(2, 1);
  const auto cfg = LossConfig::from_label("M1");
  CHECK(homo_loss(m, b, cfg).terms.total == doctest::Approx(25.0));
  m.u1.biases[0] << 3.0, 4.0;
  CHECK(homo_loss(m, b, cfg).terms.total == 0.0);
}

TEST_CASE("loss: empty sub-batch errors point at true_target_fraction") {
  SeededRng rng(4);
  auto cfg = LossConfig::from_label("M1+SC");
  cfg.true_target_fraction = 1.0;
  auto models = make_field_models(cfg, small_arch(), rng);
  const auto b = oracle::random_batch(cfg, Schedule::vp(), 8, rng);
  try {
    (void)homo_loss(models, b, cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("true_target_fraction") != std::string::npos);
  }
}

TEST_CASE("loss: chained composite gradient matches finite differences") {
  const char* labels[] = {"M1", "M2", "M1+M2", "M1+SC", "M1+M2+SC", "M2+SC", "M1+M2+M3+SC", "SC"};
  std::uint64_t seed = 100;
  for (const char* label : labels) {
    for (auto sched : {Schedule::vp(), Schedule::smoothstep()}) {
      CAPTURE(std::string(label));
      SeededRng rng(seed++);
      auto cfg = LossConfig::from_label(label);
      cfg.chain_gradients = true;
      cfg.reduction = (seed % 2) ? Reduction::sum : Reduction::mean;
      auto models = make_field_models(cfg, small_arch(), rng);
      auto batch = oracle::random_batch(cfg, sched, 12, rng);
      const auto analytic = homo_loss(models, batch, cfg);
      if (cfg.use_sc) {
        batch.frozen_sc_target =
            self_consistency_target(models, batch.x_t.rightCols(batch.sc_count()), batch.t.tail(batch.sc_count()),
                                    batch.d.tail(batch.sc_count()));
      }
      auto loss_of = [&] { return homo_loss(models, batch, cfg).terms.total; };
      const auto r = oracle::finite_difference_check(models, analytic.grads, loss_of, 1e-5, false);
      CHECK(r.worst_rel < 1e-4);
    }
  }
}

TEST_CASE("loss: detached inputs drop exactly the cross-network gradient") {
  auto grad_diff = [](const MlpGradients& a, const MlpGradients& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      worst = std::max(worst, (a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  for (const char* label : {"M1+M2", "M1+M2+SC", "M1+M2+M3+SC"}) {
    SeededRng rng(300);
    auto cfg = LossConfig::from_label(label);
    cfg.chain_gradients = false;
    auto models = make_field_models(cfg, small_arch(), rng);
    const auto batch = oracle::random_batch(cfg, Schedule::vp(), 12, rng);
    const auto detached = homo_loss(models, batch, cfg);

    // u1 sees only the terms that evaluate u1 directly.
    auto only_u1 = cfg;
    only_u1.use_m2 = only_u1.use_m3 = false;
    CHECK(grad_diff(detached.grads.u1, homo_loss(models, batch, only_u1).grads.u1) < 1e-12);

    // u2 sees M2 alone; u3 is unaffected by the switch.
    auto chained = cfg;
    chained.chain_gradients = true;
    auto no_m3 = chained;
    no_m3.use_m3 = false;
    CHECK(grad_diff(*detached.grads.u2, *homo_loss(models, batch, no_m3).grads.u2) < 1e-12);
    if (cfg.use_m3) CHECK(grad_diff(*detached.grads.u3, *homo_loss(models, batch, chained).grads.u3) < 1e-12);
  }
}

TEST_CASE("loss: relu composite gradient away from kinks") {
  SeededRng rng(7);
  auto cfg = LossConfig::from_label("M1+M2+SC");
  cfg.chain_gradients = true;
  auto models = make_field_models(cfg, small_arch(nn::Activation::relu), rng);
  auto batch = oracle::random_batch(cfg, Schedule::vp(), 12, rng);
  const auto analytic = homo_loss(models, batch, cfg);
  batch.frozen_sc_target = self_consistency_target(models, batch.x_t.rightCols(batch.sc_count()),
                                                   batch.t.tail(batch.sc_count()), batch.d.tail(batch.sc_count()));
  const auto r = oracle::finite_difference_check(
      models, analytic.grads, [&] { return homo_loss(models, batch, cfg).terms.total; }, 1e-5, true);
  CHECK(r.checked > r.skipped);
  CHECK(r.worst_rel < 1e-4);
}

TEST_CASE("loss: without stopgrad the target is differentiated too") {
  SeededRng rng(8);
  auto cfg = LossConfig::from_label("M1+M2+SC");
  cfg.chain_gradients = true;
  auto models = make_field_models(cfg, small_arch(), rng);
  const auto batch = oracle::random_batch(cfg, Schedule::smoothstep(), 10, rng);
  const auto analytic = homo_loss(models, batch, cfg, LossOptions{false});
  const auto r = oracle::finite_difference_check(
      models, analytic.grads, [&] { return homo_loss(models, batch, cfg, LossOptions{false}).terms.total; }, 1e-5,
      false);
  CHECK(r.worst_rel < 1e-4);
}

TEST_CASE("stopgrad equals the frozen-target oracle exactly") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    SeededRng rng(200 + s);
    const auto cfg = LossConfig::from_label(s % 2 ? "M1+M2+SC" : "M1+M2+M3+SC");
    auto models = make_field_models(cfg, small_arch(nn::Activation::relu), rng);
    auto batch = oracle::random_batch(cfg, Schedule::vp(), 16, rng);
    const auto live = homo_loss(models, batch, cfg);
    batch.frozen_sc_target = self_consistency_target(models, batch.x_t.rightCols(batch.sc_count()),
                                                     batch.t.tail(batch.sc_count()), batch.d.tail(batch.sc_count()));
    const auto frozen = homo_loss(models, batch, cfg);
    CHECK(std::abs(live.terms.total - frozen.terms.total) <= 1e-12 * std::abs(frozen.terms.total));
    double worst = 0.0;
    auto diff = [&](const MlpGradients& a, const MlpGradients& b) {
      for (std::size_t l = 0; l < a.weights.size(); ++l) {
        worst = std::max(worst, (a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff());
      }
    };
    diff(live.grads.u1, frozen.grads.u1);
    diff(*live.grads.u2, *frozen.grads.u2);
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("term isolation") {
  SeededRng rng(9);
  auto models = make_field_models(LossConfig::from_label("M1+M2+SC"), small_arch(), rng);
  const auto cfg = LossConfig::from_label("M1+SC");
  const auto batch = oracle::random_batch(cfg, Schedule::vp(), 12, rng);
  const auto r = homo_loss(models, batch, cfg);
  REQUIRE(r.grads.u2);
  CHECK(all_zero(*r.grads.u2));

  auto m2_only = LossConfig::from_label("M2");
  m2_only.chain_gradients = false;
  const auto detached = homo_loss(models, batch, m2_only);
  CHECK(all_zero(detached.grads.u1));
  m2_only.chain_gradients = true;
  CHECK_FALSE(all_zero(homo_loss(models, batch, m2_only).grads.u1));
}

TEST_CASE("train: zero steps, determinism, divergence") {
  TrainSettings s;
  s.dataset = DatasetSpec::gaussian_modes(4, 2.0, 4.0, 10);
  s.loss = LossConfig::from_label("M1+M2+SC");
  s.architecture = small_arch(nn::Activation::relu);
  s.batch_size = 32;
  s.steps = 0;
  s.seed = 5;
  const auto r0 = train(s);
  SeededRng root(5);
  SeededRng init = root.split(static_cast<std::uint64_t>(RunStream::init));
  const auto fresh = make_field_models(s.loss, s.architecture, init);
  CHECK(r0.models.u1.weights[0] == fresh.u1.weights[0]);
  CHECK(r0.history.empty());

  s.steps = 20;
  const auto a = train(s);
  const auto b = train(s);
  CHECK(a.history.size() == 20);
  for (std::size_t l = 0; l < a.models.u1.layer_count(); ++l) {
    CHECK(a.models.u1.weights[l] == b.models.u1.weights[l]);
    CHECK(a.models.u2->weights[l] == b.models.u2->weights[l]);
  }

  DatasetSample bad{{Eigen::Matrix2Xd::Constant(2, 4, std::nan("")), CloudLabel::source},
                    {Eigen::Matrix2Xd::Ones(2, 4), CloudLabel::target}};
  try {
    (void)train(s, bad, fresh);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 0);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("train: eight-mode M1+M2+SC loss falls") {
  const auto& e = find_experiment("eight_mode");
  TrainSettings s;
  s.dataset = e.dataset;
  s.loss = LossConfig::from_label("M1+M2+SC");
  s.batch_size = e.batch_size;
  s.steps = 200;
  s.seed = 0;
  const auto r = train(s);
  REQUIRE(r.history.size() == 200);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += r.history[static_cast<std::size_t>(i)].total;
    last += r.history[r.history.size() - 1 - static_cast<std::size_t>(i)].total;
  }
  CHECK(std::isfinite(last));
  CHECK(last < first);
}
