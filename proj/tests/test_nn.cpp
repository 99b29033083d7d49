#include "doctest.h"

#include "homo/error.hpp"
#include "homo/nn/adam.hpp"
#include "homo/nn/mlp.hpp"
#include "homo/nn/tape.hpp"
#include "oracles.hpp"

using namespace homo;
using namespace homo::nn;

TEST_CASE("forward: zero parameters give zero output") {
  SeededRng rng(1);
  auto m = init_model<double>({3, 5, 2}, Activation::relu, rng);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  Eigen::MatrixXd x(3, 4);
  x.setRandom();
  CHECK(mlp_forward(m, x).isZero(0.0));
}

TEST_CASE("forward: single linear layer passes input through") {
  SeededRng rng(1);
  auto m = init_model<double>({2, 2}, Activation::relu, rng);
  m.weights[0].setIdentity();
  Eigen::MatrixXd x(2, 1);
  x << -1.0, 3.0;
  const Eigen::MatrixXd y = mlp_forward(m, x);
  CHECK(y(0, 0) == -1.0);
  CHECK(y(1, 0) == 3.0);
}

TEST_CASE("forward: matches straight-line evaluator") {
  for (auto act : {Activation::relu, Activation::tanh}) {
    SeededRng rng(0);
    auto m = init_model<double>({3, 100, 100, 2}, act, rng);
    Eigen::MatrixXd x(3, 1);
    x << 0.1, 0.2, 0.5;
    const Eigen::MatrixXd y = mlp_forward(m, x);
    const auto ref = oracle::straight_line_forward(m, {0.1, 0.2, 0.5});
    CHECK(y(0, 0) == doctest::Approx(ref[0]).epsilon(1e-13));
    CHECK(y(1, 0) == doctest::Approx(ref[1]).epsilon(1e-13));
  }
}

TEST_CASE("forward: dimension mismatch names expected and actual") {
  SeededRng rng(1);
  auto m = init_model<double>({3, 4, 2}, Activation::relu, rng);
  Eigen::MatrixXd x(2, 1);
  x.setZero();
  try {
    (void)mlp_forward(m, x);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.expected() == 3);
    CHECK(e.actual() == 2);
  }
}

TEST_CASE("init: determinism, counts, errors") {
  SeededRng a(7), b(7);
  auto ma = init_model<double>({3, 100, 100, 2}, Activation::relu, a);
  auto mb = init_model<double>({3, 100, 100, 2}, Activation::relu, b);
  for (std::size_t l = 0; l < ma.layer_count(); ++l) {
    CHECK(ma.weights[l] == mb.weights[l]);
    CHECK(ma.biases[l].isZero(0.0));
    const double bound = std::sqrt(6.0 / static_cast<double>(ma.weights[l].rows() + ma.weights[l].cols()));
    CHECK(ma.weights[l].cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(ma.parameter_count() == 10702);
  CHECK(parameter_count({5, 100, 100, 2}) == 10902);
  SeededRng r(1);
  CHECK_THROWS_AS(init_model<double>({}, Activation::relu, r), ConfigError);
  CHECK_THROWS_AS(init_model<double>({3}, Activation::relu, r), ConfigError);
  CHECK_THROWS_AS(init_model<double>({3, 0, 2}, Activation::relu, r), ConfigError);
}

TEST_CASE("backward: stationary point and hand chain rule") {
  SeededRng rng(2);
  auto m = init_model<double>({3, 4, 2}, Activation::relu, rng);
  for (auto& w : m.weights) w.setZero();
  GradientTape<double> tape;
  const auto slot = tape.watch(m);
  Eigen::MatrixXd xin(3, 1);
  xin << 0.3, -0.2, 0.9;
  Var out = mlp_forward(tape, m, slot, tape.constant(xin));
  tape.backward(tape.squared_norm(out));
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    CHECK(tape.gradients(slot).weights[l].isZero(0.0));
    CHECK(tape.gradients(slot).biases[l].isZero(0.0));
  }

  SeededRng r2(3);
  auto s = init_model<double>({1, 1}, Activation::relu, r2);
  s.weights[0](0, 0) = 1.0;
  s.biases[0](0) = 0.0;
  GradientTape<double> t2;
  const auto s2 = t2.watch(s);
  Var y = mlp_forward(t2, s, s2, t2.constant(Eigen::MatrixXd::Constant(1, 1, 2.0)));
  t2.backward(t2.squared_norm(y));
  CHECK(t2.gradients(s2).weights[0](0, 0) == doctest::Approx(8.0));
  CHECK(t2.gradients(s2).biases[0](0) == doctest::Approx(4.0));
}

TEST_CASE("backward: errors without a forward pass") {
  GradientTape<double> tape;
  CHECK_THROWS_AS(tape.backward(Var{0}), TapeError);
  Var c = tape.constant(Eigen::MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(tape.backward(Var{c.index + 5}), TapeError);
}

TEST_CASE("backward: random model matches finite differences") {
  for (auto act : {Activation::tanh, Activation::relu}) {
    SeededRng rng(11);
    auto m = init_model<double>({3, 7, 5, 2}, act, rng);
    Eigen::MatrixXd x(3, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Eigen::MatrixXd target(2, 6);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();

    auto loss_of = [&] { return (mlp_forward(m, x) - target).squaredNorm(); };
    GradientTape<double> tape;
    const auto slot = tape.watch(m);
    Var out = mlp_forward(tape, m, slot, tape.constant(x));
    Eigen::MatrixXd seed = 2.0 * (tape.value(out) - target);
    const auto& g = mlp_backward(tape, out, seed, slot);

    std::size_t checked = 0;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
        double& p = m.weights[l].data()[i];
        const double saved = p, h = 1e-5;
        p = saved + h;
        const double up = loss_of();
        p = saved - h;
        const double down = loss_of();
        p = saved;
        const double base = loss_of();
        if (!oracle::close((up - base) / h, (base - down) / h, 1e-3, 1e-6)) continue;
        ++checked;
        CHECK(oracle::close(g.weights[l].data()[i], (up - down) / (2 * h), 1e-4, 1e-8));
      }
    }
    CHECK(checked > 50);
  }
}

TEST_CASE("tape: detached values contribute no gradient") {
  SeededRng rng(4);
  auto m = init_model<double>({2, 3, 2}, Activation::tanh, rng);
  Eigen::MatrixXd x(2, 3);
  x.setRandom();
  GradientTape<double> tape;
  const auto slot = tape.watch(m);
  Var y = mlp_forward(tape, m, slot, tape.constant(x));
  Var d = tape.detach(y);
  CHECK_FALSE(tape.requires_grad(d));
  tape.backward(tape.squared_norm(d));
  for (std::size_t l = 0; l < m.layer_count(); ++l) CHECK(tape.gradients(slot).weights[l].isZero(0.0));
}

TEST_CASE("tape: slot must match the model") {
  SeededRng rng(4);
  auto a = init_model<double>({2, 2}, Activation::tanh, rng);
  auto b = init_model<double>({2, 2}, Activation::tanh, rng);
  GradientTape<double> tape;
  const auto slot = tape.watch(a);
  CHECK_THROWS_AS(mlp_forward(tape, b, slot, tape.constant(Eigen::MatrixXd::Zero(2, 1))), TapeError);
}

TEST_CASE("adam: zero gradient, hand-evaluated first step, determinism") {
  SeededRng rng(5);
  auto m = init_model<double>({1, 1}, Activation::relu, rng);
  m.weights[0](0, 0) = 0.0;
  auto grads = nn::MlpGradients<double>::zeros_like(m);
  auto state = make_adam_state(m, 0.005);
  adam_step(m, grads, state);
  CHECK(state.step_count == 1);
  CHECK(m.weights[0](0, 0) == 0.0);

  auto fresh = make_adam_state(m, 0.005);
  grads.weights[0](0, 0) = 1.0;
  adam_step(m, grads, fresh);
  // m_hat = 1, v_hat = 1, step = lr * 1 / (1 + 1e-8)
  CHECK(m.weights[0](0, 0) == doctest::Approx(-0.005 / (1.0 + 1e-8)).epsilon(1e-14));

  SeededRng r1(9), r2(9);
  auto m1 = init_model<double>({3, 4, 2}, Activation::relu, r1);
  auto m2 = init_model<double>({3, 4, 2}, Activation::relu, r2);
  auto g = nn::MlpGradients<double>::zeros_like(m1);
  for (auto& w : g.weights) w.setConstant(0.3);
  auto s1 = make_adam_state(m1, 0.005), s2 = make_adam_state(m2, 0.005);
  adam_step(m1, g, s1);
  adam_step(m2, g, s2);
  for (std::size_t l = 0; l < m1.layer_count(); ++l) CHECK(m1.weights[l] == m2.weights[l]);
}

TEST_CASE("adam: non-finite gradient names the layer; shape mismatch") {
  SeededRng rng(5);
  auto m = init_model<double>({2, 3, 2}, Activation::relu, rng);
  auto g = nn::MlpGradients<double>::zeros_like(m);
  g.weights[1](0, 0) = std::nan("");
  auto s = make_adam_state(m, 0.005);
  const auto before = m.weights[0];
  try {
    adam_step(m, g, s);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK(m.weights[0] == before);
  auto bad = nn::MlpGradients<double>::zeros_like(m);
  bad.weights[0].resize(1, 1);
  CHECK_THROWS_AS(adam_step(m, bad, s), DimensionError);
}
