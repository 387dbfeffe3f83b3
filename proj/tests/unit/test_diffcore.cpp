#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "laser/diffcore/adam.hpp"
#include "laser/diffcore/checkpoint.hpp"
#include "laser/diffcore/gaussian.hpp"
#include "laser/diffcore/mlp.hpp"
#include "laser/diffcore/ops.hpp"
#include "laser/error.hpp"
#include "../support/gradcheck.hpp"
#include "../support/op_catalogue.hpp"

using namespace laser;
using namespace laser::diff;
using laser::testing::uniform_tensor;

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("forward_mlp with zero weights gives zeros") {
  std::mt19937_64 rng(1);
  Mlp net("z", {3, 2}, Activation::tanh, Activation::identity, rng);
  net.zero_all();
  Tape tape;
  Var out = forward_mlp(net, tape.constant(uniform_tensor({5, 3}, rng)));
  for (double v : out.value().data()) CHECK(v == 0.0);
}

TEST_CASE("forward_mlp propagates shapes and records on the tape") {
  std::mt19937_64 rng(2);
  Mlp net("n", {3, 5, 2}, Activation::relu, Activation::identity, rng);
  CHECK(net.parameter_count() == 3 * 5 + 5 + 5 * 2 + 2);
  Tape tape;
  Var out = forward_mlp(net, tape.constant(uniform_tensor({4, 3}, rng)));
  CHECK(out.value().shape() == Shape{4, 2});
  CHECK(tape.size() > 4);
  CHECK(tape.topologically_ordered());

  Tensor fast = forward_mlp(net, uniform_tensor({4, 3}, rng));
  CHECK(fast.shape() == Shape{4, 2});
}

TEST_CASE("forward_mlp hand-set scalar network") {
  std::mt19937_64 rng(3);
  Mlp net("s", {1, 1}, Activation::tanh, Activation::tanh, rng);
  net.weight(0).value[0] = 2.0;
  net.bias(0).value[0] = 1.0;
  Tape tape;
  Var out = forward_mlp(net, tape.constant(Tensor::matrix(1, 1, {0.5})));
  CHECK(out.value().item() == doctest::Approx(0.964027580075817).epsilon(1e-12));
  CHECK(forward_mlp(net, Tensor::matrix(1, 1, {0.5})).item() == doctest::Approx(std::tanh(2.0)));
}

TEST_CASE("forward_mlp rejects mismatched input and leaves input untouched") {
  std::mt19937_64 rng(4);
  Mlp net("n", {3, 4, 2}, Activation::tanh, Activation::identity, rng);
  Tape tape;
  CHECK_THROWS_AS(forward_mlp(net, tape.constant(Tensor({2, 4}))), DimensionError);
  CHECK_THROWS_AS(forward_mlp(net, Tensor({2, 2})), DimensionError);

  const Tensor input = uniform_tensor({6, 3}, rng);
  Tensor copy = input;
  Var in = tape.constant(input);
  forward_mlp(net, in);
  forward_mlp(net, copy);
  CHECK(in.value() == input);
  CHECK(copy == input);
}

TEST_CASE("backward of x^2 at 3 is 6") {
  Tape tape;
  Var x = tape.variable(Tensor::scalar(3.0));
  tape.backward(square(x));
  CHECK(tape.grad(x).item() == 6.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Var x = tape.variable(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(tape.backward(tanh(x)), ContractError);
}

TEST_CASE("sum tanh(Wx) matches finite differences") {
  std::mt19937_64 rng(5);
  Parameter w{"w", uniform_tensor({3, 4}, rng)};
  const Tensor x = uniform_tensor({2, 3}, rng);
  std::vector<Parameter*> params{&w};
  const double err = laser::testing::parameter_gradient_error(params, [&](Tape& t) {
    return sum(tanh(matmul(t.constant(x), t.parameter(w))));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("unreachable parameters get exactly zero gradient") {
  Parameter used{"used", Tensor({1, 2}, 0.5)};
  Parameter unused{"unused", Tensor({1, 2}, 0.5)};
  Tape tape;
  Var a = tape.parameter(used);
  Var b = tape.parameter(unused);
  (void)b;
  GradientMap grads = tape.backward(sum(square(a)));
  REQUIRE(grads.count(&unused) == 1);
  for (double g : grads.at(&unused).data()) CHECK(g == 0.0);
  CHECK(grads.at(&used)[0] == doctest::Approx(1.0));
}

TEST_CASE("parameters used twice accumulate gradient") {
  Parameter p{"p", Tensor::scalar(2.0)};
  Tape tape;
  Var first = tape.parameter(p);
  Var second = tape.parameter(p);
  GradientMap grads = tape.backward(add(square(first), scale(second, 3.0)));
  CHECK(grads.at(&p).item() == doctest::Approx(7.0));
}

TEST_CASE("every primitive matches finite differences") {
  for (const auto& op : laser::testing::op_catalogue()) {
    CAPTURE(op.name);
    CHECK(laser::testing::op_gradient_error(op, 10, 42) < 1e-4);
  }
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(6);
  Mlp net("d", {4, 8, 3}, Activation::tanh, Activation::identity, rng);
  const Tensor x = uniform_tensor({5, 4}, rng);
  auto run = [&] {
    Tape tape;
    return tape.backward(sum(square(forward_mlp(net, tape.constant(x)))));
  };
  GradientMap a = run();
  GradientMap b = run();
  for (const Parameter* p : net.parameters()) CHECK(a.at(p) == b.at(p));
}

TEST_CASE("non-finite values are caught at op boundaries") {
  Tape tape;
  Var x = tape.variable(Tensor::scalar(-1.0));
  CHECK_THROWS_AS(log(x), NumericError);
  Var big = tape.variable(Tensor::scalar(1000.0));
  CHECK_THROWS_AS(exp(big), NumericError);
}

TEST_CASE("adam with zero gradient leaves parameters and decays moments") {
  Parameter p{"p", Tensor({1, 3}, 0.7)};
  std::vector<Parameter*> params{&p};
  AdamState state;
  state.config.lr = 1e-3;
  GradientMap ones{{&p, Tensor({1, 3}, 1.0)}};
  adam_step(params, ones, state);
  const double m_after_one = state.moments.at(&p).m[0];
  GradientMap zeros{{&p, Tensor({1, 3}, 0.0)}};
  adam_step(params, zeros, state);
  CHECK(state.moments.at(&p).m[0] == doctest::Approx(0.9 * m_after_one));
  CHECK(std::abs(state.moments.at(&p).m[0]) < std::abs(m_after_one));

  Parameter q{"q", Tensor({2, 2}, -0.3)};
  std::vector<Parameter*> qs{&q};
  AdamState fresh;
  adam_step(qs, GradientMap{{&q, Tensor({2, 2}, 0.0)}}, fresh);
  CHECK(q.value == Tensor({2, 2}, -0.3));
}

TEST_CASE("adam first step moves each entry by about lr") {
  Parameter p{"p", Tensor({2, 3}, 0.0)};
  std::vector<Parameter*> params{&p};
  AdamState state;
  state.config.lr = 1e-3;
  adam_step(params, GradientMap{{&p, Tensor({2, 3}, 1.0)}}, state);
  CHECK(state.step == 1);
  // m_hat = 1, v_hat = 1  ->  update = lr / (1 + eps)
  for (double v : p.value.data()) CHECK(v == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam with beta1 = 0 is a bias-corrected RMSProp step") {
  Parameter p{"p", Tensor::scalar(1.0)};
  std::vector<Parameter*> params{&p};
  AdamState state;
  state.config = AdamConfig{0.01, 0.0, 0.999, 1e-8};
  const double g = 0.5;
  double expected = 1.0;
  double v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    adam_step(params, GradientMap{{&p, Tensor::scalar(g)}}, state);
    v = 0.999 * v + 0.001 * g * g;
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    expected -= 0.01 * g / (std::sqrt(v_hat) + 1e-8);
  }
  CHECK(p.value.item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("adam names the parameter with a NaN gradient") {
  Parameter p{"encoder.l0.w", Tensor::scalar(1.0)};
  std::vector<Parameter*> params{&p};
  AdamState state;
  Tensor bad = Tensor::scalar(std::nan(""));
  try {
    adam_step(params, GradientMap{{&p, bad}}, state);
    FAIL("expected OptimizerError");
  } catch (const OptimizerError& e) {
    CHECK(std::string(e.what()).find("encoder.l0.w") != std::string::npos);
  }
  CHECK(p.value.item() == 1.0);
}

TEST_CASE("adam with lr = 0 never changes parameters") {
  std::mt19937_64 rng(7);
  Mlp net("n", {3, 4, 2}, Activation::tanh, Activation::identity, rng);
  const Mlp before = net;
  Adam opt(net.parameters(), AdamConfig{0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 20; ++i) {
    Tape tape;
    opt.step(tape.backward(sum(square(forward_mlp(net, tape.constant(uniform_tensor({4, 3}, rng)))))));
  }
  for (std::size_t k = 0; k < net.parameters().size(); ++k) {
    CHECK(net.parameters()[k]->value == before.parameters()[k]->value);
  }
}

TEST_CASE("gaussian_reparam_sample examples") {
  Tape tape;
  Var mu = tape.variable(Tensor::matrix(1, 2, {0.3, -1.2}));
  Var log_sigma = tape.variable(Tensor::matrix(1, 2, {0.1, -0.4}));
  Var zero_noise = tape.constant(Tensor({1, 2}, 0.0));
  const Tensor sampled = gaussian_reparam_sample(mu, log_sigma, zero_noise).value();
  CHECK(sampled == mu.value());

  Var mu0 = tape.constant(Tensor({1, 2}, 0.0));
  Var ls0 = tape.constant(Tensor({1, 2}, 0.0));
  Var eps = tape.constant(Tensor::matrix(1, 2, {0.25, -2.0}));
  CHECK(gaussian_reparam_sample(mu0, ls0, eps).value() == eps.value());

  Tape grad_tape;
  Var ls = grad_tape.variable(Tensor::scalar(0.0));
  Var m = grad_tape.constant(Tensor::scalar(0.0));
  Var one = grad_tape.constant(Tensor::scalar(1.0));
  grad_tape.backward(gaussian_reparam_sample(m, ls, one));
  CHECK(grad_tape.grad(ls).item() == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(gaussian_reparam_sample(mu, ls0, tape.constant(Tensor({2, 2}))), DimensionError);
}

TEST_CASE("tanh_gaussian_logprob at the mode of a standard normal") {
  Tape tape;
  Var zero = tape.constant(Tensor({1, 1}, 0.0));
  const double lp = tanh_gaussian_logprob(zero, zero, zero).value().item();
  // The squash correction contributes -log(1 + 1e-6).
  CHECK(lp == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - std::log1p(1e-6)).epsilon(1e-12));
  CHECK(lp == doctest::Approx(-0.918939).epsilon(1e-5));
}

TEST_CASE("doubling sigma at u = mu lowers logprob by ln 2") {
  Tape tape;
  Var mu = tape.constant(Tensor({1, 1}, 0.4));
  Var ls1 = tape.constant(Tensor({1, 1}, -0.3));
  Var ls2 = tape.constant(Tensor({1, 1}, -0.3 + std::log(2.0)));
  const double a = tanh_gaussian_logprob(mu, ls1, mu).value().item();
  const double b = tanh_gaussian_logprob(mu, ls2, mu).value().item();
  CHECK(a - b == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("squashed density integrates to one") {
  // Trapezoid rule in u; the Jacobian (1 - tanh^2) maps it back to the
  // density of a = tanh(u).
  const double mu = 0.3;
  const double log_sigma = std::log(0.8);
  const int n = 20001;
  const double lo = -12.0;
  const double hi = 12.0;
  const double h = (hi - lo) / (n - 1);
  Tensor u({static_cast<std::size_t>(n), 1});
  for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = lo + h * i;
  Tape tape;
  Var lp = tanh_gaussian_logprob(tape.constant(Tensor({static_cast<std::size_t>(n), 1}, mu)),
                                 tape.constant(Tensor({static_cast<std::size_t>(n), 1}, log_sigma)),
                                 tape.constant(u));
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = std::tanh(u[static_cast<std::size_t>(i)]);
    const double f = std::exp(lp.value()[static_cast<std::size_t>(i)]) * (1.0 - t * t);
    mass += (i == 0 || i == n - 1) ? 0.5 * f : f;
  }
  mass *= h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("soft update is exact linear interpolation") {
  std::mt19937_64 rng(8);
  Mlp online("o", {2, 3, 1}, Activation::relu, Activation::identity, rng);
  Mlp target("t", {2, 3, 1}, Activation::relu, Activation::identity, rng);
  const Mlp before = target;
  target.soft_update_from(online, 0.25);
  for (std::size_t k = 0; k < target.parameters().size(); ++k) {
    const auto& t = target.parameters()[k]->value;
    const auto& o = online.parameters()[k]->value;
    const auto& b = before.parameters()[k]->value;
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.25 * o[i] + 0.75 * b[i]);
  }
  target.soft_update_from(online, 1.0);
  for (std::size_t k = 0; k < target.parameters().size(); ++k) {
    CHECK(target.parameters()[k]->value == online.parameters()[k]->value);
  }
}

TEST_CASE("checkpoint round trip is exact and validates magic") {
  std::mt19937_64 rng(9);
  Mlp net("enc", {3, 4, 2}, Activation::relu, Activation::identity, rng);
  const auto dir = std::filesystem::temp_directory_path() / "laser_ckpt_test";
  const auto path = dir / "net.ckpt";
  Checkpoint ckpt;
  ckpt.meta["latent_dim"] = 4;
  store_parameters(ckpt, net.parameters());
  write_checkpoint(path, ckpt);

  std::ifstream head(path);
  std::string first;
  std::getline(head, first);
  CHECK(first == "LASERCKPT1");

  std::mt19937_64 other(10);
  Mlp loaded("enc", {3, 4, 2}, Activation::relu, Activation::identity, other);
  Checkpoint back = read_checkpoint(path);
  restore_parameters(back, loaded.parameters());
  CHECK(back.meta.at("latent_dim") == 4);
  for (std::size_t k = 0; k < net.parameters().size(); ++k) {
    CHECK(loaded.parameters()[k]->value == net.parameters()[k]->value);
  }

  Mlp wrong("enc", {3, 5, 2}, Activation::relu, Activation::identity, other);
  CHECK_THROWS_AS(restore_parameters(back, wrong.parameters()), LoadError);

  std::ofstream(dir / "bad.ckpt") << "NOTACKPT\n{}";
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), LoadError);
  std::filesystem::remove_all(dir);
}
