#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "setcast/finite_diff.hpp"
#include "setcast/rng.hpp"
#include "setcast/tape.hpp"

using namespace setcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

VectorXd random_vec(Eigen::Index n, Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

}  // namespace

TEST_CASE("rng determinism and stream independence") {
  Rng a(42, "alpha");
  Rng b(42, "alpha");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng s1(42, "alpha");
  Rng s2(42, "beta");
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal &= (s1.next_u64() == s2.next_u64());
  CHECK_FALSE(all_equal);

  // Counter restore reproduces the tail of the sequence.
  Rng c(7, "gamma");
  for (int i = 0; i < 5; ++i) c.uniform();
  std::uint64_t saved = c.counter();
  double next = c.uniform();
  Rng d(7, "gamma");
  d.set_counter(saved);
  CHECK(d.uniform() == next);
}

TEST_CASE("rng poisson sanity") {
  Rng rng(3, "poisson");
  double total = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) total += static_cast<double>(rng.poisson(4.5));
  CHECK(total / n == doctest::Approx(4.5).epsilon(0.02));
  CHECK(rng.poisson(0.0) == 0);
  // Chunked regime (lambda > 30).
  double big = 0.0;
  for (int i = 0; i < 5000; ++i) big += static_cast<double>(rng.poisson(80.0));
  CHECK(big / 5000 == doctest::Approx(80.0).epsilon(0.02));
}

TEST_CASE("linear: identity, zero and forced arithmetic") {
  ParamStore store;
  store.add("w", 2, 2).value = MatrixXd::Identity(2, 2);
  store.add("b", 2, 1);
  Tape t(&store);
  Var y = ops::linear(t.constant(vec2(3, -1)), "w", "b");
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == -1.0);

  store.value("w").setZero();
  store.value("b") << 5, 7;
  Tape t2(&store);
  Var y2 = ops::linear(t2.constant(vec2(13.7, -2.2)), "w", "b");
  CHECK(y2.value()[0] == 5.0);
  CHECK(y2.value()[1] == 7.0);

  store.value("w") << 1, 2, 3, 4;
  store.value("b").setZero();
  Tape t3(&store);
  Var y3 = ops::linear(t3.constant(vec2(1, 1)), "w", "b");
  CHECK(y3.value()[0] == 3.0);
  CHECK(y3.value()[1] == 7.0);
}

TEST_CASE("linear: shape mismatch names both shapes") {
  ParamStore store;
  store.add("w", 2, 3);
  store.add("b", 2, 1);
  Tape t(&store);
  CHECK_THROWS_WITH_AS(ops::linear(t.constant(vec2(1, 2)), "w", "b"),
                       doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("layer_norm closed forms") {
  ParamStore store;
  Tape t(&store);
  Var gain = t.constant(VectorXd::Ones(3));
  Var bias = t.constant(VectorXd::Zero(3));

  // Constant input -> zero output.
  Var y = ops::layer_norm(t.constant(VectorXd::Constant(3, 4.2)), gain, bias);
  CHECK(y.value().norm() == doctest::Approx(0.0).epsilon(1e-12));

  // Zero gain -> bias.
  VectorXd b(3);
  b << 1, 2, 3;
  Rng rng_ln(1, "ln");
  Var y2 = ops::layer_norm(t.constant(random_vec(3, rng_ln)),
                           t.constant(VectorXd::Zero(3)), t.constant(b));
  CHECK(y2.value().isApprox(b));

  // x = (1, -1): mean 0, population var 1.
  Tape t2(&store);
  Var y3 = ops::layer_norm(t2.constant(vec2(1, -1)), t2.constant(VectorXd::Ones(2)),
                           t2.constant(VectorXd::Zero(2)), 1e-14);
  CHECK(y3.value()[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(y3.value()[1] == doctest::Approx(-1.0).epsilon(1e-6));

  // d < 2 rejected.
  Tape t3(&store);
  CHECK_THROWS_AS(ops::layer_norm(t3.constant(VectorXd::Ones(1)),
                                  t3.constant(VectorXd::Ones(1)),
                                  t3.constant(VectorXd::Zero(1))),
                  std::invalid_argument);
}

TEST_CASE("sigmoid symmetry and saturation") {
  ParamStore store;
  Tape t(&store);
  CHECK(ops::sigmoid(t.constant_scalar(0.0)).scalar() == 0.5);
  Rng rng(11, "sig");
  for (int i = 0; i < 50; ++i) {
    double x = 10.0 * (rng.uniform() - 0.5);
    double s1 = ops::sigmoid(t.constant_scalar(x)).scalar();
    double s2 = ops::sigmoid(t.constant_scalar(-x)).scalar();
    CHECK(s1 + s2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  double sat = ops::sigmoid(t.constant_scalar(100.0)).scalar();
  CHECK(sat > 1.0 - 1e-12);
  CHECK(sat < 1.0);
}

TEST_CASE("softmax normalization, symmetry, shift invariance") {
  ParamStore store;
  Tape t(&store);
  Var u = ops::softmax(t.constant(VectorXd::Constant(5, 3.3)));
  for (int i = 0; i < 5; ++i) CHECK(u.value()[i] == doctest::Approx(0.2).epsilon(1e-14));

  VectorXd logs(3);
  logs << std::log(1.0), std::log(2.0), std::log(3.0);
  Var w = ops::softmax(t.constant(logs));
  CHECK(w.value()[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(w.value()[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(w.value()[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));

  Rng rng(5, "softmax");
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd x = 5.0 * random_vec(4, rng);
    Var a = ops::softmax(t.constant(x));
    CHECK(std::abs(a.value().sum() - 1.0) < 1e-12);
    CHECK(a.value().minCoeff() > 0.0);
    double c = 100.0 * (rng.uniform() - 0.5);
    Var b = ops::softmax(t.constant((x.array() + c).matrix()));
    CHECK((a.value() - b.value()).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("dot_attention degenerate and saturated cases") {
  ParamStore store;
  Tape t(&store);
  Rng rng(9, "attn");

  // Single slot.
  MatrixXd k1 = MatrixXd::Random(1, 4);
  MatrixXd v1 = MatrixXd::Random(1, 3);
  auto r1 = ops::dot_attention(t.constant(random_vec(4, rng)), k1, v1, 1.0);
  CHECK(r1.output.value().isApprox(v1.row(0).transpose()));
  CHECK(r1.weights[0] == doctest::Approx(1.0));

  // Identical key rows -> mean of values.
  MatrixXd k2(3, 4);
  VectorXd row = random_vec(4, rng);
  k2 << row.transpose(), row.transpose(), row.transpose();
  MatrixXd v2 = MatrixXd::Random(3, 2);
  auto r2 = ops::dot_attention(t.constant(random_vec(4, rng)), k2, v2, 1.0);
  CHECK(r2.output.value().isApprox(v2.colwise().mean().transpose(), 1e-12));

  // Orthonormal keys, saturated softmax -> picks the matching value row.
  MatrixXd k3 = MatrixXd::Identity(4, 4);
  MatrixXd v3 = MatrixXd::Random(4, 5);
  auto r3 = ops::dot_attention(t.constant(k3.row(2).transpose()), k3, v3, 50.0);
  CHECK((r3.output.value() - v3.row(2).transpose()).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("unit_project contract") {
  ParamStore store;
  Tape t(&store);
  Var y = ops::unit_project(t.constant(vec2(3, 4)));
  CHECK(y.value()[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(y.value()[1] == doctest::Approx(0.8).epsilon(1e-14));

  VectorXd unit = vec2(1, 0);
  CHECK(ops::unit_project(t.constant(unit)).value().isApprox(unit));

  CHECK_THROWS_AS(ops::unit_project(t.constant(VectorXd::Zero(3))),
                  DegenerateInputError);

  Rng rng(13, "proj");
  for (int i = 0; i < 1000; ++i) {
    VectorXd x = std::pow(10.0, 6.0 * (rng.uniform() - 0.5)) * random_vec(6, rng);
    if (x.norm() <= 1e-8) continue;
    CHECK(std::abs(ops::unit_project(t.constant(x)).value().norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("finite_diff_grad closed forms") {
  // f(theta) = theta^2 at theta = 3.
  ParamStore store;
  store.add("theta", 1, 1).value(0, 0) = 3.0;
  auto square = [](ParamStore& s) { return s.value("theta")(0, 0) * s.value("theta")(0, 0); };
  auto g = finite_diff_grad(square, store, 1e-5);
  CHECK(g.at("theta")(0, 0) == doctest::Approx(6.0).epsilon(1e-6));

  // Constant function -> zero gradient.
  auto constf = [](ParamStore&) { return 1.25; };
  auto g0 = finite_diff_grad(constf, store, 1e-5);
  CHECK(g0.at("theta")(0, 0) == doctest::Approx(0.0));

  // f = x^T A x with symmetric A -> gradient 2 A x.
  Rng rng(21, "fd");
  ParamStore s2;
  s2.add("x", 5, 1).value.col(0) = random_vec(5, rng);
  MatrixXd m = MatrixXd::Random(5, 5);
  MatrixXd sym = 0.5 * (m + m.transpose());
  auto quad = [&sym](ParamStore& s) {
    VectorXd x = s.value("x").col(0);
    return double(x.transpose() * sym * x);
  };
  auto gq = finite_diff_grad(quad, s2, 1e-5);
  VectorXd expected = 2.0 * sym * s2.value("x").col(0);
  CHECK((gq.at("x").col(0) - expected).norm() / expected.norm() < 1e-5);
}

TEST_CASE("analytic gradients match finite differences across core ops") {
  Rng rng(77, "gradcheck");
  for (int draw = 0; draw < 20; ++draw) {
    ParamStore store;
    Rng init(1000 + draw, "init");
    store.add_random("w1", 6, 4, init, 0.5);
    store.add_random("b1", 6, 1, init, 0.5);
    store.add_random("w2", 3, 6, init, 0.5);
    store.add_random("b2", 3, 1, init, 0.5);
    store.add_random("gain", 3, 1, init, 0.5);
    store.add_random("bias", 3, 1, init, 0.5);
    VectorXd x = random_vec(4, init);
    MatrixXd keys = MatrixXd::Random(5, 3);
    MatrixXd values = MatrixXd::Random(5, 3);
    VectorXd target(3);
    target << 3, 0, 7;
    std::vector<bool> mask{true, false, true};

    // Composite: mlp -> layer_norm -> softplus -> attention -> sigmoid -> mape.
    auto loss_fn = [&](ParamStore& s) -> double {
      Tape t(&s);
      Var h = ops::tanh_(ops::linear(t.constant(x), "w1", "b1"));
      Var u = ops::linear(h, "w2", "b2");
      Var ln = ops::layer_norm(u, t.param("gain"), t.param("bias"));
      Var sp = ops::softplus(ln);
      Var att = ops::dot_attention(sp, keys, values, 0.7).output;
      Var sig = ops::sigmoid(att);
      Var sm = ops::softmax(ops::cmul(sig, sp));
      Var up = ops::unit_project(ops::add(sm, t.constant(VectorXd::Constant(3, 0.1))));
      Var pred = ops::add(ops::scale(up, 2.0), ops::exp_(ops::scale(ln, 0.1)));
      return ops::mape(pred, target, mask, 1.0).scalar();
    };
    auto loss_with_grad = [&](ParamStore& s) -> double {
      Tape t(&s);
      Var h = ops::tanh_(ops::linear(t.constant(x), "w1", "b1"));
      Var u = ops::linear(h, "w2", "b2");
      Var ln = ops::layer_norm(u, t.param("gain"), t.param("bias"));
      Var sp = ops::softplus(ln);
      Var att = ops::dot_attention(sp, keys, values, 0.7).output;
      Var sig = ops::sigmoid(att);
      Var sm = ops::softmax(ops::cmul(sig, sp));
      Var up = ops::unit_project(ops::add(sm, t.constant(VectorXd::Constant(3, 0.1))));
      Var pred = ops::add(ops::scale(up, 2.0), ops::exp_(ops::scale(ln, 0.1)));
      Var loss = ops::mape(pred, target, mask, 1.0);
      t.backward(loss);
      return loss.scalar();
    };
    store.zero_grads();
    loss_with_grad(store);
    CHECK(max_grad_rel_error(loss_fn, store, 1e-5) < 1e-4);
    (void)rng;
  }
}

TEST_CASE("kl/mape/tc building blocks gradcheck") {
  for (int draw = 0; draw < 5; ++draw) {
    ParamStore store;
    Rng init(50 + draw, "init");
    store.add_random("mu", 4, 1, init, 0.8);
    store.add_random("lv", 4, 1, init, 0.5);
    auto f = [](ParamStore& s) {
      Tape t(&s);
      return ops::kl_std_normal(t.param("mu"), t.param("lv")).scalar();
    };
    store.zero_grads();
    Tape t(&store);
    t.backward(ops::kl_std_normal(t.param("mu"), t.param("lv")));
    CHECK(max_grad_rel_error(f, store, 1e-5) < 1e-4);
  }
}
