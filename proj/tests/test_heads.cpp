#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "setcast/finite_diff.hpp"
#include "setcast/heads.hpp"
#include "setcast/rng.hpp"

using namespace setcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kBelief = 5, kMemory = 4, kFactor = 3;

VectorXd random_vec(Eigen::Index n, Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

struct HeadsFixture {
  PredictionHeads heads{"heads", kBelief, kMemory, kFactor, 8};
  ParamStore store;
  Rng data{2, "data"};

  HeadsFixture() {
    Rng init(1, "init");
    heads.init_params(store, init);
  }

  PredictionHeads::Engagement predict(Tape& tape) {
    std::vector<Var> h_levels;
    for (int l = 0; l < 4; ++l) h_levels.push_back(tape.constant(random_vec(kBelief, data)));
    return heads.predict_engagement(tape, h_levels, tape.constant(random_vec(kMemory, data)),
                                    tape.constant(random_vec(kMemory, data)),
                                    tape.constant(random_vec(kFactor, data)));
  }
};

}  // namespace

TEST_CASE("count-domain mape closed forms") {
  ParamStore store;
  Tape tape(&store);
  std::vector<bool> all{true};

  VectorXd y1(1), p1(1);
  y1 << 100.0;
  p1 << 100.0;
  CHECK(ops::mape(tape.constant(p1), y1, all, 1.0).scalar() == 0.0);

  p1 << 110.0;
  CHECK(std::abs(ops::mape(tape.constant(p1), y1, all, 1.0).scalar() - 0.10) <= 1e-12);

  // Zero truth with the unit floor: |5 - 0| / max(0, 1) = 5.
  VectorXd y0(1), p0(1);
  y0 << 0.0;
  p0 << 5.0;
  CHECK(std::abs(ops::mape(tape.constant(p0), y0, all, 1.0).scalar() - 5.0) <= 1e-12);

  // Masked mean over levels.
  VectorXd y(3), p(3);
  y << 100.0, 50.0, 7.0;
  p << 110.0, 40.0, 1000.0;
  std::vector<bool> mask{true, true, false};
  CHECK(std::abs(ops::mape(tape.constant(p), y, mask, 1.0).scalar() - 0.15) <= 1e-12);

  CHECK_THROWS(ops::mape(tape.constant(p), y, std::vector<bool>{false, false, false}, 1.0));
}

TEST_CASE("ensemble weight interpolates the two engagement heads") {
  HeadsFixture fx;
  // Freeze the level inputs across omega settings.
  std::vector<VectorXd> hs;
  for (int l = 0; l < 4; ++l) hs.push_back(random_vec(kBelief, fx.data));
  VectorXd mf = random_vec(kMemory, fx.data), ms = random_vec(kMemory, fx.data);
  VectorXd zc = random_vec(kFactor, fx.data);

  auto eval = [&](double omega) {
    fx.store.value("heads.omega")(0, 0) = omega;
    Tape tape(&fx.store);
    std::vector<Var> h_levels;
    for (int l = 0; l < 4; ++l) h_levels.push_back(tape.constant(hs[l]));
    auto out = fx.heads.predict_engagement(tape, h_levels, tape.constant(mf),
                                           tape.constant(ms), tape.constant(zc));
    return std::make_pair(out.y_hat.value(), out.weight.scalar());
  };

  auto [y_mid, w_mid] = eval(0.0);
  auto [y_hi, w_hi] = eval(40.0);
  auto [y_lo, w_lo] = eval(-40.0);
  CHECK(w_mid == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w_hi > 1.0 - 1e-12);
  CHECK(w_lo < 1e-12);
  // Midpoint of the extremes equals the omega = 0 ensemble.
  CHECK((0.5 * (y_hi + y_lo) - y_mid).cwiseAbs().maxCoeff() <= 1e-9);
  // Every level stays between the two pure heads.
  for (int l = 0; l < 4; ++l) {
    CHECK(y_mid[l] >= std::min(y_hi[l], y_lo[l]) - 1e-12);
    CHECK(y_mid[l] <= std::max(y_hi[l], y_lo[l]) + 1e-12);
  }

  // With identical head parameters and equal memory inputs the mix is
  // omega-invariant.
  for (const char* suffix : {".w1", ".b1", ".w2", ".b2"}) {
    fx.store.value(std::string("heads.avg") + suffix) =
        fx.store.value(std::string("heads.last") + suffix);
  }
  ms = mf;
  auto [y_a, w_a] = eval(-3.0);
  auto [y_b, w_b] = eval(5.0);
  CHECK((y_a - y_b).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(w_a != w_b);
}

TEST_CASE("prediction outputs are nonnegative") {
  HeadsFixture fx;
  for (int trial = 0; trial < 1000; ++trial) {
    Tape tape(&fx.store);
    auto out = fx.predict(tape);
    CHECK(out.y_hat.value().minCoeff() >= 0.0);
    CHECK(out.weight.scalar() > 0.0);
    CHECK(out.weight.scalar() < 1.0);
    Var n = fx.heads.predict_volume(tape, tape.constant(random_vec(kBelief, fx.data)),
                                    tape.constant(random_vec(kMemory, fx.data)),
                                    tape.constant(random_vec(kFactor, fx.data)));
    CHECK(n.scalar() >= 0.0);
  }
}

TEST_CASE("volume head with a zeroed output layer rests at softplus(0)") {
  HeadsFixture fx;
  fx.store.value("heads.vol.w2").setZero();
  fx.store.value("heads.vol.b2").setZero();
  Tape tape(&fx.store);
  Var n = fx.heads.predict_volume(tape, tape.constant(random_vec(kBelief, fx.data)),
                                  tape.constant(random_vec(kMemory, fx.data)),
                                  tape.constant(random_vec(kFactor, fx.data)));
  CHECK(std::abs(n.scalar() - std::log(2.0)) <= 1e-12);
}

TEST_CASE("heads require one modulated belief per engagement level") {
  HeadsFixture fx;
  Tape tape(&fx.store);
  std::vector<Var> three(3, tape.constant(random_vec(kBelief, fx.data)));
  CHECK_THROWS_AS(fx.heads.predict_engagement(tape, three, tape.constant(VectorXd::Zero(kMemory)),
                                              tape.constant(VectorXd::Zero(kMemory)),
                                              tape.constant(VectorXd::Zero(kFactor))),
                  std::invalid_argument);
}

TEST_CASE("total loss composition") {
  ParamStore store;
  Tape tape(&store);
  Var pred = tape.constant_scalar(2.0);
  Var dis = tape.constant_scalar(0.5);
  Var rep = tape.constant_scalar(0.25);
  Var none;  // invalid: replay buffer empty

  LossWeights w;
  w.lambda1 = 0.0;
  w.lambda2 = 0.0;
  CHECK(total_loss(tape, pred, dis, none, w).scalar() == 2.0);

  w.lambda1 = 0.4;
  CHECK(std::abs(total_loss(tape, pred, dis, none, w).scalar() - 2.2) <= 1e-12);

  w.lambda2 = 2.0;
  CHECK(std::abs(total_loss(tape, pred, dis, rep, w).scalar() - 2.7) <= 1e-12);

  // Doubling lambda2 adds exactly one more replay term.
  LossWeights w2 = w;
  w2.lambda2 = 4.0;
  double d = total_loss(tape, pred, dis, rep, w2).scalar() -
             total_loss(tape, pred, dis, rep, w).scalar();
  CHECK(std::abs(d - 2.0 * 0.25) <= 1e-12);

  LossWeights bad;
  bad.lambda1 = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  LossWeights bad_eps;
  bad_eps.mape_eps = 0.0;
  CHECK_THROWS_AS(bad_eps.validate(), std::invalid_argument);
}

TEST_CASE("head gradients match finite differences through the mape loss") {
  HeadsFixture fx;
  std::vector<VectorXd> hs;
  for (int l = 0; l < 4; ++l) hs.push_back(random_vec(kBelief, fx.data));
  VectorXd mf = random_vec(kMemory, fx.data), ms = random_vec(kMemory, fx.data);
  VectorXd zc = random_vec(kFactor, fx.data);
  VectorXd y(4);
  y << 3.0, 1.0, 0.0, 7.0;
  std::vector<bool> mask{true, true, false, true};

  auto run = [&](ParamStore& s, bool with_grad) {
    Tape tape(&s);
    std::vector<Var> h_levels;
    for (int l = 0; l < 4; ++l) h_levels.push_back(tape.constant(hs[l]));
    auto out = fx.heads.predict_engagement(tape, h_levels, tape.constant(mf),
                                           tape.constant(ms), tape.constant(zc));
    Var vol = fx.heads.predict_volume(tape, tape.constant(hs[0]), tape.constant(mf),
                                      tape.constant(zc));
    Var loss = ops::add(ops::mape(out.y_hat, y, mask, 1.0), vol);
    if (with_grad) tape.backward(loss);
    return loss.scalar();
  };
  fx.store.zero_grads();
  run(fx.store, true);
  auto f = [&](ParamStore& s) { return run(s, false); };
  CHECK(max_grad_rel_error(f, fx.store) < 1e-4);
}
