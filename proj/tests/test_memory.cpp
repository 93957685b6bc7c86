#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "setcast/finite_diff.hpp"
#include "setcast/memory.hpp"
#include "setcast/rng.hpp"

using namespace setcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vec(Eigen::Index n, Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

}  // namespace

TEST_CASE("timescale pooling: empty, single and constant windows") {
  TimescaleAdapter fast("fast", ParamGroup::kFast, 48, 0.8, 3, 4);
  ParamStore store;
  Rng init(1, "init");
  fast.init_params(store, init);

  CHECK(fast.ema_pool({}).cwiseAbs().maxCoeff() == 0.0);

  Rng data(2, "data");
  VectorXd one = random_vec(3, data);
  CHECK((fast.ema_pool({one}) - one).cwiseAbs().maxCoeff() == 0.0);

  std::vector<VectorXd> constant(100, one);
  CHECK((fast.ema_pool(constant) - one).cwiseAbs().maxCoeff() <= 1e-6);

  // An empty window projects to tanh of the bias alone.
  store.value("fast.b").setConstant(0.3);
  Tape tape(&store);
  VectorXd m = fast.features(tape, {}).value();
  CHECK((m.array() - std::tanh(0.3)).abs().maxCoeff() <= 1e-12);

  // EMA oracle on a two-element window: 0.8 * first + 0.2 * second.
  VectorXd two = random_vec(3, data);
  CHECK((fast.ema_pool({one, two}) - (0.8 * one + 0.2 * two)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("timescale adapters carry their optimizer group") {
  ParamStore store;
  Rng init(3, "init");
  TimescaleAdapter fast("mem.fast", ParamGroup::kFast, 48, 0.8, 4, 6);
  TimescaleAdapter slow("mem.slow", ParamGroup::kSlow, 336, 0.98, 4, 6);
  fast.init_params(store, init);
  slow.init_params(store, init);
  CHECK(store.at("mem.fast.w").group == ParamGroup::kFast);
  CHECK(store.at("mem.fast.b").group == ParamGroup::kFast);
  CHECK(store.at("mem.slow.w").group == ParamGroup::kSlow);
  CHECK(store.at("mem.slow.b").group == ParamGroup::kSlow);
  CHECK(param_group_from_string(to_string(ParamGroup::kFast)) == ParamGroup::kFast);
}

TEST_CASE("memory fusion: neutral gate, equal memories, coordinate bounds") {
  const int dm = 4, dz = 3;
  ParamStore store;
  Rng init(4, "init");
  init_fuse_memory_params(store, init, "fuse", dz);
  store.value("fuse.w_alpha").setZero();
  store.value("fuse.b_alpha").setZero();

  Rng data(5, "data");
  Tape tape(&store);
  VectorXd mf = random_vec(dm, data), ms = random_vec(dm, data);
  VectorXd zc = random_vec(dz, data), zt = random_vec(dz, data);
  auto fused = fuse_memory(tape, tape.constant(mf), tape.constant(ms), tape.constant(zc),
                           tape.constant(zt), "fuse");
  CHECK(fused.alpha.scalar() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK((fused.fused.value() - 0.5 * (mf + ms)).cwiseAbs().maxCoeff() <= 1e-12);

  // Equal memories fuse to themselves under any gate parameters.
  store.value("fuse.w_alpha") = MatrixXd::Random(1, 2 * dz);
  store.value("fuse.b_alpha")(0, 0) = 0.7;
  Tape t2(&store);
  auto same = fuse_memory(t2, t2.constant(mf), t2.constant(mf), t2.constant(zc),
                          t2.constant(zt), "fuse");
  CHECK((same.fused.value() - mf).cwiseAbs().maxCoeff() <= 1e-12);

  // Fused coordinates always lie between the two memories.
  for (int trial = 0; trial < 1000; ++trial) {
    Tape t(&store);
    VectorXd a = random_vec(dm, data), b = random_vec(dm, data);
    auto out = fuse_memory(t, t.constant(a), t.constant(b),
                           t.constant(random_vec(dz, data)),
                           t.constant(random_vec(dz, data)), "fuse");
    double alpha = out.alpha.scalar();
    CHECK(alpha > 0.0);
    CHECK(alpha < 1.0);
    for (int i = 0; i < dm; ++i) {
      CHECK(out.fused.value()[i] >= std::min(a[i], b[i]) - 1e-12);
      CHECK(out.fused.value()[i] <= std::max(a[i], b[i]) + 1e-12);
    }
  }
}

TEST_CASE("write gate: neutral at zero parameters, always in (0, 1)") {
  const int dz = 3, dm = 4, de = 4;
  ParamStore store;
  Rng init(7, "init");
  init_write_gate_params(store, init, "gate", dz, dm, de);
  store.value("gate.w_g").setZero();
  store.value("gate.b_g").setZero();

  Rng data(8, "data");
  Tape tape(&store);
  Var g = write_gate(tape, tape.constant(random_vec(dz, data)),
                     tape.constant(random_vec(dm, data)), random_vec(de, data), "gate");
  CHECK(g.scalar() == doctest::Approx(0.5).epsilon(1e-12));

  store.value("gate.w_g") = MatrixXd::Random(1, dz + dm + de) * 3.0;
  for (int trial = 0; trial < 200; ++trial) {
    Tape t(&store);
    double v = write_gate(t, t.constant(random_vec(dz, data)),
                          t.constant(random_vec(dm, data)), random_vec(de, data), "gate")
                   .scalar();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("episodic bank: gated writes, interpolation, capacity") {
  const int dm = 4;
  EpisodicBank bank(3, dm);
  Rng data(9, "data");
  VectorXd k0 = random_vec(dm, data), v0 = random_vec(dm, data);

  // Sub-threshold gate is a strict no-op.
  bank.write(k0, v0, 0.4, 1);
  CHECK(bank.occupied_count() == 0);
  CHECK(bank.keys().cwiseAbs().maxCoeff() == 0.0);

  // First write to a fresh slot takes the candidate outright.
  bank.write(k0, v0, 0.6, 2);
  CHECK(bank.occupied_count() == 1);
  CHECK((bank.keys().row(0).transpose() - k0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((bank.values().row(0).transpose() - v0).cwiseAbs().maxCoeff() == 0.0);

  // Fill the remaining slots, then overwrite the least-recently-read one with
  // the gated interpolation.
  bank.write(random_vec(dm, data), random_vec(dm, data), 0.9, 3);
  bank.write(random_vec(dm, data), random_vec(dm, data), 0.9, 4);
  CHECK(bank.occupied_count() == 3);
  VectorXd k_new = random_vec(dm, data), v_new = random_vec(dm, data);
  double g = 0.8;
  VectorXd expect_k = (1.0 - g) * k0 + g * k_new;  // slot 0 is least recent
  bank.write(k_new, v_new, g, 5);
  CHECK(bank.occupied_count() == 3);
  CHECK((bank.keys().row(0).transpose() - expect_k).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(bank.usage()[0] == 5);

  CHECK_THROWS_AS(bank.write(VectorXd::Zero(dm + 1), v_new, 0.9, 6), std::invalid_argument);
}

TEST_CASE("episodic bank occupancy never exceeds capacity under heavy writes") {
  const int dm = 4;
  EpisodicBank bank(128, dm);
  Rng data(10, "data");
  Rng gate(11, "gates");
  for (long i = 0; i < 1000000; ++i) {
    VectorXd kv = random_vec(dm, data);
    bank.write(kv, kv, 0.5 + 0.5 * gate.uniform(), i);
    if ((i & 0xFFFF) == 0) CHECK(bank.occupied_count() <= 128);
  }
  CHECK(bank.occupied_count() == 128);
  CHECK(bank.occupied_keys().rows() == 128);
}

TEST_CASE("write candidates are affine in the state") {
  const int ds = 5, dm = 3;
  ParamStore store;
  Rng init(12, "init");
  init_episodic_write_params(store, init, "wr", ds, dm);

  Rng data(13, "data");
  VectorXd s = random_vec(ds, data);
  VectorXd k = episodic_key_candidate(store, "wr", s);
  VectorXd v = episodic_value_candidate(store, "wr", s);
  CHECK((k - (store.at("wr.w_key").value * s + store.at("wr.b_key").value.col(0)))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((v - (store.at("wr.w_val").value * s + store.at("wr.b_val").value.col(0)))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // Zero state maps to the biases.
  CHECK((episodic_key_candidate(store, "wr", VectorXd::Zero(ds)) -
         store.at("wr.b_key").value.col(0))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("replay buffer: growth, capacity, sampling") {
  ReplayBuffer<int> buf(10);
  Rng rng(14, "reservoir");
  for (int i = 0; i < 7; ++i) buf.push(i, rng);
  CHECK(buf.size() == 7);
  CHECK(buf.seen() == 7);
  for (int i = 7; i < 1000; ++i) buf.push(i, rng);
  CHECK(buf.size() == 10);
  CHECK(buf.seen() == 1000);

  // Sampling k >= size returns a permutation of the contents.
  Rng srng(15, "replay");
  auto all = buf.sample(50, srng);
  CHECK(all.size() == 10);
  std::multiset<int> got(all.begin(), all.end());
  std::multiset<int> want(buf.records().begin(), buf.records().end());
  CHECK(got == want);

  // Empty buffer samples nothing.
  ReplayBuffer<int> empty(4);
  Rng erng(16, "replay");
  CHECK(empty.sample(3, erng).empty());

  // Same stream position, same sample.
  Rng a(17, "replay"), b(17, "replay");
  CHECK(buf.sample(4, a) == buf.sample(4, b));
}

TEST_CASE("reservoir retention is uniform at capacity/seen") {
  // Capacity 10, 1000 pushes: every item should be retained with probability
  // 0.01 across seeds.
  const int seeds = 5000, items = 1000, cap = 10;
  std::vector<int> hits(items, 0);
  for (int seed = 0; seed < seeds; ++seed) {
    ReplayBuffer<int> buf(cap);
    Rng rng(static_cast<std::uint64_t>(seed), "reservoir");
    for (int i = 0; i < items; ++i) buf.push(i, rng);
    for (int v : buf.records()) ++hits[v];
  }
  // Exactly `cap` records survive per seed, so the mean retention is 0.01 by
  // construction; uniformity is the claim. Per-item estimates at 5000 seeds
  // have a binomial sd of ~0.0014, so the 0.01 +/- 0.003 band is checked on
  // 100-item position buckets (sd ~0.00014), which is what would expose any
  // early/late positional bias.
  double mean = 0.0;
  for (int i = 0; i < items; ++i) mean += static_cast<double>(hits[i]) / seeds / items;
  CHECK(mean == doctest::Approx(0.01).epsilon(1e-9));
  for (int bucket = 0; bucket < 10; ++bucket) {
    double p = 0.0;
    for (int i = bucket * 100; i < (bucket + 1) * 100; ++i)
      p += static_cast<double>(hits[i]) / seeds / 100.0;
    CHECK(p >= 0.01 - 0.003);
    CHECK(p <= 0.01 + 0.003);
  }
  // No single item strays beyond a generous 6-sigma band.
  for (int i = 0; i < items; ++i) {
    double p = static_cast<double>(hits[i]) / seeds;
    CHECK(p >= 0.01 - 0.0085);
    CHECK(p <= 0.01 + 0.0085);
  }
}

TEST_CASE("memory stack gradients match finite differences") {
  const int dm = 4, dz = 3;
  ParamStore store;
  Rng init(18, "init");
  TimescaleAdapter fast("fast", ParamGroup::kFast, 48, 0.8, 4, dm);
  TimescaleAdapter slow("slow", ParamGroup::kSlow, 336, 0.98, 4, dm);
  fast.init_params(store, init);
  slow.init_params(store, init);
  init_fuse_memory_params(store, init, "fuse", dz);
  init_write_gate_params(store, init, "gate", dz, dm, 4);

  Rng data(19, "data");
  std::vector<VectorXd> window;
  for (int i = 0; i < 6; ++i) window.push_back(random_vec(4, data));
  VectorXd zc = random_vec(dz, data), zt = random_vec(dz, data);
  VectorXd engagement = random_vec(4, data), probe = random_vec(dm, data);

  auto run = [&](ParamStore& s, bool with_grad) {
    Tape tape(&s);
    Var mf = fast.features(tape, window);
    Var ms = slow.features(tape, window);
    auto fused = fuse_memory(tape, mf, ms, tape.constant(zc), tape.constant(zt), "fuse");
    Var g = write_gate(tape, tape.constant(zc), fused.fused, engagement, "gate");
    Var loss = ops::add(ops::dot(fused.fused, tape.constant(probe)), g);
    if (with_grad) tape.backward(loss);
    return loss.scalar();
  };
  store.zero_grads();
  run(store, true);
  auto f = [&](ParamStore& s) { return run(s, false); };
  CHECK(max_grad_rel_error(f, store) < 1e-4);
}
