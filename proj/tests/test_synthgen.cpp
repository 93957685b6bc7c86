#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "setcast/dataset.hpp"
#include "setcast/synthgen.hpp"

using namespace setcast;

namespace {

Scenario tiny_scenario() {
  Scenario sc = default_scenario();
  sc.total_bins = 672;
  sc.platforms.resize(2);
  sc.opinions.resize(2);
  return sc;
}

bool same_instances(const SynthDataset& a, const SynthDataset& b) {
  if (a.instances.size() != b.instances.size()) return false;
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    const RawInstance& x = a.instances[i];
    const RawInstance& y = b.instances[i];
    if (x.bin != y.bin || x.opinion != y.opinion || x.platform != y.platform) return false;
    if (x.y != y.y || x.mask != y.mask || x.n != y.n) return false;
    if (x.c.size() != y.c.size() || !(x.c.array() == y.c.array()).all()) return false;
    if (x.t.size() != y.t.size() || !(x.t.array() == y.t.array()).all()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("utility and exchange closed forms") {
  CHECK(utility(5.0, 2.0, 1.5) == 2.0);
  CHECK(utility(0.0, 0.0, 3.0) == 0.0);

  PlatformProfile p;
  p.gamma_star = {2.0, 0.0, 0.0, 0.0};
  p.beta_star = 1.0;
  CHECK(exchange_value(p, 1, 0.0, 0, -1) == 1.0);  // zero effort leaves the intercept
  double e = std::exp(1.0) - 1.0;                  // log1p(e) = 1
  CHECK(std::abs(exchange_value(p, 0, e, 0, -1) - 3.0) <= 1e-12);
  CHECK(exchange_value(p, 0, 4.0, 0, -1) > exchange_value(p, 0, 2.0, 0, -1));
  CHECK_THROWS_AS(exchange_value(p, 0, -0.5, 0, -1), std::invalid_argument);

  // After the regime shift each level reads its neighbor's slope.
  p.gamma_star = {1.0, 2.0, 3.0, 4.0};
  p.beta_star = 0.0;
  double before = exchange_value(p, 0, e, 99, 100);
  double after = exchange_value(p, 0, e, 100, 100);
  CHECK(before == 1.0);
  CHECK(after == 2.0);
  CHECK(exchange_value(p, 3, e, 100, 100) == 1.0);  // wraps around
}

TEST_CASE("reciprocity drive closed forms") {
  ReciprocityKernel k;  // unit weights, default half-lives

  CHECK(std::abs(reciprocity_drive({}, k) - std::log(2.0)) <= 1e-12);

  ReciprocityKernel zero = k;
  zero.fast_weight = 0.0;
  zero.slow_weight = 0.0;
  CHECK(std::abs(reciprocity_drive({3.0, -1.0, 2.5}, zero) - std::log(2.0)) <= 1e-12);

  // Decay constants hit one half at the half life.
  CHECK(std::abs(std::pow(k.fast_decay(), k.fast_half_life_bins) - 0.5) <= 1e-12);
  CHECK(std::abs(std::pow(k.slow_decay(), k.slow_half_life_bins) - 0.5) <= 1e-12);
  CHECK(std::abs(k.fast_mass() - 1.0 / (1.0 - k.fast_decay())) <= 1e-12);

  // Constant history: geometric partial sums.
  const double c = 0.3;
  const int n = 500;
  std::vector<double> hist(n, c);
  double df = k.fast_decay(), ds = k.slow_decay();
  double sf = c * (1.0 - std::pow(df, n)) / (1.0 - df);
  double ss = c * (1.0 - std::pow(ds, n)) / (1.0 - ds);
  double expect = std::log1p(std::exp(k.fast_weight * sf + k.slow_weight * ss));
  // softplus(x) = log(1 + e^x)
  CHECK(std::abs(reciprocity_drive(hist, k) - expect) <= 1e-6);

  // More positive history drives more engagement.
  CHECK(reciprocity_drive({1.0, 1.0, 1.0}, k) > reciprocity_drive({0.1, 0.1, 0.1}, k));
}

TEST_CASE("per-bin utility and emotional value") {
  std::array<long, 4> counts{5, 0, 0, 0};
  std::array<double, 4> efforts{0.5, 1.0, 2.0, 4.0};
  double kappa = 0.4;
  // R = 5, I = 2.5.
  CHECK(std::abs(bin_utility(counts, efforts, kappa) - (5.0 - 0.4 * 2.5) / 8.5) <= 1e-12);
  CHECK(bin_utility({0, 0, 0, 0}, efforts, kappa) == 0.0);

  CHECK(emotional_value(1.0, 2.0, 0.5, 0.5, 2.0) == 2.0);
  CHECK(emotional_value(0.9, 3.0, 0.5, 0.0, 2.0) == 1.0);  // alpha = 0 leaves beta * C
  // Doubling the amplification doubles the emotion term only.
  double base = emotional_value(0.7, 1.3, 0.5, 0.8, 2.0);
  double doubled = emotional_value(0.7, 2.6, 0.5, 0.8, 2.0);
  CHECK(std::abs((doubled - 1.0) - 2.0 * (base - 1.0)) <= 1e-12);
}

TEST_CASE("lifecycle envelope closed forms") {
  OpinionSpec o;
  o.peak_frac = 0.5;
  o.lifecycle_width = 0.2;
  o.lifecycle_floor = 0.3;
  // Exactly 1 at the peak, floor + (1-floor)*exp(-1/2) one width away.
  CHECK(lifecycle_envelope(o, 500, 1000) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lifecycle_envelope(o, 700, 1000) ==
        doctest::Approx(0.3 + 0.7 * std::exp(-0.5)).epsilon(1e-12));
  // Symmetric around the peak, and never below the floor.
  CHECK(lifecycle_envelope(o, 400, 1000) == lifecycle_envelope(o, 600, 1000));
  CHECK(lifecycle_envelope(o, 0, 1000) >= 0.3);
  // Disabled envelope is identically 1.
  o.lifecycle_width = 0.0;
  CHECK(lifecycle_envelope(o, 123, 1000) == 1.0);
}

TEST_CASE("simulation determinism and zero-exchange degenerate case") {
  Scenario sc = tiny_scenario();
  SynthDataset a = simulate(sc, 99);
  SynthDataset b = simulate(sc, 99);
  CHECK(same_instances(a, b));
  SynthDataset c = simulate(sc, 100);
  CHECK_FALSE(same_instances(a, c));

  // All-zero exchange slopes and intercepts produce zero engagement counts.
  Scenario dead = tiny_scenario();
  for (auto& p : dead.platforms) {
    p.gamma_star = {0, 0, 0, 0};
    p.beta_star = 0.0;
  }
  SynthDataset z = simulate(dead, 1);
  long total = 0;
  for (const RawInstance& r : z.instances)
    for (long y : r.y) total += y;
  CHECK(total == 0);
}

TEST_CASE("masked levels carry zero counts everywhere") {
  Scenario sc = tiny_scenario();  // facebook masks level 0, instagram levels 0 and 2
  SynthDataset ds = simulate(sc, 7);
  for (const RawInstance& r : ds.instances) {
    for (int l = 0; l < 4; ++l) {
      if (!r.mask[l]) CHECK(r.y[l] == 0);
    }
    if (r.platform == "facebook") CHECK_FALSE(r.mask[0]);
  }
}

TEST_CASE("mean counts recover the planted exchange-value ratios") {
  // One pair, long run: E[y_l] = base * f_l * E[drive * v_em], so count-mean
  // ratios equal exchange-value ratios.
  Scenario sc = default_scenario();
  sc.total_bins = 4032;
  sc.platforms = {sc.platforms[4]};  // bilibili: all four levels live
  sc.opinions.resize(1);
  SynthDataset ds = simulate(sc, 21);

  std::array<double, 4> mean{0, 0, 0, 0};
  for (const RawInstance& r : ds.instances)
    for (int l = 0; l < 4; ++l) mean[l] += static_cast<double>(r.y[l]) / sc.total_bins;

  const PlatformProfile& p = sc.platforms[0];
  for (int l = 1; l < 4; ++l) {
    double planted = exchange_value(p, l, sc.efforts[l], 0, -1) /
                     exchange_value(p, 0, sc.efforts[0], 0, -1);
    CHECK(mean[l] / mean[0] == doctest::Approx(planted).epsilon(0.10));
  }
}

TEST_CASE("scenario presets and json round-trip") {
  CHECK(preset_scenario("default").regime_shift_bin == -1);
  CHECK(preset_scenario("fast_only").kernel.slow_weight == 0.0);
  CHECK(preset_scenario("slow_only").kernel.fast_weight == 0.0);
  CHECK(preset_scenario("two_phase").regime_shift_bin == 4032 / 2);
  CHECK(preset_scenario("long").total_bins == 8064);
  CHECK_THROWS(preset_scenario("bursty"));

  Scenario sc = scenario_from_json({{"preset", "default"}, {"total_bins", 1344}});
  CHECK(sc.total_bins == 1344);
  CHECK(sc.platforms.size() == 7);
  CHECK(sc.opinions.size() == 12);

  // Round trip through serialized form preserves the scenario.
  nlohmann::json j = scenario_to_json(tiny_scenario());
  Scenario back = scenario_from_json(j);
  CHECK(same_instances(simulate(tiny_scenario(), 5), simulate(back, 5)));

  CHECK_THROWS(scenario_from_json({{"presett", "default"}}));
  CHECK_THROWS(scenario_from_json({{"total_bins", 100}}));
  nlohmann::json bad_eff = {{"efforts", {2.0, 1.0, 3.0, 4.0}}};
  CHECK_THROWS(scenario_from_json(bad_eff));
}

TEST_CASE("time features are periodic phases plus a trend coordinate") {
  Eigen::VectorXd f0 = time_features(0, 4032);
  CHECK(f0.size() == kTimeFeatureDim);
  Eigen::VectorXd f1 = time_features(336, 4032);
  // Same phase one week later; only the normalized index moves.
  CHECK((f0.head(4) - f1.head(4)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(f1[4] > f0[4]);
  CHECK(time_features(4031, 4032)[4] == doctest::Approx(1.0));
  for (long bin : {0L, 17L, 400L, 4031L}) {
    Eigen::VectorXd f = time_features(bin, 4032);
    CHECK(f.head(4).cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("dataset emit/load round-trip and validation") {
  namespace fs = std::filesystem;
  Scenario sc = tiny_scenario();
  SynthDataset ds = simulate(sc, 11);
  verify_dataset(ds);  // regeneration from the manifest matches

  fs::path dir = fs::temp_directory_path() / "setcast_test_ds";
  fs::remove_all(dir);
  fs::create_directories(dir);
  emit_dataset(ds, dir.string());
  SynthDataset loaded = load_dataset(dir.string());
  CHECK(same_instances(ds, loaded));
  CHECK(loaded.total_bins() == 672);
  CHECK(loaded.platforms() == ds.platforms());
  verify_dataset(loaded);

  // A corrupted record count fails the manifest cross-check.
  SynthDataset tampered = loaded;
  for (auto& r : tampered.instances) {
    if (r.mask[1]) {
      r.y[1] += 1;
      break;
    }
  }
  CHECK_THROWS(verify_dataset(tampered));

  // Truncating the record file produces a parse error naming the line.
  fs::path jsonl = dir / "data.jsonl";
  std::ifstream in(jsonl);
  std::string keep, line;
  for (int i = 0; i < 5 && std::getline(in, line); ++i) keep += line + "\n";
  in.close();
  keep += "{\"bin\": 5, \"opinion\"";  // cut mid-record
  std::ofstream out(jsonl, std::ios::trunc);
  out << keep;
  out.close();
  try {
    load_dataset(dir.string());
    FAIL("expected parse failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("6") != std::string::npos);
  }
  fs::remove_all(dir);
}
