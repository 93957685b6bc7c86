#include "setcast/synthgen.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "setcast/rng.hpp"

namespace setcast {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double gamma_sample(Rng& rng, double shape) {
  if (shape < 1.0) {
    double u = rng.uniform();
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.gaussian();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

long draw_count(Rng& rng, double rate, bool neg_binomial, double dispersion) {
  if (rate <= 0.0) return 0;
  if (!neg_binomial) return rng.poisson(rate);
  double mix = gamma_sample(rng, dispersion) / dispersion;
  return rng.poisson(rate * mix);
}

Eigen::VectorXd topic_vector(const OpinionSpec& o) {
  Rng rng(0x70e1c5ULL, "topic/" + o.id);
  Eigen::VectorXd v(o.topic_dim);
  for (int i = 0; i < o.topic_dim; ++i) v[i] = rng.gaussian();
  v /= std::max(v.norm(), 1e-12);
  return v;
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

double ReciprocityKernel::fast_decay() const { return std::pow(0.5, 1.0 / fast_half_life_bins); }
double ReciprocityKernel::slow_decay() const { return std::pow(0.5, 1.0 / slow_half_life_bins); }
double ReciprocityKernel::fast_mass() const { return 1.0 / (1.0 - fast_decay()); }
double ReciprocityKernel::slow_mass() const { return 1.0 / (1.0 - slow_decay()); }

void Scenario::validate() const {
  if (total_bins < 672)
    throw std::runtime_error("total_bins must be at least 672 (14 days) for split viability");
  if (platforms.empty() || opinions.empty())
    throw std::runtime_error("scenario needs at least one platform and one opinion");
  for (int l = 1; l < 4; ++l)
    if (efforts[l] <= efforts[l - 1])
      throw std::runtime_error("efforts must be strictly increasing across levels");
  if (kernel.fast_half_life_bins <= 0.0 || kernel.slow_half_life_bins <= 0.0)
    throw std::runtime_error("kernel half-lives must be positive");
  if (kernel.fast_weight < 0.0 || kernel.slow_weight < 0.0)
    throw std::runtime_error("kernel weights must be nonnegative");
  std::set<std::string> ids;
  for (const auto& p : platforms) {
    if (!ids.insert(p.id).second) throw std::runtime_error("duplicate platform id " + p.id);
    if (p.base_rate <= 0.0) throw std::runtime_error("base_rate must be positive for " + p.id);
    bool any = false;
    for (bool m : p.mask) any = any || m;
    if (!any) throw std::runtime_error("platform " + p.id + " has no available levels");
  }
  ids.clear();
  for (const auto& o : opinions) {
    if (!ids.insert(o.id).second) throw std::runtime_error("duplicate opinion id " + o.id);
    if (o.topic_dim < 1) throw std::runtime_error("topic_dim must be positive for " + o.id);
    if (o.lifecycle_floor <= 0.0 || o.lifecycle_floor > 1.0)
      throw std::runtime_error("lifecycle_floor must be in (0, 1] for " + o.id);
  }
  if (negative_binomial && nb_dispersion <= 0.0)
    throw std::runtime_error("nb_dispersion must be positive");
}

Scenario default_scenario() {
  Scenario sc;
  sc.kernel.fast_weight = 0.04;
  sc.kernel.slow_weight = 0.002;

  auto plat = [](std::string id, double kappa, std::array<double, 4> g, double beta,
                 double phi, std::array<bool, 4> mask, double base) {
    PlatformProfile p;
    p.id = std::move(id);
    p.kappa = kappa;
    p.gamma_star = g;
    p.beta_star = beta;
    p.phi = phi;
    p.mask = mask;
    p.base_rate = base;
    return p;
  };
  // Planted slopes are spread widely enough that each platform's gamma_star
  // ranking survives multiplication by log1p(effort) (which grows ~4x from
  // level 0 to level 3), so the per-level count magnitudes carry the same
  // ranking and recovery from data is well posed.
  sc.platforms = {
      plat("facebook", 0.30, {6.00, 2.20, 1.00, 0.45}, 0.30, 1.20,
           {false, true, true, true}, 9.0),
      plat("instagram", 0.25, {5.00, 2.00, 0.90, 0.50}, 0.20, 1.50,
           {false, true, false, true}, 11.0),
      plat("x", 0.35, {0.90, 0.40, 3.00, 1.20}, 0.25, 1.35,
           {false, false, true, true}, 8.0),
      plat("telegram", 0.20, {2.00, 1.00, 0.60, 1.50}, 0.35, 0.90,
           {true, false, true, false}, 6.0),
      plat("bilibili", 0.28, {0.50, 0.80, 1.30, 2.10}, 0.15, 1.10,
           {true, true, true, true}, 7.0),
      plat("bluesky", 0.32, {1.00, 0.65, 2.50, 0.90}, 0.30, 1.00,
           {false, false, true, true}, 5.0),
      plat("tiktok", 0.22, {3.50, 0.60, 1.10, 1.40}, 0.20, 1.60,
           {true, true, true, false}, 10.0),
  };

  const char* cats[4] = {"positive", "negative", "ambiguous", "neutral"};
  for (int i = 0; i < 12; ++i) {
    OpinionSpec o;
    o.id = "op" + std::to_string(i);
    o.category = cats[i % 4];
    o.emotion_intensity = 0.15 + 0.07 * i;
    o.context_alignment = 0.25 + 0.05 * (i % 7);
    o.alpha_emotion = 0.8 + 0.05 * (i % 5);
    o.beta_context = 0.4 + 0.04 * (i % 3);
    // Staggered interest lifecycles: stories peak at different points of the
    // stream, so per-pair activity drifts instead of sitting at a fixed point.
    o.peak_frac = 0.08 + 0.85 * i / 11.0;
    o.lifecycle_width = 0.18;
    o.lifecycle_floor = 0.30;
    sc.opinions.push_back(o);
  }
  return sc;
}

Scenario preset_scenario(const std::string& name) {
  Scenario sc = default_scenario();
  if (name == "default") return sc;
  if (name == "fast_only") {
    sc.kernel.fast_weight = 0.06;
    sc.kernel.slow_weight = 0.0;
    return sc;
  }
  if (name == "slow_only") {
    sc.kernel.fast_weight = 0.0;
    sc.kernel.slow_weight = 0.004;
    return sc;
  }
  if (name == "two_phase") {
    sc.regime_shift_bin = sc.total_bins / 2;
    return sc;
  }
  if (name == "long") {
    sc.total_bins = 8064;
    return sc;
  }
  throw std::runtime_error("unknown scenario preset '" + name + "'");
}

nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["total_bins"] = sc.total_bins;
  j["efforts"] = sc.efforts;
  j["kernel"] = {{"fast_weight", sc.kernel.fast_weight},
                 {"slow_weight", sc.kernel.slow_weight},
                 {"fast_half_life_bins", sc.kernel.fast_half_life_bins},
                 {"slow_half_life_bins", sc.kernel.slow_half_life_bins}};
  j["platforms"] = nlohmann::json::array();
  for (const auto& p : sc.platforms)
    j["platforms"].push_back({{"id", p.id},
                              {"kappa", p.kappa},
                              {"gamma_star", p.gamma_star},
                              {"beta_star", p.beta_star},
                              {"phi", p.phi},
                              {"mask", p.mask},
                              {"base_rate", p.base_rate}});
  j["opinions"] = nlohmann::json::array();
  for (const auto& o : sc.opinions)
    j["opinions"].push_back({{"id", o.id},
                             {"category", o.category},
                             {"emotion_intensity", o.emotion_intensity},
                             {"context_alignment", o.context_alignment},
                             {"alpha_emotion", o.alpha_emotion},
                             {"beta_context", o.beta_context},
                             {"topic_dim", o.topic_dim},
                             {"peak_frac", o.peak_frac},
                             {"lifecycle_width", o.lifecycle_width},
                             {"lifecycle_floor", o.lifecycle_floor}});
  j["regime_shift_bin"] = sc.regime_shift_bin;
  j["negative_binomial"] = sc.negative_binomial;
  j["nb_dispersion"] = sc.nb_dispersion;
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  check_keys(j, {"preset", "seed", "total_bins", "efforts", "kernel", "platforms", "opinions",
                 "regime_shift_bin", "negative_binomial", "nb_dispersion"},
             "scenario config");
  Scenario sc = preset_scenario(j.value("preset", std::string("default")));
  if (j.contains("total_bins")) sc.total_bins = j.at("total_bins").get<long>();
  if (j.contains("efforts")) sc.efforts = j.at("efforts").get<std::array<double, 4>>();
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    check_keys(k, {"fast_weight", "slow_weight", "fast_half_life_bins", "slow_half_life_bins"},
               "kernel config");
    sc.kernel.fast_weight = k.value("fast_weight", sc.kernel.fast_weight);
    sc.kernel.slow_weight = k.value("slow_weight", sc.kernel.slow_weight);
    sc.kernel.fast_half_life_bins = k.value("fast_half_life_bins", sc.kernel.fast_half_life_bins);
    sc.kernel.slow_half_life_bins = k.value("slow_half_life_bins", sc.kernel.slow_half_life_bins);
  }
  if (j.contains("platforms")) {
    sc.platforms.clear();
    for (const auto& pj : j.at("platforms")) {
      check_keys(pj, {"id", "kappa", "gamma_star", "beta_star", "phi", "mask", "base_rate"},
                 "platform config");
      PlatformProfile p;
      p.id = pj.at("id").get<std::string>();
      p.kappa = pj.value("kappa", p.kappa);
      if (pj.contains("gamma_star")) p.gamma_star = pj.at("gamma_star").get<std::array<double, 4>>();
      p.beta_star = pj.value("beta_star", p.beta_star);
      p.phi = pj.value("phi", p.phi);
      if (pj.contains("mask")) p.mask = pj.at("mask").get<std::array<bool, 4>>();
      p.base_rate = pj.value("base_rate", p.base_rate);
      sc.platforms.push_back(std::move(p));
    }
  }
  if (j.contains("opinions")) {
    sc.opinions.clear();
    for (const auto& oj : j.at("opinions")) {
      check_keys(oj, {"id", "category", "emotion_intensity", "context_alignment", "alpha_emotion",
                      "beta_context", "topic_dim", "peak_frac", "lifecycle_width",
                      "lifecycle_floor"},
                 "opinion config");
      OpinionSpec o;
      o.id = oj.at("id").get<std::string>();
      o.category = oj.value("category", o.category);
      o.emotion_intensity = oj.value("emotion_intensity", o.emotion_intensity);
      o.context_alignment = oj.value("context_alignment", o.context_alignment);
      o.alpha_emotion = oj.value("alpha_emotion", o.alpha_emotion);
      o.beta_context = oj.value("beta_context", o.beta_context);
      o.topic_dim = oj.value("topic_dim", o.topic_dim);
      o.peak_frac = oj.value("peak_frac", o.peak_frac);
      o.lifecycle_width = oj.value("lifecycle_width", o.lifecycle_width);
      o.lifecycle_floor = oj.value("lifecycle_floor", o.lifecycle_floor);
      sc.opinions.push_back(std::move(o));
    }
  }
  if (j.contains("regime_shift_bin")) sc.regime_shift_bin = j.at("regime_shift_bin").get<long>();
  if (j.contains("negative_binomial")) sc.negative_binomial = j.at("negative_binomial").get<bool>();
  if (j.contains("nb_dispersion")) sc.nb_dispersion = j.at("nb_dispersion").get<double>();
  sc.validate();
  return sc;
}

double utility(double reward, double investment, double kappa) {
  return reward - investment * kappa;
}

double exchange_value(const PlatformProfile& p, int level, double effort,
                      long bin, long regime_shift_bin) {
  if (effort < 0.0) throw std::invalid_argument("exchange_value: negative effort");
  int slot = level;
  if (regime_shift_bin >= 0 && bin >= regime_shift_bin) slot = (level + 1) % 4;
  return p.gamma_star[slot] * std::log1p(effort) + p.beta_star;
}

double reciprocity_drive(const std::vector<double>& utility_history,
                         const ReciprocityKernel& kernel) {
  double sf = 0.0, ss = 0.0;
  double df = kernel.fast_decay(), ds = kernel.slow_decay();
  double wf = 1.0, ws = 1.0;  // most recent entry carries decay^0
  for (auto it = utility_history.rbegin(); it != utility_history.rend(); ++it) {
    sf += wf * *it;
    ss += ws * *it;
    wf *= df;
    ws *= ds;
  }
  return softplus(kernel.fast_weight * sf + kernel.slow_weight * ss);
}

double bin_utility(const std::array<long, 4>& counts, const std::array<double, 4>& efforts,
                   double kappa) {
  double reward = 0.0, invested = 0.0;
  for (int l = 0; l < 4; ++l) {
    reward += static_cast<double>(counts[l]);
    invested += efforts[l] * static_cast<double>(counts[l]);
  }
  return utility(reward, invested, kappa) / (1.0 + reward + invested);
}

double emotional_value(double emotion_intensity, double phi, double context, double alpha,
                       double beta) {
  return alpha * emotion_intensity * phi + beta * context;
}

double lifecycle_envelope(const OpinionSpec& o, long bin, long total_bins) {
  if (o.lifecycle_width <= 0.0) return 1.0;
  double x = (static_cast<double>(bin) / static_cast<double>(total_bins) - o.peak_frac) /
             o.lifecycle_width;
  return o.lifecycle_floor + (1.0 - o.lifecycle_floor) * std::exp(-0.5 * x * x);
}

SynthDataset simulate(const Scenario& sc, std::uint64_t seed) {
  sc.validate();
  SynthDataset ds;
  ds.manifest = scenario_to_json(sc);
  ds.manifest["seed"] = seed;

  const std::size_t num_pairs = sc.opinions.size() * sc.platforms.size();
  std::vector<double> sum_fast(num_pairs, 0.0), sum_slow(num_pairs, 0.0);
  std::vector<Rng> rngs;
  rngs.reserve(num_pairs);
  std::vector<Eigen::VectorXd> topics;
  for (const auto& o : sc.opinions) {
    Eigen::VectorXd topic = topic_vector(o);
    Eigen::VectorXd c(topic.size() + 2);
    c << topic, o.emotion_intensity, o.context_alignment;
    topics.push_back(std::move(c));
    for (const auto& p : sc.platforms) rngs.emplace_back(seed, "sim/" + o.id + "/" + p.id);
  }

  const double df = sc.kernel.fast_decay();
  const double dslow = sc.kernel.slow_decay();
  ds.instances.reserve(static_cast<std::size_t>(sc.total_bins) * num_pairs);

  for (long t = 0; t < sc.total_bins; ++t) {
    std::size_t pair = 0;
    for (std::size_t oi = 0; oi < sc.opinions.size(); ++oi) {
      const OpinionSpec& o = sc.opinions[oi];
      for (std::size_t pi = 0; pi < sc.platforms.size(); ++pi, ++pair) {
        const PlatformProfile& p = sc.platforms[pi];
        Rng& rng = rngs[pair];
        double drive = softplus(sc.kernel.fast_weight * sum_fast[pair] +
                                sc.kernel.slow_weight * sum_slow[pair]);
        double v_em = emotional_value(o.emotion_intensity, p.phi, o.context_alignment,
                                      o.alpha_emotion, o.beta_context);
        double env = lifecycle_envelope(o, t, sc.total_bins);

        RawInstance r;
        r.bin = t;
        r.opinion = o.id;
        r.platform = p.id;
        r.mask = p.mask;
        r.c = topics[oi];
        r.t = time_features(t, sc.total_bins);
        for (int l = 0; l < 4; ++l) {
          if (!p.mask[l]) {
            r.y[l] = 0;
            continue;
          }
          double rate = std::max(
              p.base_rate * exchange_value(p, l, sc.efforts[l], t, sc.regime_shift_bin) * drive *
                  v_em * env,
              0.0);
          if (!std::isfinite(rate))
            throw std::runtime_error("non-finite rate at opinion=" + o.id + " platform=" + p.id +
                                     " bin=" + std::to_string(t));
          r.y[l] = draw_count(rng, rate, sc.negative_binomial, sc.nb_dispersion);
        }
        double post_rate = p.base_rate * drive * env;
        if (!std::isfinite(post_rate))
          throw std::runtime_error("non-finite post rate at opinion=" + o.id + " platform=" + p.id +
                                   " bin=" + std::to_string(t));
        r.n = draw_count(rng, post_rate, sc.negative_binomial, sc.nb_dispersion);

        double u = bin_utility(r.y, sc.efforts, p.kappa);
        sum_fast[pair] = df * sum_fast[pair] + u;
        sum_slow[pair] = dslow * sum_slow[pair] + u;
        ds.instances.push_back(std::move(r));
      }
    }
  }
  return ds;
}

void verify_dataset(const SynthDataset& ds) {
  nlohmann::json scenario_json = ds.manifest;
  std::uint64_t seed = scenario_json.at("seed").get<std::uint64_t>();
  Scenario sc = scenario_from_json(scenario_json);
  SynthDataset regen = simulate(sc, seed);
  if (regen.instances.size() != ds.instances.size())
    throw std::runtime_error("dataset has " + std::to_string(ds.instances.size()) +
                             " records but manifest regenerates " +
                             std::to_string(regen.instances.size()));
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const RawInstance& a = ds.instances[i];
    const RawInstance& b = regen.instances[i];
    bool same = a.bin == b.bin && a.opinion == b.opinion && a.platform == b.platform &&
                a.y == b.y && a.mask == b.mask && a.n == b.n &&
                a.c.size() == b.c.size() && (a.c.array() == b.c.array()).all() &&
                a.t.size() == b.t.size() && (a.t.array() == b.t.array()).all();
    if (!same)
      throw std::runtime_error("record " + std::to_string(i) +
                               " does not match regeneration from manifest");
  }
}

}  // namespace setcast
