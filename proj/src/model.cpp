#include "setcast/model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace setcast {

DataTable DataTable::build(const SynthDataset& ds) {
  DataTable t;
  t.opinions = ds.opinions();
  t.platforms = ds.platforms();
  t.total_bins = ds.total_bins();
  const std::size_t O = t.opinions.size(), P = t.platforms.size();

  std::map<std::string, std::size_t> oidx, pidx;
  for (std::size_t i = 0; i < O; ++i) oidx[t.opinions[i]] = i;
  for (std::size_t i = 0; i < P; ++i) pidx[t.platforms[i]] = i;

  t.content.resize(O);
  t.masks.resize(P);
  t.counts.assign(O * P, Eigen::MatrixXd::Zero(t.total_bins, 4));
  t.volume.assign(O * P, Eigen::VectorXd::Zero(t.total_bins));

  for (const RawInstance& r : ds.instances) {
    auto oi = oidx.find(r.opinion);
    auto pi = pidx.find(r.platform);
    if (oi == oidx.end() || pi == pidx.end())
      throw std::runtime_error("record references unknown opinion or platform: " + r.opinion +
                               "/" + r.platform);
    if (r.bin < 0 || r.bin >= t.total_bins)
      throw std::runtime_error("record bin out of range: " + std::to_string(r.bin));
    std::size_t pair = oi->second * P + pi->second;
    for (int l = 0; l < 4; ++l) t.counts[pair](r.bin, l) = static_cast<double>(r.y[l]);
    t.volume[pair][r.bin] = static_cast<double>(r.n);
    t.content[oi->second] = r.c;
    t.masks[pi->second] = r.mask;
  }
  for (std::size_t o = 0; o < O; ++o)
    if (t.content[o].size() == 0)
      throw std::runtime_error("opinion " + t.opinions[o] + " has no records");

  t.counts_prefix.resize(O * P);
  t.volume_prefix.resize(O * P);
  for (std::size_t pr = 0; pr < O * P; ++pr) {
    Eigen::MatrixXd cp = Eigen::MatrixXd::Zero(t.total_bins + 1, 4);
    Eigen::VectorXd vp = Eigen::VectorXd::Zero(t.total_bins + 1);
    for (long b = 0; b < t.total_bins; ++b) {
      cp.row(b + 1) = cp.row(b) + t.counts[pr].row(b);
      vp[b + 1] = vp[b] + t.volume[pr][b];
    }
    t.counts_prefix[pr] = std::move(cp);
    t.volume_prefix[pr] = std::move(vp);
  }
  return t;
}

Eigen::Vector4d DataTable::target_counts(std::size_t pair, long from, long horizon) const {
  if (from < 0 || from + horizon > total_bins)
    throw std::out_of_range("target window [" + std::to_string(from) + ", " +
                            std::to_string(from + horizon) + ") outside dataset");
  return (counts_prefix[pair].row(from + horizon) - counts_prefix[pair].row(from)).transpose();
}

double DataTable::target_volume(std::size_t pair, long from, long horizon) const {
  if (from < 0 || from + horizon > total_bins)
    throw std::out_of_range("target window outside dataset");
  return volume_prefix[pair][from + horizon] - volume_prefix[pair][from];
}

Eigen::VectorXd DataTable::engagement_features(std::size_t pair, long bin) const {
  Eigen::VectorXd f(kEngagementFeatureDim);
  for (int l = 0; l < 4; ++l) f[l] = std::log1p(counts[pair](bin, l));
  f[4] = std::log1p(volume[pair][bin]);
  return f;
}

Model::Model(const TrainConfig& cfg, std::vector<std::string> platform_ids, int content_dim)
    : cfg_(cfg),
      platforms_(std::move(platform_ids)),
      content_dim_(content_dim),
      variant_(backbone_variant_from_string(cfg.backbone)),
      enc_c_("enc_c", content_dim, cfg.factor_dim, cfg.encoder_hidden),
      enc_p_("enc_p", static_cast<int>(platforms_.size()), cfg.factor_dim, cfg.encoder_hidden),
      enc_t_("enc_t", kTimeFeatureDim, cfg.factor_dim, cfg.encoder_hidden),
      fuser_("fuser", cfg.factor_dim, cfg.ctx_dim, cfg.fuser_hidden),
      ssm_("bb.ssm", cfg.state_dim),
      attn_("bb.attn", cfg.state_dim, cfg.attn_window),
      fast_ad_("mem.fast", ParamGroup::kFast, static_cast<int>(cfg.fast_window_bins),
               cfg.fast_ema_decay, kEngagementFeatureDim, cfg.memory_dim),
      slow_ad_("mem.slow", ParamGroup::kSlow, static_cast<int>(cfg.slow_window_bins),
               cfg.slow_ema_decay, kEngagementFeatureDim, cfg.memory_dim),
      flow_("flow", cfg.state_dim),
      film_("film", platforms_, cfg.state_dim),
      read_("read", cfg.read_heads, cfg.state_dim, cfg.memory_dim,
            cfg.state_dim + static_cast<int>(platforms_.size())),
      heads_("heads", cfg.state_dim, cfg.memory_dim, cfg.factor_dim, cfg.head_hidden),
      target_scale_(Eigen::MatrixXd::Ones(static_cast<long>(platforms_.size()), 4)),
      volume_scale_(Eigen::VectorXd::Ones(static_cast<long>(platforms_.size()))) {
  if (cfg.state_dim != cfg.memory_dim)
    throw std::runtime_error("state_dim must equal memory_dim so belief fusion is well-typed");
}

void Model::init_params(ParamStore& store, Rng& rng) const {
  enc_c_.init_params(store, rng);
  enc_p_.init_params(store, rng);
  enc_t_.init_params(store, rng);
  fuser_.init_params(store, rng);
  const int in_dim = cfg_.ctx_dim + kEngagementFeatureDim;
  store.add_random("bb.w_in", cfg_.state_dim, in_dim, rng,
                   1.0 / std::sqrt(static_cast<double>(in_dim)));
  store.add("bb.b_in", cfg_.state_dim, 1);
  ssm_.init_params(store, rng);
  attn_.init_params(store, rng);
  if (cfg_.ablation != Ablation::kNoMemory) {
    fast_ad_.init_params(store, rng);
    slow_ad_.init_params(store, rng);
    init_fuse_memory_params(store, rng, "mem.fuse", cfg_.factor_dim);
    init_write_gate_params(store, rng, "mem.gate", cfg_.ctx_dim, cfg_.memory_dim,
                           kEngagementLevels);
    init_episodic_write_params(store, rng, "mem.write", cfg_.state_dim, cfg_.memory_dim);
    read_.init_params(store, rng);
  }
  init_fuse_belief_params(store, "belief", cfg_.state_dim);
  flow_.init_params(store);
  film_.init_params(store);
  heads_.init_params(store, rng);
}

Var Model::backbone_input(Tape& tape, Var ctx, const Eigen::VectorXd& engagement) const {
  Var in = ops::concat({ctx, tape.constant(engagement)});
  return ops::tanh_(ops::linear(in, "bb.w_in", "bb.b_in"));
}

StepResult Model::step(Tape& tape, const StepInput& in, const BackboneState& state,
                       EpisodicBank& bank, const NeighborhoodBuffer& nbhd, bool train,
                       bool with_heads, Rng& noise, long step_counter) const {
  if (!state.initialized) throw std::runtime_error("backbone state not initialized");
  StepResult out;

  // no_dis also pins the encoders to posterior means during training.
  const bool sample_latents = train && cfg_.ablation != Ablation::kNoDis;
  auto ec = enc_c_.encode(tape, *in.content, sample_latents, noise);
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(static_cast<long>(platforms_.size()));
  onehot[in.platform_idx] = 1.0;
  auto ep = enc_p_.encode(tape, onehot, sample_latents, noise);
  auto et = enc_t_.encode(tape, in.time_feats, sample_latents, noise);
  out.posterior = PosteriorTriple{ec.mu, ec.logvar, ep.mu, ep.logvar, et.mu, et.logvar,
                                  ops::concat({ec.sample, ep.sample, et.sample})};
  out.z_c = ec.sample;
  out.z_p = ep.sample;
  out.z_t = et.sample;
  out.ctx = fuser_.fuse(tape, ec.sample, ep.sample, et.sample);

  const bool use_memory = cfg_.ablation != Ablation::kNoMemory;
  if (use_memory) {
    out.m_f = fast_ad_.features(tape, *in.fast_window);
    out.m_s = slow_ad_.features(tape, *in.slow_window);
    MemoryFusion fusion = fuse_memory(tape, out.m_f, out.m_s, out.z_c, out.z_t, "mem.fuse");
    out.fused_memory = fusion.fused;
    out.alpha = fusion.alpha;
  } else {
    out.m_f = tape.constant(Eigen::VectorXd::Zero(cfg_.memory_dim));
    out.m_s = tape.constant(Eigen::VectorXd::Zero(cfg_.memory_dim));
    out.fused_memory = tape.constant(Eigen::VectorXd::Zero(cfg_.memory_dim));
    out.alpha = tape.constant_scalar(0.5);
  }

  Var z_proj = backbone_input(tape, out.ctx, in.engagement);
  out.z_proj_value = z_proj.value();
  out.s = variant_ == BackboneVariant::kSsmLite ? ssm_.step(tape, z_proj, state.s)
                                                : attn_.step(tape, z_proj, state.input_window);

  if (use_memory && cfg_.ablation != Ablation::kNoBelief && !bank.empty()) {
    std::vector<int> slot_of_row;
    Eigen::MatrixXd keys = bank.occupied_keys(&slot_of_row);
    Eigen::MatrixXd values = bank.occupied_values();
    out.r = read_.attend(tape, out.s, keys, values, out.s, onehot).value;
    // Usage stamps follow the first head's attention, and only while training
    // so evaluation leaves the bank untouched.
    Eigen::VectorXd q0 = store_query(tape, out.s);
    Eigen::VectorXd scores = keys * q0 / std::sqrt(static_cast<double>(cfg_.memory_dim));
    Eigen::VectorXd w = (scores.array() - scores.maxCoeff()).exp();
    w /= w.sum();
    out.read_weights = w;
    if (train) {
      int best = 0;
      w.maxCoeff(&best);
      bank.touch(slot_of_row[static_cast<std::size_t>(best)], step_counter);
    }
  } else {
    out.r = tape.constant(Eigen::VectorXd::Zero(cfg_.memory_dim));
  }

  if (cfg_.ablation == Ablation::kNoBelief) {
    // Belief formation disabled: the raw recurrent state feeds the heads.
    out.belief = out.s;
    out.b_flow = out.s;
    out.b_comp = out.s;
  } else {
    out.belief = fuse_belief(tape, out.s, out.r, "belief");
    out.b_flow = flow_.forward(tape, out.belief);
    out.b_comp = compare_to_neighborhood(tape, out.b_flow, nbhd);
  }

  out.h_levels.reserve(kEngagementLevels);
  for (int l = 0; l < kEngagementLevels; ++l) {
    out.h_levels.push_back(cfg_.ablation == Ablation::kNoFilm
                               ? out.b_comp
                               : film_.modulate(tape, out.b_comp, in.platform_idx, l));
  }

  if (with_heads) {
    out.pred = heads_.predict_engagement(tape, out.h_levels, out.m_f, out.m_s, out.z_c);
    out.pred.y_hat = scale_engagement(tape, out.pred.y_hat, in.platform_idx, in.scale_ratio);
    Var h_mean = out.h_levels[0];
    for (int l = 1; l < kEngagementLevels; ++l) h_mean = ops::add(h_mean, out.h_levels[l]);
    h_mean = ops::scale(h_mean, 1.0 / kEngagementLevels);
    out.n_hat = scale_volume(tape, heads_.predict_volume(tape, h_mean, out.fused_memory, out.z_c),
                             in.platform_idx, in.volume_ratio);
  }
  return out;
}

Eigen::VectorXd Model::store_query(Tape& tape, Var s) const {
  const ParamStore& store = *tape.store();
  return store.at("read.h0.w_q").value * s.value() + store.at("read.h0.b_q").value.col(0);
}

void Model::advance(BackboneState& state, NeighborhoodBuffer& nbhd, const StepResult& out) const {
  state.s = out.s.value();
  state.step += 1;
  if (variant_ == BackboneVariant::kAttnLite) {
    state.input_window.push_back(out.z_proj_value);
    while (state.input_window.size() > static_cast<std::size_t>(cfg_.attn_window))
      state.input_window.pop_front();
  }
  if (cfg_.ablation != Ablation::kNoBelief) nbhd.push(out.b_flow.value());
}

double Model::maybe_write(const StepResult& out, const Eigen::VectorXd& engagement,
                          EpisodicBank& bank, long step_counter) const {
  if (cfg_.ablation == Ablation::kNoMemory) return 0.0;
  Tape& tape = *out.ctx.tape;
  // The gate sees the masked log1p count vector (levels only, no volume).
  Var g = write_gate(tape, out.ctx, out.fused_memory, engagement.head(kEngagementLevels),
                     "mem.gate");
  double gate = g.scalar();
  Eigen::VectorXd key = episodic_key_candidate(*tape.store(), "mem.write", out.s.value());
  Eigen::VectorXd val = episodic_value_candidate(*tape.store(), "mem.write", out.s.value());
  bank.write(key, val, gate, step_counter);
  return gate;
}

void Model::set_calibration(Eigen::MatrixXd target_scale, Eigen::VectorXd volume_scale) {
  if (target_scale.rows() != static_cast<long>(platforms_.size()) || target_scale.cols() != 4 ||
      volume_scale.size() != static_cast<long>(platforms_.size()))
    throw std::runtime_error("calibration shape mismatch");
  if ((target_scale.array() <= 0.0).any() || (volume_scale.array() <= 0.0).any())
    throw std::runtime_error("calibration scales must be positive");
  target_scale_ = std::move(target_scale);
  volume_scale_ = std::move(volume_scale);
}

Var Model::scale_engagement(Tape& tape, Var y_hat, int platform_idx, double ratio) const {
  Var scale = tape.constant(ratio * target_scale_.row(platform_idx).transpose());
  return ops::cmul(y_hat, scale);
}

Var Model::scale_volume(Tape& tape, Var n_hat, int platform_idx, double ratio) const {
  return ops::scale(n_hat, ratio * volume_scale_[platform_idx]);
}

}  // namespace setcast
