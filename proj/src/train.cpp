#include "setcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace setcast {

namespace {

double masked_mape(const Eigen::Vector4d& yhat, const Eigen::Vector4d& y,
                   const std::array<bool, 4>& mask, double eps) {
  double sum = 0.0;
  int n = 0;
  for (int l = 0; l < 4; ++l) {
    if (!mask[l]) continue;
    sum += std::abs(yhat[l] - y[l]) / std::max(std::abs(y[l]), eps);
    ++n;
  }
  if (n == 0) throw std::runtime_error("all levels masked");
  return sum / n;
}

void write_block(std::ofstream& out, const Eigen::MatrixXd& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_block(std::ifstream& in, long rows, long cols) {
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw std::runtime_error("checkpoint payload truncated");
  return m;
}

constexpr char kMagic[8] = {'S', 'E', 'T', 'C', 'A', 'S', 'T', '1'};

}  // namespace

SplitBins chronological_split(long total_bins, double train_frac, double val_frac) {
  if (total_bins < 1) throw std::invalid_argument("total_bins must be positive");
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0)
    throw std::invalid_argument("invalid split fractions");
  SplitBins s;
  s.train_end = static_cast<long>(std::floor(train_frac * static_cast<double>(total_bins)));
  s.val_end =
      static_cast<long>(std::floor((train_frac + val_frac) * static_cast<double>(total_bins)));
  if (s.train_end < 1 || s.val_end >= total_bins)
    throw std::invalid_argument("split leaves an empty range");
  return s;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["model_mape"] = model_mape;
  j["model_volume_mape"] = model_volume_mape;
  j["histavg_mape"] = histavg_mape;
  j["persistence_mape"] = persistence_mape;
  j["ar_mape"] = ar_mape;
  j["mean_alpha"] = mean_alpha;
  j["mean_weight"] = mean_weight;
  j["instances"] = instances;
  j["horizon_bins"] = horizon_bins;
  j["per_platform_mape"] = per_platform_mape;
  j["per_platform_volume_mape"] = per_platform_volume_mape;
  return j;
}

Trainer::Trainer(TrainConfig cfg, const DataTable& table, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      table_(&table),
      seed_(seed),
      split_(chronological_split(table.total_bins, cfg_.train_frac, cfg_.val_frac)),
      model_(cfg_, table.platforms, static_cast<int>(table.content[0].size())),
      bank_(cfg_.memory_slots, cfg_.memory_dim),
      replay_(cfg_.replay_capacity),
      noise_(seed, "noise"),
      reservoir_(seed, "reservoir"),
      replay_rng_(seed, "replay") {
  cfg_.validate();
  pair_rate_base_.resize(static_cast<long>(table.pairs()));
  pair_volume_base_.resize(static_cast<long>(table.pairs()));
  double per_bin = static_cast<double>(split_.train_end);
  for (std::size_t pr = 0; pr < table.pairs(); ++pr) {
    pair_rate_base_[static_cast<long>(pr)] =
        table.counts_prefix[pr].row(split_.train_end).sum() / per_bin;
    pair_volume_base_[static_cast<long>(pr)] =
        table.volume_prefix[pr][split_.train_end] / per_bin;
  }
  Rng init(seed, "init");
  model_.init_params(store_, init);
  for (const auto& [name, entry] : store_.entries())
    momentum_[name] = Eigen::MatrixXd::Zero(entry.value.rows(), entry.value.cols());
}

void Trainer::calibrate() {
  const std::size_t P = table_->platforms.size();
  Eigen::MatrixXd scale = Eigen::MatrixXd::Zero(static_cast<long>(P), 4);
  Eigen::VectorXd vol = Eigen::VectorXd::Zero(static_cast<long>(P));
  Eigen::VectorXd pairs_per = Eigen::VectorXd::Zero(static_cast<long>(P));
  for (std::size_t pr = 0; pr < table_->pairs(); ++pr) {
    long p = static_cast<long>(table_->platform_of_pair(pr));
    scale.row(p) += table_->counts_prefix[pr].row(split_.train_end);
    vol[p] += table_->volume_prefix[pr][split_.train_end];
    pairs_per[p] += 1.0;
  }
  double per_bin = static_cast<double>(split_.train_end);
  for (long p = 0; p < static_cast<long>(P); ++p) {
    double denom = std::max(pairs_per[p], 1.0) * per_bin;
    // One shared scale per platform (mean over its available levels), not one
    // per level: per-level magnitude differences must come out of the learned
    // per-level modulation parameters, or the exchange-rate analysis would
    // read back a constant the calibration had baked in.
    const auto& mask = table_->masks[static_cast<std::size_t>(p)];
    double level_sum = 0.0;
    int live = 0;
    for (int l = 0; l < 4; ++l) {
      if (!mask[static_cast<std::size_t>(l)]) continue;
      level_sum += scale(p, l);
      ++live;
    }
    double shared = std::max(level_sum / std::max(live, 1) / denom *
                                 static_cast<double>(cfg_.horizon_bins),
                             1.0);
    scale.row(p).setConstant(shared);
    vol[p] = std::max(vol[p] / denom * static_cast<double>(cfg_.horizon_bins), 1.0);
  }
  model_.set_calibration(std::move(scale), std::move(vol));
}

void Trainer::reset_stream_state() {
  pair_states_.assign(table_->pairs(), PairState{});
  for (auto& ps : pair_states_) ps.backbone = BackboneState::fresh(cfg_.state_dim);
  neighborhoods_.assign(table_->platforms.size(),
                        NeighborhoodBuffer(cfg_.neighborhood_capacity, cfg_.state_dim));
}

bool Trainer::is_anchor(long bin, long range_begin, long range_end) const {
  long first = range_begin + cfg_.window_bins - 1;
  if (bin < first) return false;
  if ((bin - first) % cfg_.stride_bins != 0) return false;
  return bin + 1 + cfg_.horizon_bins <= range_end;
}

StepInput Trainer::make_input(std::size_t pair, long bin, const PairState& ps) const {
  StepInput in;
  in.content = &table_->content[table_->opinion_of_pair(pair)];
  in.time_feats = time_features(bin, table_->total_bins);
  in.engagement = table_->engagement_features(pair, bin);
  in.platform_idx = static_cast<int>(table_->platform_of_pair(pair));
  in.scale_ratio = rate_ratio(pair, bin);
  in.volume_ratio = volume_ratio(pair, bin);
  return in;
}

namespace {
double clamp_ratio(double num, double den) {
  if (den <= 0.0) return 1.0;
  return std::clamp(num / den, 0.1, 10.0);
}
}  // namespace

double Trainer::rate_ratio(std::size_t pair, long bin) const {
  long lo = std::max<long>(0, bin + 1 - cfg_.window_bins);
  double trailing = (table_->counts_prefix[pair].row(bin + 1).sum() -
                     table_->counts_prefix[pair].row(lo).sum()) /
                    static_cast<double>(bin + 1 - lo);
  return clamp_ratio(trailing, pair_rate_base_[static_cast<long>(pair)]);
}

double Trainer::volume_ratio(std::size_t pair, long bin) const {
  long lo = std::max<long>(0, bin + 1 - cfg_.window_bins);
  double trailing = (table_->volume_prefix[pair][bin + 1] - table_->volume_prefix[pair][lo]) /
                    static_cast<double>(bin + 1 - lo);
  return clamp_ratio(trailing, pair_volume_base_[static_cast<long>(pair)]);
}

Var Trainer::replay_loss_term(Tape& tape) {
  if (replay_.size() == 0 || cfg_.replay_batch == 0 || cfg_.loss.lambda2 <= 0.0)
    return Var{};
  auto records = replay_.sample(static_cast<std::size_t>(cfg_.replay_batch), replay_rng_);
  Var sum{};
  for (const auto& rec : records) {
    Var b_comp = tape.constant(rec.b_comp);
    std::vector<Var> h_levels;
    for (int l = 0; l < kEngagementLevels; ++l)
      h_levels.push_back(cfg_.ablation == Ablation::kNoFilm
                             ? b_comp
                             : model_.film().modulate(tape, b_comp, rec.platform, l));
    // Re-predict the stored episode under current parameters.
    auto pred = model_.heads().predict_engagement(tape, h_levels, tape.constant(rec.m_f),
                                                  tape.constant(rec.m_s), tape.constant(rec.z_c));
    Var y_hat = model_.scale_engagement(tape, pred.y_hat, rec.platform, rec.scale_ratio);
    std::vector<bool> mask(table_->masks[rec.platform].begin(),
                           table_->masks[rec.platform].end());
    Var loss = ops::mape(y_hat, rec.y, mask, cfg_.loss.mape_eps);
    sum = sum.valid() ? ops::add(sum, loss) : loss;
  }
  return sum.valid() ? ops::scale(sum, 1.0 / static_cast<double>(records.size())) : Var{};
}

void Trainer::sgd_step() {
  double sq = 0.0;
  for (const auto& [name, entry] : store_.entries()) sq += entry.grad.squaredNorm();
  double norm = std::sqrt(sq);
  double scale = (norm > cfg_.grad_clip && norm > 0.0) ? cfg_.grad_clip / norm : 1.0;
  for (auto& [name, entry] : store_.entries()) {
    double lr = cfg_.lr_default;
    if (entry.group == ParamGroup::kFast) lr = cfg_.lr_fast;
    if (entry.group == ParamGroup::kSlow) lr = cfg_.lr_slow;
    Eigen::MatrixXd& v = momentum_[name];
    v = cfg_.momentum * v - lr * scale * entry.grad;
    entry.value += v;
  }
  store_.zero_grads();
}

namespace {
struct EvalAccum {
  double model_sum = 0, vol_sum = 0, hist_sum = 0, pers_sum = 0, ar_sum = 0;
  double alpha_sum = 0, weight_sum = 0;
  long n = 0;
  std::map<std::string, std::pair<double, long>> per_platform;
  std::map<std::string, double> per_platform_vol;
};
}  // namespace

void Trainer::train() { train_epochs(cfg_.epochs - epochs_done_); }

void Trainer::train_epochs(int count) {
  const long range_end = split_.train_end;
  for (int e = 0; e < count; ++e) {
    reset_stream_state();
    double loss_sum = 0.0;
    long loss_batches = 0;
    for (long bin = 0; bin < range_end; ++bin) {
      for (std::size_t pr = 0; pr < table_->pairs(); ++pr) {
        auto& ps = pair_states_[pr];
        ps.engagement.push_back(table_->engagement_features(pr, bin));
        if (ps.engagement.size() > static_cast<std::size_t>(cfg_.slow_window_bins))
          ps.engagement.erase(ps.engagement.begin());
      }
      const bool anchor = is_anchor(bin, 0, range_end);
      if (!anchor) {
        for (std::size_t pr = 0; pr < table_->pairs(); ++pr) {
          auto& ps = pair_states_[pr];
          Tape tape(&store_);
          StepInput in = make_input(pr, bin, ps);
          std::vector<Eigen::VectorXd> fastw(
              ps.engagement.end() -
                  std::min<std::size_t>(ps.engagement.size(),
                                        static_cast<std::size_t>(cfg_.fast_window_bins)),
              ps.engagement.end());
          in.fast_window = &fastw;
          in.slow_window = &ps.engagement;
          StepResult out =
              model_.step(tape, in, ps.backbone, bank_,
                          neighborhoods_[static_cast<std::size_t>(in.platform_idx)], true,
                          false, noise_, global_step_);
          model_.advance(ps.backbone, neighborhoods_[static_cast<std::size_t>(in.platform_idx)],
                         out);
        }
        ++global_step_;
        continue;
      }

      // Anchor bin: every pair is a training instance; process in minibatches.
      for (std::size_t start = 0; start < table_->pairs();
           start += static_cast<std::size_t>(cfg_.batch_size)) {
        std::size_t stop =
            std::min(table_->pairs(), start + static_cast<std::size_t>(cfg_.batch_size));
        Tape tape(&store_);
        std::vector<StepResult> outs;
        std::vector<PosteriorTriple> triples;
        Var pred_sum{};
        std::vector<std::vector<Eigen::VectorXd>> fast_windows(stop - start);
        for (std::size_t pr = start; pr < stop; ++pr) {
          auto& ps = pair_states_[pr];
          StepInput in = make_input(pr, bin, ps);
          auto& fastw = fast_windows[pr - start];
          fastw.assign(ps.engagement.end() -
                           std::min<std::size_t>(ps.engagement.size(),
                                                 static_cast<std::size_t>(cfg_.fast_window_bins)),
                       ps.engagement.end());
          in.fast_window = &fastw;
          in.slow_window = &ps.engagement;
          StepResult out =
              model_.step(tape, in, ps.backbone, bank_,
                          neighborhoods_[static_cast<std::size_t>(in.platform_idx)], true, true,
                          noise_, global_step_);
          Eigen::Vector4d target = table_->target_counts(pr, bin + 1, cfg_.horizon_bins);
          double vol_target = table_->target_volume(pr, bin + 1, cfg_.horizon_bins);
          const auto& mask_arr = table_->masks[static_cast<std::size_t>(in.platform_idx)];
          std::vector<bool> mask(mask_arr.begin(), mask_arr.end());
          Var inst = ops::mape(out.pred.y_hat, target, mask, cfg_.loss.mape_eps);
          if (cfg_.volume_loss_weight > 0.0) {
            Eigen::VectorXd vt(1);
            vt[0] = vol_target;
            Var vl = ops::mape(out.n_hat, vt, {true}, cfg_.loss.mape_eps);
            inst = ops::add(inst, ops::scale(vl, cfg_.volume_loss_weight));
          }
          pred_sum = pred_sum.valid() ? ops::add(pred_sum, inst) : inst;
          triples.push_back(out.posterior);
          outs.push_back(std::move(out));
        }
        Var pred = ops::scale(pred_sum, 1.0 / static_cast<double>(stop - start));
        Var dis = tape.constant_scalar(0.0);
        if (cfg_.ablation != Ablation::kNoDis && cfg_.loss.lambda1 > 0.0 && triples.size() >= 2)
          dis = disentanglement_loss(tape, triples, cfg_.loss.beta, cfg_.loss.lambda_dis);
        Var rep = replay_loss_term(tape);
        LossWeights lw = cfg_.loss;
        if (cfg_.ablation == Ablation::kNoDis) lw.lambda1 = 0.0;
        Var total = total_loss(tape, pred, dis, rep, lw);
        if (!std::isfinite(total.scalar()))
          throw std::runtime_error("loss diverged at epoch " + std::to_string(epochs_done_ + 1) +
                                   ", bin " + std::to_string(bin) + ", batch starting at pair " +
                                   std::to_string(start));
        tape.backward(total);
        loss_sum += total.scalar();
        ++loss_batches;
        sgd_step();

        for (std::size_t pr = start; pr < stop; ++pr) {
          auto& ps = pair_states_[pr];
          const StepResult& out = outs[pr - start];
          int pidx = static_cast<int>(table_->platform_of_pair(pr));
          model_.maybe_write(out, table_->engagement_features(pr, bin), bank_, global_step_);
          if (cfg_.replay_capacity > 0) {
            ReplayRecord rec;
            rec.b_comp = out.b_comp.value();
            rec.m_f = out.m_f.value();
            rec.m_s = out.m_s.value();
            rec.z_c = out.z_c.value();
            rec.platform = pidx;
            rec.y = table_->target_counts(pr, bin + 1, cfg_.horizon_bins);
            rec.scale_ratio = rate_ratio(pr, bin);
            replay_.push(rec, reservoir_);
          }
          model_.advance(ps.backbone, neighborhoods_[static_cast<std::size_t>(pidx)], out);
        }
      }
      ++global_step_;
    }
    last_train_loss_ = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    ++epochs_done_;
  }
}

EvalReport Trainer::evaluate(long range_begin, long range_end) {
  if (range_begin < 0 || range_end > table_->total_bins || range_begin >= range_end)
    throw std::invalid_argument("bad evaluation range");
  reset_stream_state();
  EvalAccum acc;
  EvalReport rep;
  rep.horizon_bins = cfg_.horizon_bins;
  Rng eval_noise(seed_, "eval_noise");  // untouched: eval uses posterior means
  for (long bin = range_begin; bin < range_end; ++bin) {
    const bool anchor = is_anchor(bin, range_begin, range_end);
    for (std::size_t pr = 0; pr < table_->pairs(); ++pr) {
      auto& ps = pair_states_[pr];
      ps.engagement.push_back(table_->engagement_features(pr, bin));
      if (ps.engagement.size() > static_cast<std::size_t>(cfg_.slow_window_bins))
        ps.engagement.erase(ps.engagement.begin());
      Tape tape(&store_);
      StepInput in = make_input(pr, bin, ps);
      std::vector<Eigen::VectorXd> fastw(
          ps.engagement.end() -
              std::min<std::size_t>(ps.engagement.size(),
                                    static_cast<std::size_t>(cfg_.fast_window_bins)),
          ps.engagement.end());
      in.fast_window = &fastw;
      in.slow_window = &ps.engagement;
      NeighborhoodBuffer& nbhd = neighborhoods_[static_cast<std::size_t>(in.platform_idx)];
      StepResult out =
          model_.step(tape, in, ps.backbone, bank_, nbhd, false, anchor, eval_noise, 0);
      if (anchor) {
        Eigen::Vector4d target = table_->target_counts(pr, bin + 1, cfg_.horizon_bins);
        double vol_target = table_->target_volume(pr, bin + 1, cfg_.horizon_bins);
        const auto& mask = table_->masks[static_cast<std::size_t>(in.platform_idx)];
        Eigen::Vector4d yhat = out.pred.y_hat.value();
        double m = masked_mape(yhat, target, mask, cfg_.loss.mape_eps);
        acc.model_sum += m;
        double vape = std::abs(out.n_hat.scalar() - vol_target) /
                      std::max(vol_target, cfg_.loss.mape_eps);
        acc.vol_sum += vape;
        InstanceRecord irec;
        irec.id = table_->opinions[table_->opinion_of_pair(pr)] + "/" +
                  table_->platforms[static_cast<std::size_t>(in.platform_idx)] + "@" +
                  std::to_string(bin);
        irec.platform = in.platform_idx;
        irec.alpha = out.alpha.scalar();
        irec.mask = mask;
        for (int l = 0; l < 4; ++l)
          irec.level_ape[static_cast<std::size_t>(l)] =
              std::abs(yhat[l] - target[l]) / std::max(std::abs(target[l]), cfg_.loss.mape_eps);
        irec.mape = m;
        rep.records.push_back(std::move(irec));
        Eigen::Vector4d hist, pers, ar;
        for (int l = 0; l < 4; ++l) {
          Eigen::VectorXd window =
              table_->counts[pr].col(l).segment(bin + 1 - cfg_.window_bins, cfg_.window_bins);
          hist[l] = histavg_forecast(window, cfg_.horizon_bins);
          pers[l] = persistence_forecast(window, cfg_.horizon_bins);
          ar[l] = ar_forecast(window, cfg_.horizon_bins);
        }
        acc.hist_sum += masked_mape(hist, target, mask, cfg_.loss.mape_eps);
        acc.pers_sum += masked_mape(pers, target, mask, cfg_.loss.mape_eps);
        acc.ar_sum += masked_mape(ar, target, mask, cfg_.loss.mape_eps);
        acc.alpha_sum += out.alpha.scalar();
        acc.weight_sum += out.pred.weight.scalar();
        const std::string& plat = table_->platforms[static_cast<std::size_t>(in.platform_idx)];
        auto& pp = acc.per_platform[plat];
        pp.first += m;
        pp.second += 1;
        acc.per_platform_vol[plat] += vape;
        ++acc.n;
      }
      model_.advance(ps.backbone, nbhd, out);
    }
  }
  rep.instances = acc.n;
  if (acc.n > 0) {
    double dn = static_cast<double>(acc.n);
    rep.model_mape = acc.model_sum / dn;
    rep.model_volume_mape = acc.vol_sum / dn;
    rep.histavg_mape = acc.hist_sum / dn;
    rep.persistence_mape = acc.pers_sum / dn;
    rep.ar_mape = acc.ar_sum / dn;
    rep.mean_alpha = acc.alpha_sum / dn;
    rep.mean_weight = acc.weight_sum / dn;
    for (const auto& [plat, pair] : acc.per_platform) {
      rep.per_platform_mape[plat] = pair.first / static_cast<double>(pair.second);
      rep.per_platform_volume_mape[plat] =
          acc.per_platform_vol[plat] / static_cast<double>(pair.second);
    }
  }
  return rep;
}

EvalReport Trainer::evaluate_test() { return evaluate(split_.val_end, table_->total_bins); }
EvalReport Trainer::evaluate_val() { return evaluate(split_.train_end, split_.val_end); }

void Trainer::save(const std::string& path) const {
  nlohmann::json header;
  header["format_version"] = 1;
  header["seed"] = seed_;
  header["epochs_done"] = epochs_done_;
  header["global_step"] = global_step_;
  header["last_train_loss"] = last_train_loss_;
  header["config"] = train_config_to_json(cfg_);
  header["platforms"] = table_->platforms;
  header["rng"] = {{"noise", noise_.counter()},
                   {"reservoir", reservoir_.counter()},
                   {"replay", replay_rng_.counter()}};
  header["bank_usage"] = bank_.usage();
  header["bank_occupied"] = bank_.occupied();
  header["replay_seen"] = replay_.seen();

  nlohmann::json blocks = nlohmann::json::array();
  nlohmann::json groups;
  auto block = [&blocks](const std::string& name, long rows, long cols) {
    blocks.push_back({name, rows, cols});
  };
  for (const auto& [name, entry] : store_.entries()) {
    block("p:" + name, entry.value.rows(), entry.value.cols());
    groups[name] = to_string(entry.group);
  }
  for (const auto& [name, m] : momentum_) block("m:" + name, m.rows(), m.cols());
  block("bank.keys", bank_.keys().rows(), bank_.keys().cols());
  block("bank.values", bank_.values().rows(), bank_.values().cols());
  block("cal.target_scale", model_.target_scale().rows(), model_.target_scale().cols());
  block("cal.volume_scale", model_.volume_scale().size(), 1);
  const long rec_dim = cfg_.state_dim + 2 * cfg_.memory_dim + cfg_.factor_dim + 6;
  block("replay", static_cast<long>(replay_.size()), rec_dim);
  header["blocks"] = blocks;
  header["param_groups"] = groups;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  std::string hs = header.dump();
  std::uint64_t hlen = hs.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, entry] : store_.entries()) write_block(out, entry.value);
  for (const auto& [name, m] : momentum_) write_block(out, m);
  write_block(out, bank_.keys());
  write_block(out, bank_.values());
  write_block(out, model_.target_scale());
  write_block(out, model_.volume_scale());
  Eigen::MatrixXd rep(static_cast<long>(replay_.size()), rec_dim);
  for (std::size_t i = 0; i < replay_.size(); ++i) {
    const ReplayRecord& r = replay_.records()[i];
    long off = 0;
    rep.row(static_cast<long>(i)).segment(off, cfg_.state_dim) = r.b_comp.transpose();
    off += cfg_.state_dim;
    rep.row(static_cast<long>(i)).segment(off, cfg_.memory_dim) = r.m_f.transpose();
    off += cfg_.memory_dim;
    rep.row(static_cast<long>(i)).segment(off, cfg_.memory_dim) = r.m_s.transpose();
    off += cfg_.memory_dim;
    rep.row(static_cast<long>(i)).segment(off, cfg_.factor_dim) = r.z_c.transpose();
    off += cfg_.factor_dim;
    rep(static_cast<long>(i), off++) = static_cast<double>(r.platform);
    rep.row(static_cast<long>(i)).segment(off, 4) = r.y.transpose();
    off += 4;
    rep(static_cast<long>(i), off) = r.scale_ratio;
  }
  write_block(out, rep);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Trainer Trainer::load(const std::string& path, const DataTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + " is not a checkpoint file");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("checkpoint header truncated");
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format version");

  auto platforms = header.at("platforms").get<std::vector<std::string>>();
  if (platforms != table.platforms)
    throw std::runtime_error("checkpoint platforms do not match the dataset");

  TrainConfig cfg = train_config_from_json(header.at("config"));
  Trainer t(cfg, table, header.at("seed").get<std::uint64_t>());
  t.epochs_done_ = header.at("epochs_done").get<int>();
  t.global_step_ = header.at("global_step").get<long>();
  t.last_train_loss_ = header.at("last_train_loss").get<double>();
  t.noise_.set_counter(header.at("rng").at("noise").get<std::uint64_t>());
  t.reservoir_.set_counter(header.at("rng").at("reservoir").get<std::uint64_t>());
  t.replay_rng_.set_counter(header.at("rng").at("replay").get<std::uint64_t>());

  Eigen::MatrixXd bank_keys, bank_values, target_scale, vol_scale, replay_mat;
  for (const auto& b : header.at("blocks")) {
    std::string name = b.at(0).get<std::string>();
    long rows = b.at(1).get<long>(), cols = b.at(2).get<long>();
    Eigen::MatrixXd m = read_block(in, rows, cols);
    if (name.rfind("p:", 0) == 0) {
      std::string pname = name.substr(2);
      if (!t.store_.has(pname)) throw std::runtime_error("checkpoint has unknown parameter " + pname);
      auto& entry = t.store_.at(pname);
      if (entry.value.rows() != rows || entry.value.cols() != cols)
        throw std::runtime_error("checkpoint shape mismatch for " + pname);
      entry.value = std::move(m);
    } else if (name.rfind("m:", 0) == 0) {
      t.momentum_[name.substr(2)] = std::move(m);
    } else if (name == "bank.keys") {
      bank_keys = std::move(m);
    } else if (name == "bank.values") {
      bank_values = std::move(m);
    } else if (name == "cal.target_scale") {
      target_scale = std::move(m);
    } else if (name == "cal.volume_scale") {
      vol_scale = std::move(m);
    } else if (name == "replay") {
      replay_mat = std::move(m);
    } else {
      throw std::runtime_error("checkpoint has unknown block " + name);
    }
  }
  t.bank_.restore(std::move(bank_keys), std::move(bank_values),
                  header.at("bank_usage").get<std::vector<long>>(),
                  header.at("bank_occupied").get<std::vector<bool>>());
  t.model_.set_calibration(std::move(target_scale), Eigen::VectorXd(vol_scale.col(0)));
  std::vector<ReplayRecord> records;
  records.reserve(static_cast<std::size_t>(replay_mat.rows()));
  for (long i = 0; i < replay_mat.rows(); ++i) {
    ReplayRecord r;
    long off = 0;
    r.b_comp = replay_mat.row(i).segment(off, cfg.state_dim).transpose();
    off += cfg.state_dim;
    r.m_f = replay_mat.row(i).segment(off, cfg.memory_dim).transpose();
    off += cfg.memory_dim;
    r.m_s = replay_mat.row(i).segment(off, cfg.memory_dim).transpose();
    off += cfg.memory_dim;
    r.z_c = replay_mat.row(i).segment(off, cfg.factor_dim).transpose();
    off += cfg.factor_dim;
    r.platform = static_cast<int>(replay_mat(i, off++));
    r.y = replay_mat.row(i).segment(off, 4).transpose();
    off += 4;
    r.scale_ratio = replay_mat(i, off);
    records.push_back(std::move(r));
  }
  t.replay_.restore(std::move(records), header.at("replay_seen").get<std::uint64_t>());
  return t;
}

}  // namespace setcast
