#include "setcast/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "setcast/backbone.hpp"

namespace setcast {

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoFilm: return "no_film";
    case Ablation::kNoDis: return "no_dis";
    case Ablation::kNoBelief: return "no_belief";
    case Ablation::kNoMemory: return "no_memory";
  }
  throw std::logic_error("unreachable");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no_film") return Ablation::kNoFilm;
  if (s == "no_dis") return Ablation::kNoDis;
  if (s == "no_belief") return Ablation::kNoBelief;
  if (s == "no_memory") return Ablation::kNoMemory;
  throw std::runtime_error("unknown ablation '" + s +
                           "' (expected none|no_film|no_dis|no_belief|no_memory)");
}

void TrainConfig::validate() const {
  if (window_bins < 1 || horizon_bins < 1 || stride_bins < 1)
    throw std::runtime_error("window_bins, horizon_bins and stride_bins must be positive");
  if (epochs < 1 || batch_size < 1) throw std::runtime_error("epochs and batch_size must be positive");
  if (train_frac <= 0.0 || val_frac < 0.0 || test_frac <= 0.0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::runtime_error("split fractions must be positive and sum to 1");
  if (lr_default <= 0.0 || lr_fast <= 0.0 || lr_slow <= 0.0)
    throw std::runtime_error("learning rates must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::runtime_error("momentum must be in [0, 1)");
  if (grad_clip <= 0.0) throw std::runtime_error("grad_clip must be positive");
  backbone_variant_from_string(backbone);
  if (state_dim < 2 || state_dim % 2 != 0)
    throw std::runtime_error("state_dim must be even and at least 2");
  if (factor_dim < 1 || ctx_dim < 1 || memory_dim < 1)
    throw std::runtime_error("latent dims must be positive");
  if (memory_slots < 1) throw std::runtime_error("memory_slots must be positive");
  if (replay_batch < 0) throw std::runtime_error("replay_batch must be nonnegative");
  if (neighborhood_capacity < 1) throw std::runtime_error("neighborhood_capacity must be positive");
  if (fast_window_bins < 1 || slow_window_bins < 1)
    throw std::runtime_error("timescale windows must be positive");
  if (fast_ema_decay < 0.0 || fast_ema_decay >= 1.0 || slow_ema_decay < 0.0 ||
      slow_ema_decay >= 1.0)
    throw std::runtime_error("EMA decays must be in [0, 1)");
  if (read_heads < 1) throw std::runtime_error("read_heads must be positive");
  if (volume_loss_weight < 0.0) throw std::runtime_error("volume_loss_weight must be nonnegative");
  loss.validate();
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed = {
      "window_bins", "horizon_bins", "stride_bins", "epochs", "batch_size",
      "train_frac", "val_frac", "test_frac",
      "lr_default", "lr_fast", "lr_slow", "momentum", "grad_clip",
      "backbone", "attn_window",
      "factor_dim", "ctx_dim", "state_dim", "memory_dim",
      "encoder_hidden", "fuser_hidden", "head_hidden", "read_heads",
      "memory_slots", "replay_capacity", "replay_batch", "neighborhood_capacity",
      "fast_window_bins", "fast_ema_decay", "slow_window_bins", "slow_ema_decay",
      "beta", "lambda_dis", "lambda1", "lambda2", "mape_eps",
      "volume_loss_weight", "ablation"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error("unknown key '" + it.key() + "' in training config");

  TrainConfig c;
  c.window_bins = j.value("window_bins", c.window_bins);
  c.horizon_bins = j.value("horizon_bins", c.horizon_bins);
  c.stride_bins = j.value("stride_bins", c.stride_bins);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.train_frac = j.value("train_frac", c.train_frac);
  c.val_frac = j.value("val_frac", c.val_frac);
  c.test_frac = j.value("test_frac", c.test_frac);
  c.lr_default = j.value("lr_default", c.lr_default);
  c.lr_fast = j.value("lr_fast", c.lr_fast);
  c.lr_slow = j.value("lr_slow", c.lr_slow);
  c.momentum = j.value("momentum", c.momentum);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.backbone = j.value("backbone", c.backbone);
  c.attn_window = j.value("attn_window", c.attn_window);
  c.factor_dim = j.value("factor_dim", c.factor_dim);
  c.ctx_dim = j.value("ctx_dim", c.ctx_dim);
  c.state_dim = j.value("state_dim", c.state_dim);
  c.memory_dim = j.value("memory_dim", c.memory_dim);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.fuser_hidden = j.value("fuser_hidden", c.fuser_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.read_heads = j.value("read_heads", c.read_heads);
  c.memory_slots = j.value("memory_slots", c.memory_slots);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.replay_batch = j.value("replay_batch", c.replay_batch);
  c.neighborhood_capacity = j.value("neighborhood_capacity", c.neighborhood_capacity);
  c.fast_window_bins = j.value("fast_window_bins", c.fast_window_bins);
  c.fast_ema_decay = j.value("fast_ema_decay", c.fast_ema_decay);
  c.slow_window_bins = j.value("slow_window_bins", c.slow_window_bins);
  c.slow_ema_decay = j.value("slow_ema_decay", c.slow_ema_decay);
  c.loss.beta = j.value("beta", c.loss.beta);
  c.loss.lambda_dis = j.value("lambda_dis", c.loss.lambda_dis);
  c.loss.lambda1 = j.value("lambda1", c.loss.lambda1);
  c.loss.lambda2 = j.value("lambda2", c.loss.lambda2);
  c.loss.mape_eps = j.value("mape_eps", c.loss.mape_eps);
  c.volume_loss_weight = j.value("volume_loss_weight", c.volume_loss_weight);
  if (j.contains("ablation")) c.ablation = ablation_from_string(j.at("ablation").get<std::string>());
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["window_bins"] = c.window_bins;
  j["horizon_bins"] = c.horizon_bins;
  j["stride_bins"] = c.stride_bins;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["train_frac"] = c.train_frac;
  j["val_frac"] = c.val_frac;
  j["test_frac"] = c.test_frac;
  j["lr_default"] = c.lr_default;
  j["lr_fast"] = c.lr_fast;
  j["lr_slow"] = c.lr_slow;
  j["momentum"] = c.momentum;
  j["grad_clip"] = c.grad_clip;
  j["backbone"] = c.backbone;
  j["attn_window"] = c.attn_window;
  j["factor_dim"] = c.factor_dim;
  j["ctx_dim"] = c.ctx_dim;
  j["state_dim"] = c.state_dim;
  j["memory_dim"] = c.memory_dim;
  j["encoder_hidden"] = c.encoder_hidden;
  j["fuser_hidden"] = c.fuser_hidden;
  j["head_hidden"] = c.head_hidden;
  j["read_heads"] = c.read_heads;
  j["memory_slots"] = c.memory_slots;
  j["replay_capacity"] = c.replay_capacity;
  j["replay_batch"] = c.replay_batch;
  j["neighborhood_capacity"] = c.neighborhood_capacity;
  j["fast_window_bins"] = c.fast_window_bins;
  j["fast_ema_decay"] = c.fast_ema_decay;
  j["slow_window_bins"] = c.slow_window_bins;
  j["slow_ema_decay"] = c.slow_ema_decay;
  j["beta"] = c.loss.beta;
  j["lambda_dis"] = c.loss.lambda_dis;
  j["lambda1"] = c.loss.lambda1;
  j["lambda2"] = c.loss.lambda2;
  j["mape_eps"] = c.loss.mape_eps;
  j["volume_loss_weight"] = c.volume_loss_weight;
  j["ablation"] = to_string(c.ablation);
  return j;
}

}  // namespace setcast
