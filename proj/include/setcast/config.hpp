#ifndef SETCAST_CONFIG_HPP_
#define SETCAST_CONFIG_HPP_

#include <string>

#include <json.hpp>

#include "setcast/heads.hpp"

namespace setcast {

enum class Ablation { kNone, kNoFilm, kNoDis, kNoBelief, kNoMemory };
const char* to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct TrainConfig {
  long window_bins = 336;    // one week of 30-minute bins per input window
  long horizon_bins = 336;   // forecast horizon, aggregated into one target
  long stride_bins = 48;     // anchor spacing within the split
  int epochs = 6;
  int batch_size = 16;

  double train_frac = 0.7;
  double val_frac = 0.1;
  double test_frac = 0.2;

  double lr_default = 1e-3;
  double lr_fast = 1e-2;
  double lr_slow = 1e-4;
  double momentum = 0.9;
  double grad_clip = 5.0;

  std::string backbone = "ssm_lite";
  int attn_window = 64;

  int factor_dim = 16;
  int ctx_dim = 48;
  int state_dim = 32;
  int memory_dim = 32;
  int encoder_hidden = 32;
  int fuser_hidden = 64;
  int head_hidden = 64;
  int read_heads = 4;

  int memory_slots = 128;
  std::size_t replay_capacity = 10000;
  int replay_batch = 16;  // matches the default batch size
  int neighborhood_capacity = 336;

  long fast_window_bins = 48;
  double fast_ema_decay = 0.8;
  long slow_window_bins = 336;
  double slow_ema_decay = 0.98;

  LossWeights loss;
  double volume_loss_weight = 1.0;

  Ablation ablation = Ablation::kNone;

  void validate() const;
};

// Defaults plus overrides; unknown keys rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

}  // namespace setcast

#endif  // SETCAST_CONFIG_HPP_
