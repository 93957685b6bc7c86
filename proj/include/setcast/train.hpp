#ifndef SETCAST_TRAIN_HPP_
#define SETCAST_TRAIN_HPP_

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "setcast/baselines.hpp"
#include "setcast/model.hpp"

namespace setcast {

struct SplitBins {
  long train_end = 0;  // bins [0, train_end) train
  long val_end = 0;    // bins [train_end, val_end) validation, rest test
};
SplitBins chronological_split(long total_bins, double train_frac, double val_frac);

// Stored exchange episode for experience replay: everything the adaptation
// stack needs to re-predict one past instance under current parameters.
struct ReplayRecord {
  Eigen::VectorXd b_comp, m_f, m_s, z_c;
  int platform = 0;
  Eigen::Vector4d y;
  double scale_ratio = 1.0;  // trailing-activity scale in effect at the anchor
};

// One evaluated (opinion, platform, anchor) instance.
struct InstanceRecord {
  std::string id;  // "<opinion>/<platform>@<bin>"
  int platform = 0;
  double alpha = 0.5;  // timescale fusion gate
  std::array<double, 4> level_ape{0, 0, 0, 0};
  std::array<bool, 4> mask{true, true, true, true};
  double mape = 0.0;  // masked mean of level_ape
};

struct EvalReport {
  double model_mape = 0.0;
  double model_volume_mape = 0.0;
  double histavg_mape = 0.0;
  double persistence_mape = 0.0;
  double ar_mape = 0.0;
  double mean_alpha = 0.0;
  double mean_weight = 0.0;  // mean recency-head mixing weight w
  long instances = 0;
  long horizon_bins = 0;
  std::map<std::string, double> per_platform_mape;
  std::map<std::string, double> per_platform_volume_mape;
  std::vector<InstanceRecord> records;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, const DataTable& table, std::uint64_t seed);

  // Per-platform output scales from the training split (shared across levels;
  // per-level structure is left to the learned modulation parameters).
  void calibrate();

  void train();                  // cfg.epochs from the current epoch counter
  void train_epochs(int count);  // incremental
  EvalReport evaluate(long range_begin, long range_end);
  EvalReport evaluate_test();
  EvalReport evaluate_val();

  void save(const std::string& path) const;
  static Trainer load(const std::string& path, const DataTable& table);

  const ParamStore& store() const { return store_; }
  ParamStore& store() { return store_; }
  const Model& model() const { return model_; }
  const EpisodicBank& bank() const { return bank_; }
  const ReplayBuffer<ReplayRecord>& replay() const { return replay_; }
  const SplitBins& split() const { return split_; }
  const TrainConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  int epochs_done() const { return epochs_done_; }
  double last_train_loss() const { return last_train_loss_; }

 private:
  struct PairState {
    BackboneState backbone;
    std::vector<Eigen::VectorXd> engagement;  // trailing slow-window features
  };

  void reset_stream_state();
  StepInput make_input(std::size_t pair, long bin, const PairState& ps) const;
  // Trailing per-bin activity of a pair (pooled across levels) over the input
  // window ending at `bin`, divided by its training-split average. Anchors the
  // output scale to the current regime; uses only bins <= bin, so it is causal.
  double rate_ratio(std::size_t pair, long bin) const;
  double volume_ratio(std::size_t pair, long bin) const;
  bool is_anchor(long bin, long range_begin, long range_end) const;
  Var replay_loss_term(Tape& tape);
  void sgd_step();

  TrainConfig cfg_;
  const DataTable* table_;
  std::uint64_t seed_;
  SplitBins split_;
  Model model_;
  ParamStore store_;
  std::map<std::string, Eigen::MatrixXd> momentum_;
  EpisodicBank bank_;
  ReplayBuffer<ReplayRecord> replay_;
  Rng noise_, reservoir_, replay_rng_;
  long global_step_ = 0;
  int epochs_done_ = 0;
  double last_train_loss_ = 0.0;

  // Per-pair training-split per-bin averages (pooled across levels), the
  // denominators of the trailing-activity scale ratios.
  Eigen::VectorXd pair_rate_base_, pair_volume_base_;

  // Streaming scratch (reset at the start of every pass over a range).
  std::vector<PairState> pair_states_;
  std::vector<NeighborhoodBuffer> neighborhoods_;  // per platform
};

}  // namespace setcast

#endif  // SETCAST_TRAIN_HPP_
