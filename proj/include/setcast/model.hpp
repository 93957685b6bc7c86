#ifndef SETCAST_MODEL_HPP_
#define SETCAST_MODEL_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "setcast/adaptation.hpp"
#include "setcast/backbone.hpp"
#include "setcast/config.hpp"
#include "setcast/dataset.hpp"
#include "setcast/heads.hpp"
#include "setcast/memory.hpp"
#include "setcast/representation.hpp"
#include "setcast/synthgen.hpp"

namespace setcast {

// Dataset reorganized into per-(opinion, platform) series with prefix sums so
// horizon-aggregated targets are O(1).
struct DataTable {
  std::vector<std::string> opinions;
  std::vector<std::string> platforms;
  std::vector<Eigen::VectorXd> content;        // per opinion
  std::vector<std::array<bool, 4>> masks;      // per platform
  long total_bins = 0;
  std::vector<Eigen::MatrixXd> counts;         // per pair, T x 4
  std::vector<Eigen::VectorXd> volume;         // per pair, T
  std::vector<Eigen::MatrixXd> counts_prefix;  // per pair, (T+1) x 4
  std::vector<Eigen::VectorXd> volume_prefix;  // per pair, T+1

  static DataTable build(const SynthDataset& ds);

  std::size_t pairs() const { return counts.size(); }
  int pair_index(std::size_t opinion, std::size_t platform) const {
    return static_cast<int>(opinion * platforms.size() + platform);
  }
  std::size_t platform_of_pair(std::size_t pair) const { return pair % platforms.size(); }
  std::size_t opinion_of_pair(std::size_t pair) const { return pair / platforms.size(); }

  // Sum of counts over bins [from, from + horizon).
  Eigen::Vector4d target_counts(std::size_t pair, long from, long horizon) const;
  double target_volume(std::size_t pair, long from, long horizon) const;
  // log1p of the four counts and the post volume at one bin.
  Eigen::VectorXd engagement_features(std::size_t pair, long bin) const;
};

inline constexpr int kEngagementFeatureDim = 5;

struct StepInput {
  const Eigen::VectorXd* content = nullptr;
  Eigen::VectorXd time_feats;
  Eigen::VectorXd engagement;  // current-bin engagement features
  int platform_idx = 0;
  const std::vector<Eigen::VectorXd>* fast_window = nullptr;
  const std::vector<Eigen::VectorXd>* slow_window = nullptr;
  // Ratio of the trailing-window activity of this series to its training-split
  // average, pooled across levels. Anchors the output scale to the current
  // regime without touching per-level structure.
  double scale_ratio = 1.0;
  double volume_ratio = 1.0;
};

struct StepResult {
  PosteriorTriple posterior;
  Var z_c, z_p, z_t;  // factor samples
  Var ctx;
  Var s;
  Var r;
  Var belief;
  Var b_flow;
  Var b_comp;
  Var m_f, m_s, fused_memory, alpha;
  std::vector<Var> h_levels;
  PredictionHeads::Engagement pred;  // only when with_heads
  Var n_hat;                         // only when with_heads
  Eigen::VectorXd z_proj_value;      // for the attention window
  Eigen::VectorXd read_weights;      // per occupied slot (empty bank: empty)
};

// The full per-bin pipeline: factor encoders -> context fusion -> timescale
// memories -> backbone step -> gated episodic read -> belief fusion -> flow ->
// neighborhood comparison -> per-level modulation -> prediction heads.
class Model {
 public:
  Model() = default;
  Model(const TrainConfig& cfg, std::vector<std::string> platform_ids, int content_dim);

  void init_params(ParamStore& store, Rng& rng) const;

  StepResult step(Tape& tape, const StepInput& in, const BackboneState& state,
                  EpisodicBank& bank, const NeighborhoodBuffer& nbhd, bool train,
                  bool with_heads, Rng& noise, long step_counter) const;

  // Advances recurrent bookkeeping from a computed step: recurrent state, the
  // attention input window, and the platform neighborhood buffer.
  void advance(BackboneState& state, NeighborhoodBuffer& nbhd, const StepResult& out) const;

  // Gated episodic write from the current step (train only by convention).
  // Returns the gate value.
  double maybe_write(const StepResult& out, const Eigen::VectorXd& engagement,
                     EpisodicBank& bank, long step_counter) const;

  // Fixed output calibration: predictions are scaled by per-platform constants
  // so the softplus heads work near unit scale. Not trained. A per-instance
  // ratio (trailing activity over training average) multiplies on top so the
  // scale tracks slow drift in the series.
  void set_calibration(Eigen::MatrixXd target_scale, Eigen::VectorXd volume_scale);
  const Eigen::MatrixXd& target_scale() const { return target_scale_; }
  const Eigen::VectorXd& volume_scale() const { return volume_scale_; }

  Var scale_engagement(Tape& tape, Var y_hat, int platform_idx, double ratio = 1.0) const;
  Var scale_volume(Tape& tape, Var n_hat, int platform_idx, double ratio = 1.0) const;

  const TrainConfig& config() const { return cfg_; }
  const FilmBank& film() const { return film_; }
  const PredictionHeads& heads() const { return heads_; }
  const CouplingFlow& flow() const { return flow_; }
  const std::vector<std::string>& platform_ids() const { return platforms_; }
  int content_dim() const { return content_dim_; }

 private:
  Var backbone_input(Tape& tape, Var ctx, const Eigen::VectorXd& engagement) const;
  Eigen::VectorXd store_query(Tape& tape, Var s) const;

  TrainConfig cfg_;
  std::vector<std::string> platforms_;
  int content_dim_ = 0;
  BackboneVariant variant_ = BackboneVariant::kSsmLite;

  FactorEncoder enc_c_, enc_p_, enc_t_;
  ContextFuser fuser_;
  SsmLiteCell ssm_;
  AttnLiteCell attn_;
  TimescaleAdapter fast_ad_, slow_ad_;
  CouplingFlow flow_;
  FilmBank film_;
  GatedMultihead read_;
  PredictionHeads heads_;

  Eigen::MatrixXd target_scale_;   // platforms x 4, default all ones
  Eigen::VectorXd volume_scale_;   // per platform, default ones
};

}  // namespace setcast

#endif  // SETCAST_MODEL_HPP_
