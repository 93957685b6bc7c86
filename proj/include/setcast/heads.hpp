#ifndef SETCAST_HEADS_HPP_
#define SETCAST_HEADS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "setcast/tape.hpp"

namespace setcast {

struct LossWeights {
  double beta = 1.0;        // KL weight inside the disentanglement loss
  double lambda_dis = 0.1;  // total-correlation weight inside the disentanglement loss
  double lambda1 = 0.1;     // disentanglement loss weight in the total
  double lambda2 = 0.1;     // replay loss weight in the total
  double mape_eps = 1.0;    // denominator floor in the count domain

  void validate() const;
};

// Dual-head engagement ensemble plus the post-volume head. Each head is a
// two-layer MLP (tanh hidden, softplus output) applied per engagement level;
// the recency and history heads are mixed by w = sigmoid(omega), one shared
// scalar across levels.
class PredictionHeads {
 public:
  PredictionHeads() = default;
  PredictionHeads(std::string prefix, int belief_dim, int memory_dim, int factor_dim,
                  int hidden_dim = 64)
      : prefix_(std::move(prefix)),
        belief_dim_(belief_dim),
        memory_dim_(memory_dim),
        factor_dim_(factor_dim),
        hidden_dim_(hidden_dim) {}

  void init_params(ParamStore& store, Rng& rng) const;

  struct Engagement {
    Var y_hat;   // 4 nonnegative levels
    Var weight;  // scalar w in (0, 1)
  };
  // h_levels holds the FiLM-modulated belief per engagement level.
  Engagement predict_engagement(Tape& tape, const std::vector<Var>& h_levels, Var m_f,
                                Var m_s, Var z_c) const;
  // n_hat = softplus head on [h; M; z_c].
  Var predict_volume(Tape& tape, Var h, Var fused_memory, Var z_c) const;

 private:
  Var head_forward(Tape& tape, const std::string& head, Var input) const;

  std::string prefix_;
  int belief_dim_ = 48;
  int memory_dim_ = 32;
  int factor_dim_ = 16;
  int hidden_dim_ = 64;
};

// L_pred + lambda1 * L_dis + lambda2 * L_rep. Pass an invalid Var for
// `replay_loss` when the replay buffer was empty at sampling time.
Var total_loss(Tape& tape, Var pred_loss, Var dis_loss, Var replay_loss,
               const LossWeights& weights);

}  // namespace setcast

#endif  // SETCAST_HEADS_HPP_
