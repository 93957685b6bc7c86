#include "setcast/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

void LossWeights::validate() const {
  if (beta < 0.0 || lambda_dis < 0.0 || lambda1 < 0.0 || lambda2 < 0.0) {
    throw std::invalid_argument("LossWeights: all weights must be >= 0");
  }
  if (!(mape_eps > 0.0)) {
    throw std::invalid_argument("LossWeights: mape_eps must be > 0");
  }
}

void PredictionHeads::init_params(ParamStore& store, Rng& rng) const {
  const int in = belief_dim_ + memory_dim_ + factor_dim_;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
  for (const char* head : {"last", "avg", "vol"}) {
    const std::string p = prefix_ + "." + head;
    store.add_random(p + ".w1", hidden_dim_, in, rng, s1);
    store.add(p + ".b1", hidden_dim_, 1);
    store.add_random(p + ".w2", 1, hidden_dim_, rng, s2);
    store.add(p + ".b2", 1, 1);
  }
  // omega = 0 starts the ensemble at the midpoint w = 0.5.
  store.add(prefix_ + ".omega", 1, 1);
}

Var PredictionHeads::head_forward(Tape& tape, const std::string& head, Var input) const {
  const std::string p = prefix_ + "." + head;
  Var h = ops::tanh_(ops::linear(input, p + ".w1", p + ".b1"));
  return ops::softplus(ops::linear(h, p + ".w2", p + ".b2"));
}

PredictionHeads::Engagement PredictionHeads::predict_engagement(
    Tape& tape, const std::vector<Var>& h_levels, Var m_f, Var m_s, Var z_c) const {
  if (h_levels.size() != 4) {
    throw std::invalid_argument(prefix_ + ": expected one modulated belief per level");
  }
  Var w = ops::sigmoid(tape.param(prefix_ + ".omega"));
  Var one_minus = ops::sub(tape.constant_scalar(1.0), w);
  std::vector<Var> levels;
  levels.reserve(4);
  for (int l = 0; l < 4; ++l) {
    Var last = head_forward(tape, "last", ops::concat({h_levels[l], m_f, z_c}));
    Var avg = head_forward(tape, "avg", ops::concat({h_levels[l], m_s, z_c}));
    levels.push_back(ops::add(ops::scale_by(last, w), ops::scale_by(avg, one_minus)));
  }
  return Engagement{ops::concat(levels), w};
}

Var PredictionHeads::predict_volume(Tape& tape, Var h, Var fused_memory, Var z_c) const {
  return head_forward(tape, "vol", ops::concat({h, fused_memory, z_c}));
}

Var total_loss(Tape& tape, Var pred_loss, Var dis_loss, Var replay_loss,
               const LossWeights& weights) {
  weights.validate();
  Var total = pred_loss;
  if (weights.lambda1 > 0.0) {
    total = ops::add(total, ops::scale(dis_loss, weights.lambda1));
  }
  if (replay_loss.valid() && weights.lambda2 > 0.0) {
    total = ops::add(total, ops::scale(replay_loss, weights.lambda2));
  }
  (void)tape;
  return total;
}

}  // namespace setcast
