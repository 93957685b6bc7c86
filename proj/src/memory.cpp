#include "setcast/memory.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

int EpisodicBank::occupied_count() const {
  int n = 0;
  for (bool b : occupied_) n += b ? 1 : 0;
  return n;
}

Eigen::MatrixXd EpisodicBank::occupied_keys(std::vector<int>* slot_of_row) const {
  const int n = occupied_count();
  Eigen::MatrixXd out(n, dim());
  if (slot_of_row != nullptr) slot_of_row->clear();
  int r = 0;
  for (int i = 0; i < capacity(); ++i) {
    if (!occupied_[i]) continue;
    out.row(r++) = keys_.row(i);
    if (slot_of_row != nullptr) slot_of_row->push_back(i);
  }
  return out;
}

Eigen::MatrixXd EpisodicBank::occupied_values() const {
  const int n = occupied_count();
  Eigen::MatrixXd out(n, dim());
  int r = 0;
  for (int i = 0; i < capacity(); ++i) {
    if (occupied_[i]) out.row(r++) = values_.row(i);
  }
  return out;
}

int EpisodicBank::pick_write_slot() const {
  for (int i = 0; i < capacity(); ++i) {
    if (!occupied_[i]) return i;
  }
  int best = 0;
  for (int i = 1; i < capacity(); ++i) {
    if (usage_[i] < usage_[best]) best = i;
  }
  return best;
}

void EpisodicBank::write(const Eigen::VectorXd& key_candidate,
                         const Eigen::VectorXd& value_candidate, double g_write,
                         long step) {
  if (key_candidate.size() != dim() || value_candidate.size() != dim()) {
    throw std::invalid_argument("EpisodicBank::write: candidate dimension mismatch");
  }
  if (g_write <= 0.5) return;
  const int slot = pick_write_slot();
  if (!occupied_[slot]) {
    keys_.row(slot) = key_candidate.transpose();
    values_.row(slot) = value_candidate.transpose();
  } else {
    keys_.row(slot) = (1.0 - g_write) * keys_.row(slot) + g_write * key_candidate.transpose();
    values_.row(slot) =
        (1.0 - g_write) * values_.row(slot) + g_write * value_candidate.transpose();
  }
  occupied_[slot] = true;
  usage_[slot] = step;
}

void EpisodicBank::restore(Eigen::MatrixXd keys, Eigen::MatrixXd values,
                           std::vector<long> usage, std::vector<bool> occupied) {
  if (keys.rows() != values.rows() ||
      static_cast<std::size_t>(keys.rows()) != usage.size() ||
      usage.size() != occupied.size()) {
    throw std::invalid_argument("EpisodicBank::restore: inconsistent sizes");
  }
  keys_ = std::move(keys);
  values_ = std::move(values);
  usage_ = std::move(usage);
  occupied_ = std::move(occupied);
}

void TimescaleAdapter::init_params(ParamStore& store, Rng& rng) const {
  store.add_random(prefix_ + ".w", memory_dim_, feature_dim_, rng,
                   1.0 / std::sqrt(static_cast<double>(feature_dim_)), group_);
  store.add(prefix_ + ".b", memory_dim_, 1, group_);
}

Eigen::VectorXd TimescaleAdapter::ema_pool(
    const std::vector<Eigen::VectorXd>& window_feats) const {
  if (window_feats.empty()) return Eigen::VectorXd::Zero(feature_dim_);
  Eigen::VectorXd ema = window_feats.front();
  if (ema.size() != feature_dim_) {
    throw std::invalid_argument(prefix_ + ": per-bin feature dimension mismatch");
  }
  for (std::size_t i = 1; i < window_feats.size(); ++i) {
    ema = ema_decay_ * ema + (1.0 - ema_decay_) * window_feats[i];
  }
  return ema;
}

Var TimescaleAdapter::project(Tape& tape, const Eigen::VectorXd& pooled) const {
  return ops::tanh_(ops::linear(tape.constant(pooled), prefix_ + ".w", prefix_ + ".b"));
}

void init_fuse_memory_params(ParamStore& store, Rng& rng, const std::string& prefix,
                             int factor_dim) {
  store.add_random(prefix + ".w_alpha", 1, 2 * factor_dim, rng,
                   1.0 / std::sqrt(2.0 * factor_dim));
  store.add(prefix + ".b_alpha", 1, 1);
}

MemoryFusion fuse_memory(Tape& tape, Var m_f, Var m_s, Var z_c, Var z_t,
                         const std::string& prefix) {
  if (m_f.dim() != m_s.dim()) {
    throw std::invalid_argument("fuse_memory: m_f and m_s dimensions differ");
  }
  Var alpha = ops::sigmoid(
      ops::linear(ops::concat({z_c, z_t}), prefix + ".w_alpha", prefix + ".b_alpha"));
  Var one_minus = ops::sub(tape.constant_scalar(1.0), alpha);
  Var fused = ops::add(ops::scale_by(m_f, alpha), ops::scale_by(m_s, one_minus));
  return MemoryFusion{fused, alpha};
}

void init_write_gate_params(ParamStore& store, Rng& rng, const std::string& prefix,
                            int ctx_dim, int memory_dim, int engagement_dim) {
  store.add_random(prefix + ".w_g", 1, ctx_dim + memory_dim + engagement_dim, rng,
                   1.0 / std::sqrt(static_cast<double>(ctx_dim + memory_dim + engagement_dim)));
  store.add(prefix + ".b_g", 1, 1);
}

Var write_gate(Tape& tape, Var z, Var fused_memory, const Eigen::VectorXd& engagement,
               const std::string& prefix) {
  Var cat = ops::concat({z, fused_memory, tape.constant(engagement)});
  return ops::sigmoid(ops::linear(cat, prefix + ".w_g", prefix + ".b_g"));
}

void init_episodic_write_params(ParamStore& store, Rng& rng, const std::string& prefix,
                                int state_dim, int memory_dim) {
  const double s = 1.0 / std::sqrt(static_cast<double>(state_dim));
  store.add_random(prefix + ".w_key", memory_dim, state_dim, rng, s);
  store.add(prefix + ".b_key", memory_dim, 1);
  store.add_random(prefix + ".w_val", memory_dim, state_dim, rng, s);
  store.add(prefix + ".b_val", memory_dim, 1);
}

Eigen::VectorXd episodic_key_candidate(const ParamStore& store, const std::string& prefix,
                                       const Eigen::VectorXd& state) {
  return store.at(prefix + ".w_key").value * state + store.at(prefix + ".b_key").value.col(0);
}

Eigen::VectorXd episodic_value_candidate(const ParamStore& store, const std::string& prefix,
                                         const Eigen::VectorXd& state) {
  return store.at(prefix + ".w_val").value * state + store.at(prefix + ".b_val").value.col(0);
}

}  // namespace setcast
