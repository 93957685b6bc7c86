#include "setcast/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

const char* to_string(BackboneVariant v) {
  return v == BackboneVariant::kSsmLite ? "ssm_lite" : "attn_lite";
}

BackboneVariant backbone_variant_from_string(const std::string& s) {
  if (s == "ssm_lite") return BackboneVariant::kSsmLite;
  if (s == "attn_lite") return BackboneVariant::kAttnLite;
  throw std::invalid_argument("unknown backbone variant: " + s +
                              " (expected ssm_lite or attn_lite)");
}

void SsmLiteCell::init_params(ParamStore& store, Rng& rng) const {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim_));
  // a = 2 puts the retention factors near 0.88.
  store.add_constant(prefix_ + ".a", dim_, 1, 2.0);
  store.add_random(prefix_ + ".w_in", dim_, dim_, rng, s);
  store.add_random(prefix_ + ".w_gate", dim_, dim_, rng, s);
  store.add(prefix_ + ".b_gate", dim_, 1);
}

Var SsmLiteCell::step(Tape& tape, Var z_proj, const Eigen::VectorXd& s_prev) const {
  if (s_prev.size() != dim_ || z_proj.dim() != dim_) {
    throw std::invalid_argument(prefix_ + ": uninitialized or mismatched state");
  }
  Var retain = ops::sigmoid(tape.param(prefix_ + ".a"));
  Var decayed = ops::cmul(retain, tape.constant(s_prev));
  Var gate = ops::sigmoid(ops::linear(z_proj, prefix_ + ".w_gate", prefix_ + ".b_gate"));
  Var update = ops::tanh_(ops::linear_nobias(z_proj, prefix_ + ".w_in"));
  Var keep = ops::sub(tape.constant(Eigen::VectorXd::Ones(dim_)), gate);
  return ops::add(ops::cmul(keep, decayed), ops::cmul(gate, update));
}

void AttnLiteCell::init_params(ParamStore& store, Rng& rng) const {
  (void)rng;
  store.add_constant(prefix_ + ".ln_gain", dim_, 1, 1.0);
  store.add(prefix_ + ".ln_bias", dim_, 1);
}

Var AttnLiteCell::step(Tape& tape, Var z_proj, const std::deque<Eigen::VectorXd>& past) const {
  if (z_proj.dim() != dim_) {
    throw std::invalid_argument(prefix_ + ": projected input dimension mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  const int n_past = static_cast<int>(past.size());
  Var attended{&tape, -1};
  if (n_past == 0) {
    // Window holds only the current element; attention returns it.
    attended = z_proj;
  } else {
    Eigen::MatrixXd window(n_past, dim_);
    for (int i = 0; i < n_past; ++i) window.row(i) = past[i].transpose();
    Var past_scores = ops::scale(ops::matvec_const(window, z_proj), scale);
    Var self_score = ops::scale(ops::dot(z_proj, z_proj), scale);
    Var weights = ops::softmax(ops::concat({past_scores, self_score}));
    Var w_past = ops::slice(weights, 0, n_past);
    Var w_self = ops::slice(weights, n_past, 1);
    attended = ops::add(ops::matTvec_const(window, w_past), ops::scale_by(z_proj, w_self));
  }
  Var res = ops::add(attended, z_proj);
  return ops::layer_norm(res, tape.param(prefix_ + ".ln_gain"), tape.param(prefix_ + ".ln_bias"));
}

void init_episodic_read_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int state_dim, int memory_dim) {
  store.add_random(prefix + ".w_q", memory_dim, state_dim, rng,
                   1.0 / std::sqrt(static_cast<double>(state_dim)));
  store.add(prefix + ".b_q", memory_dim, 1);
}

Var episodic_read(Tape& tape, Var s, EpisodicBank& bank, const std::string& prefix,
                  long step) {
  if (bank.empty()) {
    return tape.constant(Eigen::VectorXd::Zero(bank.dim()));
  }
  std::vector<int> slot_of_row;
  Eigen::MatrixXd keys = bank.occupied_keys(&slot_of_row);
  Eigen::MatrixXd values = bank.occupied_values();
  Var q = ops::linear(s, prefix + ".w_q", prefix + ".b_q");
  auto att = ops::dot_attention(q, keys, values, 1.0 / std::sqrt(double(bank.dim())));
  int best = 0;
  for (int i = 1; i < att.weights.size(); ++i) {
    if (att.weights[i] > att.weights[best]) best = i;
  }
  bank.touch(slot_of_row[best], step);
  return att.output;
}

void init_fuse_belief_params(ParamStore& store, const std::string& prefix, int dim) {
  store.add_constant(prefix + ".gain", dim, 1, 1.0);
  store.add(prefix + ".bias", dim, 1);
}

Var fuse_belief(Tape& tape, Var s, Var r, const std::string& prefix) {
  return ops::layer_norm(ops::add(s, r), tape.param(prefix + ".gain"),
                         tape.param(prefix + ".bias"));
}

CouplingFlow::CouplingFlow(std::string prefix, int dim, int layers)
    : prefix_(std::move(prefix)), dim_(dim), half_(dim / 2), layers_(layers) {
  if (dim % 2 != 0) {
    throw std::invalid_argument(prefix_ + ": coupling flow requires an even dimension, got " +
                                std::to_string(dim));
  }
}

void CouplingFlow::init_params(ParamStore& store) const {
  for (int k = 0; k < layers_; ++k) {
    const std::string layer = prefix_ + ".l" + std::to_string(k);
    store.add(layer + ".w_s", half_, half_);
    store.add(layer + ".b_s", half_, 1);
    store.add(layer + ".w_t", half_, half_);
    store.add(layer + ".b_t", half_, 1);
  }
}

Var CouplingFlow::forward(Tape& tape, Var b) const {
  if (b.dim() != dim_) throw std::invalid_argument(prefix_ + ": flow input dimension mismatch");
  Var x = b;
  for (int k = 0; k < layers_; ++k) {
    const std::string layer = prefix_ + ".l" + std::to_string(k);
    const bool swap = (k % 2 == 1);
    Var cond = swap ? ops::slice(x, half_, half_) : ops::slice(x, 0, half_);
    Var moving = swap ? ops::slice(x, 0, half_) : ops::slice(x, half_, half_);
    Var log_scale = ops::scale(ops::tanh_(ops::linear(cond, layer + ".w_s", layer + ".b_s")), 2.0);
    Var shift = ops::linear(cond, layer + ".w_t", layer + ".b_t");
    Var moved = ops::add(ops::cmul(moving, ops::exp_(log_scale)), shift);
    x = swap ? ops::concat({moved, cond}) : ops::concat({cond, moved});
  }
  return x;
}

Eigen::VectorXd CouplingFlow::forward_value(const ParamStore& store,
                                            const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = b;
  for (int k = 0; k < layers_; ++k) {
    const std::string layer = prefix_ + ".l" + std::to_string(k);
    const bool swap = (k % 2 == 1);
    Eigen::VectorXd cond = swap ? x.tail(half_) : x.head(half_);
    Eigen::VectorXd moving = swap ? x.head(half_) : x.tail(half_);
    Eigen::VectorXd ls =
        2.0 * (store.at(layer + ".w_s").value * cond + store.at(layer + ".b_s").value.col(0))
                  .array()
                  .tanh();
    Eigen::VectorXd sh =
        store.at(layer + ".w_t").value * cond + store.at(layer + ".b_t").value.col(0);
    Eigen::VectorXd moved = (moving.array() * ls.array().exp()).matrix() + sh;
    if (swap) {
      x.head(half_) = moved;
      x.tail(half_) = cond;
    } else {
      x.head(half_) = cond;
      x.tail(half_) = moved;
    }
  }
  return x;
}

Eigen::VectorXd CouplingFlow::inverse(const ParamStore& store,
                                      const Eigen::VectorXd& b_flow) const {
  if (b_flow.size() != dim_) {
    throw std::invalid_argument(prefix_ + ": flow inverse dimension mismatch");
  }
  Eigen::VectorXd x = b_flow;
  for (int k = layers_ - 1; k >= 0; --k) {
    const std::string layer = prefix_ + ".l" + std::to_string(k);
    const bool swap = (k % 2 == 1);
    Eigen::VectorXd cond = swap ? x.tail(half_) : x.head(half_);
    Eigen::VectorXd moved = swap ? x.head(half_) : x.tail(half_);
    Eigen::VectorXd ls =
        2.0 * (store.at(layer + ".w_s").value * cond + store.at(layer + ".b_s").value.col(0))
                  .array()
                  .tanh();
    Eigen::VectorXd sh =
        store.at(layer + ".w_t").value * cond + store.at(layer + ".b_t").value.col(0);
    Eigen::VectorXd moving = ((moved - sh).array() * (-ls.array()).exp()).matrix();
    if (swap) {
      x.head(half_) = moving;
      x.tail(half_) = cond;
    } else {
      x.head(half_) = cond;
      x.tail(half_) = moving;
    }
  }
  return x;
}

double CouplingFlow::log_det(const ParamStore& store, const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = b;
  double total = 0.0;
  for (int k = 0; k < layers_; ++k) {
    const std::string layer = prefix_ + ".l" + std::to_string(k);
    const bool swap = (k % 2 == 1);
    Eigen::VectorXd cond = swap ? x.tail(half_) : x.head(half_);
    Eigen::VectorXd moving = swap ? x.head(half_) : x.tail(half_);
    Eigen::VectorXd ls =
        2.0 * (store.at(layer + ".w_s").value * cond + store.at(layer + ".b_s").value.col(0))
                  .array()
                  .tanh();
    total += ls.sum();
    Eigen::VectorXd sh =
        store.at(layer + ".w_t").value * cond + store.at(layer + ".b_t").value.col(0);
    Eigen::VectorXd moved = (moving.array() * ls.array().exp()).matrix() + sh;
    if (swap) {
      x.head(half_) = moved;
      x.tail(half_) = cond;
    } else {
      x.head(half_) = cond;
      x.tail(half_) = moved;
    }
  }
  return total;
}

void NeighborhoodBuffer::push(const Eigen::VectorXd& v) {
  if (capacity_ <= 0) throw std::invalid_argument("NeighborhoodBuffer: capacity must be > 0");
  if (v.size() != mean_.size()) {
    throw std::invalid_argument("NeighborhoodBuffer: embedding dimension mismatch");
  }
  contents_.push_back(v);
  if (static_cast<int>(contents_.size()) > capacity_) contents_.pop_front();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(mean_.size());
  for (const Eigen::VectorXd& c : contents_) sum += c;
  mean_ = sum / static_cast<double>(contents_.size());
}

void NeighborhoodBuffer::clear() {
  contents_.clear();
  mean_.setZero();
}

Var compare_to_neighborhood(Tape& tape, Var b_flow, const NeighborhoodBuffer& nbhd) {
  if (nbhd.size() == 0) return b_flow;
  return ops::sub(b_flow, tape.constant(nbhd.mean()));
}

}  // namespace setcast
