#include "setcast/adaptation.hpp"

#include <cmath>
#include <sstream>

namespace setcast {

void FilmBank::init_params(ParamStore& store) const {
  // Modulation parameters learn at the fast rate: they only receive gradient
  // from their own platform's instances, so the effective per-parameter step
  // is far smaller than for shared weights at the same nominal rate.
  for (std::size_t p = 0; p < platforms_.size(); ++p) {
    for (int l = 0; l < kEngagementLevels; ++l) {
      store.add_constant(gamma_name(static_cast<int>(p), l), dim_, 1, 1.0, ParamGroup::kFast);
      store.add(beta_name(static_cast<int>(p), l), dim_, 1, ParamGroup::kFast);
    }
  }
}

int FilmBank::platform_index(const std::string& platform) const {
  for (std::size_t i = 0; i < platforms_.size(); ++i) {
    if (platforms_[i] == platform) return static_cast<int>(i);
  }
  std::ostringstream os;
  os << "unknown platform '" << platform << "'; known platforms:";
  for (const std::string& p : platforms_) os << " " << p;
  throw std::invalid_argument(os.str());
}

std::string FilmBank::gamma_name(int platform, int level) const {
  return prefix_ + ".p" + std::to_string(platform) + ".l" + std::to_string(level) + ".gamma";
}

std::string FilmBank::beta_name(int platform, int level) const {
  return prefix_ + ".p" + std::to_string(platform) + ".l" + std::to_string(level) + ".beta";
}

Var FilmBank::modulate(Tape& tape, Var b_comp, const std::string& platform, int level) const {
  return modulate(tape, b_comp, platform_index(platform), level);
}

Var FilmBank::modulate(Tape& tape, Var b_comp, int platform_idx, int level) const {
  if (level < 0 || level >= kEngagementLevels) {
    throw std::invalid_argument("FilmBank: level out of range: " + std::to_string(level));
  }
  if (platform_idx < 0 || platform_idx >= static_cast<int>(platforms_.size())) {
    throw std::invalid_argument("FilmBank: platform index out of range");
  }
  Var gamma = tape.param(gamma_name(platform_idx, level));
  Var beta = tape.param(beta_name(platform_idx, level));
  return ops::add(ops::cmul(gamma, b_comp), beta);
}

Eigen::MatrixXd FilmBank::extract_exchange_rates(const ParamStore& store) const {
  Eigen::MatrixXd out(platforms_.size(), kEngagementLevels);
  for (std::size_t p = 0; p < platforms_.size(); ++p) {
    for (int l = 0; l < kEngagementLevels; ++l) {
      out(p, l) = store.at(gamma_name(static_cast<int>(p), l)).value.col(0).mean();
    }
  }
  return out;
}

Eigen::MatrixXd FilmBank::extract_beta_means(const ParamStore& store) const {
  Eigen::MatrixXd out(platforms_.size(), kEngagementLevels);
  for (std::size_t p = 0; p < platforms_.size(); ++p) {
    for (int l = 0; l < kEngagementLevels; ++l) {
      out(p, l) = store.at(beta_name(static_cast<int>(p), l)).value.col(0).mean();
    }
  }
  return out;
}

void GatedMultihead::init_params(ParamStore& store, Rng& rng) const {
  const double sq = 1.0 / std::sqrt(static_cast<double>(query_dim_));
  for (int k = 0; k < heads_; ++k) {
    store.add_random(prefix_ + ".h" + std::to_string(k) + ".w_q", memory_dim_, query_dim_,
                     rng, sq);
    store.add(prefix_ + ".h" + std::to_string(k) + ".b_q", memory_dim_, 1);
  }
  store.add_random(prefix_ + ".w_head", heads_, gate_input_dim_, rng,
                   1.0 / std::sqrt(static_cast<double>(gate_input_dim_)));
  // Gate bias at zero puts all gates at 0.5.
  store.add(prefix_ + ".b_head", heads_, 1);
}

GatedMultihead::Output GatedMultihead::attend(Tape& tape, Var q, const Eigen::MatrixXd& keys,
                                              const Eigen::MatrixXd& values, Var h,
                                              const Eigen::VectorXd& platform_onehot) const {
  if (h.dim() + platform_onehot.size() != gate_input_dim_) {
    std::ostringstream os;
    os << prefix_ << ": gate input dimension mismatch (" << h.dim() << " + "
       << platform_onehot.size() << " != " << gate_input_dim_ << ")";
    throw std::invalid_argument(os.str());
  }
  Var gate_in = ops::concat({h, tape.constant(platform_onehot)});
  Var gates = ops::sigmoid(ops::linear(gate_in, prefix_ + ".w_head", prefix_ + ".b_head"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(memory_dim_));
  Var out{&tape, -1};
  for (int k = 0; k < heads_; ++k) {
    const std::string head = prefix_ + ".h" + std::to_string(k);
    Var qk = ops::linear(q, head + ".w_q", head + ".b_q");
    Var head_out = ops::dot_attention(qk, keys, values, scale).output;
    Var gated = ops::scale_by(head_out, ops::slice(gates, k, 1));
    out = (k == 0) ? gated : ops::add(out, gated);
  }
  return Output{out, gates.value()};
}

}  // namespace setcast
