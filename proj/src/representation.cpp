#include "setcast/representation.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

void FactorEncoder::init_params(ParamStore& store, Rng& rng) const {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
  store.add_random(prefix_ + ".w1", hidden_dim_, input_dim_, rng, s1);
  store.add(prefix_ + ".b1", hidden_dim_, 1);
  store.add_random(prefix_ + ".w_mu", latent_dim_, hidden_dim_, rng, s2);
  store.add(prefix_ + ".b_mu", latent_dim_, 1);
  store.add_random(prefix_ + ".w_lv", latent_dim_, hidden_dim_, rng, s2);
  // Start with moderately small posterior variance.
  store.add_constant(prefix_ + ".b_lv", latent_dim_, 1, -2.0);
}

FactorEncoder::Output FactorEncoder::encode(Tape& tape, const Eigen::VectorXd& input,
                                            bool train, Rng& noise) const {
  if (input.size() != input_dim_) {
    throw std::invalid_argument(prefix_ + ": input dimension " +
                                std::to_string(input.size()) + " != configured " +
                                std::to_string(input_dim_));
  }
  Var h = ops::tanh_(ops::linear(tape.constant(input), prefix_ + ".w1", prefix_ + ".b1"));
  Var mu = ops::linear(h, prefix_ + ".w_mu", prefix_ + ".b_mu");
  Var logvar = ops::clamp(ops::linear(h, prefix_ + ".w_lv", prefix_ + ".b_lv"), -10.0, 10.0);
  Var sample = mu;
  if (train) {
    Eigen::VectorXd xi(latent_dim_);
    for (int i = 0; i < latent_dim_; ++i) xi[i] = noise.gaussian();
    Var std = ops::exp_(ops::scale(logvar, 0.5));
    sample = ops::add(mu, ops::cmul(std, tape.constant(xi)));
  }
  return Output{mu, logvar, sample};
}

void ContextFuser::init_params(ParamStore& store, Rng& rng) const {
  const int in = 3 * factor_dim_;
  store.add_random(prefix_ + ".w1", hidden_dim_, in, rng, 1.0 / std::sqrt(double(in)));
  store.add(prefix_ + ".b1", hidden_dim_, 1);
  store.add_random(prefix_ + ".w2", ctx_dim_, hidden_dim_, rng,
                   1.0 / std::sqrt(double(hidden_dim_)));
  store.add(prefix_ + ".b2", ctx_dim_, 1);
}

Var ContextFuser::fuse(Tape& tape, Var z_c, Var z_p, Var z_t, double eps) const {
  if (z_c.dim() != factor_dim_ || z_p.dim() != factor_dim_ || z_t.dim() != factor_dim_) {
    throw std::invalid_argument(prefix_ + ": factor dimensions do not match configuration");
  }
  Var cat = ops::concat({z_c, z_p, z_t});
  Var h = ops::tanh_(ops::linear(cat, prefix_ + ".w1", prefix_ + ".b1"));
  Var ctx = ops::linear(h, prefix_ + ".w2", prefix_ + ".b2");
  return ops::unit_project(ctx, eps);
}

Var disentanglement_loss(Tape& tape, const std::vector<PosteriorTriple>& batch,
                         double beta, double lambda_dis) {
  if (beta < 0.0 || lambda_dis < 0.0) {
    throw std::invalid_argument("disentanglement_loss: coefficients must be >= 0");
  }
  if (batch.empty()) {
    throw std::invalid_argument("disentanglement_loss: empty batch");
  }
  Var kl = tape.constant_scalar(0.0);
  for (const PosteriorTriple& p : batch) {
    Var instance = ops::add(ops::add(ops::kl_std_normal(p.mu_c, p.lv_c),
                                     ops::kl_std_normal(p.mu_p, p.lv_p)),
                            ops::kl_std_normal(p.mu_t, p.lv_t));
    kl = ops::add(kl, instance);
  }
  kl = ops::scale(kl, 1.0 / static_cast<double>(batch.size()));

  Var loss = ops::scale(kl, beta);
  if (lambda_dis > 0.0 && batch.size() >= 2) {
    std::vector<Var> samples, mus, lvs;
    samples.reserve(batch.size());
    for (const PosteriorTriple& p : batch) {
      samples.push_back(p.sample_concat);
      mus.push_back(ops::concat({p.mu_c, p.mu_p, p.mu_t}));
      lvs.push_back(ops::concat({p.lv_c, p.lv_p, p.lv_t}));
    }
    Var tc = ops::total_correlation(samples, mus, lvs);
    loss = ops::add(loss, ops::scale(tc, lambda_dis));
  }
  return loss;
}

double total_correlation_kde(const Eigen::MatrixXd& batch) {
  const Eigen::Index b = batch.rows();
  const Eigen::Index d = batch.cols();
  if (b < 2) throw std::invalid_argument("total_correlation_kde: batch size must be >= 2");

  // Silverman-style bandwidth per dimension.
  Eigen::VectorXd logvar(d);
  const double factor = std::pow(4.0 / ((d + 2.0) * b), 2.0 / (d + 4.0));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = batch.col(j).mean();
    double var = (batch.col(j).array() - mean).square().sum() / (b - 1);
    var = std::max(var, 1e-12);
    logvar[j] = std::log(var * factor);
  }

  ParamStore store;
  Tape tape(&store);
  std::vector<Var> samples, mus, lvs;
  Var lv = tape.constant(logvar);
  for (Eigen::Index i = 0; i < b; ++i) {
    Var s = tape.constant(batch.row(i).transpose());
    samples.push_back(s);
    mus.push_back(s);
    lvs.push_back(lv);
  }
  return ops::total_correlation(samples, mus, lvs).scalar();
}

}  // namespace setcast
