#ifndef SETCAST_REPRESENTATION_HPP_
#define SETCAST_REPRESENTATION_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "setcast/rng.hpp"
#include "setcast/tape.hpp"

namespace setcast {

// Two-layer variational encoder: tanh hidden layer, linear (mu, logvar) output.
// logvar is clamped to [-10, 10]. In train mode the sample is a
// reparameterized draw; in eval mode it is the posterior mean.
class FactorEncoder {
 public:
  FactorEncoder() = default;
  FactorEncoder(std::string prefix, int input_dim, int latent_dim, int hidden_dim = 32)
      : prefix_(std::move(prefix)),
        input_dim_(input_dim),
        latent_dim_(latent_dim),
        hidden_dim_(hidden_dim) {}

  void init_params(ParamStore& store, Rng& rng) const;

  struct Output {
    Var mu;
    Var logvar;
    Var sample;
  };
  Output encode(Tape& tape, const Eigen::VectorXd& input, bool train, Rng& noise) const;

  int input_dim() const { return input_dim_; }
  int latent_dim() const { return latent_dim_; }

 private:
  std::string prefix_;
  int input_dim_ = 0;
  int latent_dim_ = 16;
  int hidden_dim_ = 32;
};

// Context fusion: concat(z_c, z_p, z_t) -> tanh hidden -> linear -> unit sphere.
// Throws DegenerateInputError when the pre-projection output collapses.
class ContextFuser {
 public:
  ContextFuser() = default;
  ContextFuser(std::string prefix, int factor_dim, int ctx_dim, int hidden_dim = 64)
      : prefix_(std::move(prefix)),
        factor_dim_(factor_dim),
        ctx_dim_(ctx_dim),
        hidden_dim_(hidden_dim) {}

  void init_params(ParamStore& store, Rng& rng) const;
  Var fuse(Tape& tape, Var z_c, Var z_p, Var z_t, double eps = 1e-8) const;

  int ctx_dim() const { return ctx_dim_; }

 private:
  std::string prefix_;
  int factor_dim_ = 16;
  int ctx_dim_ = 48;
  int hidden_dim_ = 64;
};

// beta * sum of factor KLs (batch mean) + lambda_dis * total correlation of the
// concatenated per-instance samples across the batch.
struct PosteriorTriple {
  Var mu_c, lv_c, mu_p, lv_p, mu_t, lv_t;
  Var sample_concat;  // [z_c; z_p; z_t]
};
Var disentanglement_loss(Tape& tape, const std::vector<PosteriorTriple>& batch,
                         double beta, double lambda_dis);

// Value-only total-correlation estimate from samples alone: a Gaussian kernel
// mixture with Silverman's per-dimension bandwidth stands in for the
// posteriors. Used for analysis and for checking the tape estimator.
double total_correlation_kde(const Eigen::MatrixXd& batch);

}  // namespace setcast

#endif  // SETCAST_REPRESENTATION_HPP_
