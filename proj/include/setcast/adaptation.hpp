#ifndef SETCAST_ADAPTATION_HPP_
#define SETCAST_ADAPTATION_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "setcast/tape.hpp"

namespace setcast {

inline constexpr int kEngagementLevels = 4;

// Per-platform, per-engagement-level affine modulation. Gamma starts at 1 and
// beta at 0, so a fresh bank is the identity map and the extracted exchange
// rate matrix is exactly 1 everywhere.
class FilmBank {
 public:
  FilmBank() = default;
  FilmBank(std::string prefix, std::vector<std::string> platform_ids, int dim)
      : prefix_(std::move(prefix)), platforms_(std::move(platform_ids)), dim_(dim) {}

  void init_params(ParamStore& store) const;

  int platform_index(const std::string& platform) const;  // throws, listing known ids
  std::string gamma_name(int platform, int level) const;
  std::string beta_name(int platform, int level) const;

  // h = gamma[p, l] .* b_comp + beta[p, l]
  Var modulate(Tape& tape, Var b_comp, const std::string& platform, int level) const;
  Var modulate(Tape& tape, Var b_comp, int platform_idx, int level) const;

  // Entry (p, l) = mean over the feature dimension of gamma[p, l].
  Eigen::MatrixXd extract_exchange_rates(const ParamStore& store) const;
  Eigen::MatrixXd extract_beta_means(const ParamStore& store) const;

  const std::vector<std::string>& platforms() const { return platforms_; }
  int dim() const { return dim_; }

 private:
  std::string prefix_;
  std::vector<std::string> platforms_;
  int dim_ = 48;
};

// Platform-gated multi-head attention: per-head query projections over shared
// keys/values, head outputs mixed by gates sigmoid(W_head [h; platform]).
class GatedMultihead {
 public:
  GatedMultihead() = default;
  GatedMultihead(std::string prefix, int heads, int query_dim, int memory_dim,
                 int gate_input_dim)
      : prefix_(std::move(prefix)),
        heads_(heads),
        query_dim_(query_dim),
        memory_dim_(memory_dim),
        gate_input_dim_(gate_input_dim) {
    if (heads < 1) throw std::invalid_argument(prefix_ + ": need at least one head");
  }

  void init_params(ParamStore& store, Rng& rng) const;

  struct Output {
    Var value;
    Eigen::VectorXd gates;
  };
  Output attend(Tape& tape, Var q, const Eigen::MatrixXd& keys, const Eigen::MatrixXd& values,
                Var h, const Eigen::VectorXd& platform_onehot) const;

  int heads() const { return heads_; }

 private:
  std::string prefix_;
  int heads_ = 4;
  int query_dim_ = 48;
  int memory_dim_ = 32;
  int gate_input_dim_ = 0;
};

}  // namespace setcast

#endif  // SETCAST_ADAPTATION_HPP_
