#ifndef SETCAST_BACKBONE_HPP_
#define SETCAST_BACKBONE_HPP_

#include <Eigen/Dense>
#include <deque>
#include <string>
#include <vector>

#include "setcast/memory.hpp"
#include "setcast/tape.hpp"

namespace setcast {

enum class BackboneVariant { kSsmLite, kAttnLite };
const char* to_string(BackboneVariant v);
BackboneVariant backbone_variant_from_string(const std::string& s);

// Per-sequence recurrent state. Reset to zeros at each sequence start.
struct BackboneState {
  Eigen::VectorXd s;
  long step = 0;
  bool initialized = false;
  // Sliding window of past projected inputs (attn_lite only).
  std::deque<Eigen::VectorXd> input_window;

  static BackboneState fresh(int dim) {
    BackboneState st;
    st.s = Eigen::VectorXd::Zero(dim);
    st.initialized = true;
    return st;
  }
};

// Gated diagonal linear recurrence:
//   s_t = (1 - g) .* (A .* s_prev) + g .* tanh(B z),  g = sigmoid(C z + c0),
// with A = sigmoid(a) elementwise so every retention factor stays in (0, 1).
class SsmLiteCell {
 public:
  SsmLiteCell() = default;
  SsmLiteCell(std::string prefix, int state_dim) : prefix_(std::move(prefix)), dim_(state_dim) {}

  void init_params(ParamStore& store, Rng& rng) const;
  Var step(Tape& tape, Var z_proj, const Eigen::VectorXd& s_prev) const;

 private:
  std::string prefix_;
  int dim_ = 48;
};

// Single-head causal attention of the current projected input over a sliding
// window of past projected inputs, residual added, then layer norm. Past
// window entries are stored activations (constants on the tape).
class AttnLiteCell {
 public:
  AttnLiteCell() = default;
  AttnLiteCell(std::string prefix, int state_dim, int window = 64)
      : prefix_(std::move(prefix)), dim_(state_dim), window_(window) {}

  void init_params(ParamStore& store, Rng& rng) const;
  Var step(Tape& tape, Var z_proj, const std::deque<Eigen::VectorXd>& past) const;
  int window() const { return window_; }

 private:
  std::string prefix_;
  int dim_ = 48;
  int window_ = 64;
};

// r = attention(linear(s), bank) with scale 1/sqrt(d_m); empty bank reads as
// the zero vector. The strongest-attended slot's usage stamp is refreshed.
void init_episodic_read_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int state_dim, int memory_dim);
Var episodic_read(Tape& tape, Var s, EpisodicBank& bank, const std::string& prefix,
                  long step);

// b = LayerNorm(s + r) with learned gain/bias.
void init_fuse_belief_params(ParamStore& store, const std::string& prefix, int dim);
Var fuse_belief(Tape& tape, Var s, Var r, const std::string& prefix);

// Two affine coupling layers with alternating halves. Zero-initialized
// parameters give the identity map; the log-scale is bounded to [-2, 2]
// through tanh so the map is always well-conditioned and exactly invertible.
class CouplingFlow {
 public:
  CouplingFlow() = default;
  CouplingFlow(std::string prefix, int dim, int layers = 2);

  void init_params(ParamStore& store) const;
  Var forward(Tape& tape, Var b) const;
  Eigen::VectorXd forward_value(const ParamStore& store, const Eigen::VectorXd& b) const;
  Eigen::VectorXd inverse(const ParamStore& store, const Eigen::VectorXd& b_flow) const;
  // Log-determinant of the forward Jacobian at b (diagnostic only; not part of
  // any training loss).
  double log_det(const ParamStore& store, const Eigen::VectorXd& b) const;

 private:
  std::string prefix_;
  int dim_ = 48;
  int half_ = 24;
  int layers_ = 2;
};

// Ring buffer of recent flow-space embeddings with a cached mean; the cache is
// recomputed from the contents on every push, so it always equals the exact
// arithmetic mean. An empty buffer reports the zero vector.
class NeighborhoodBuffer {
 public:
  NeighborhoodBuffer() = default;
  NeighborhoodBuffer(int capacity, int dim)
      : capacity_(capacity), mean_(Eigen::VectorXd::Zero(dim)) {}

  void push(const Eigen::VectorXd& v);
  const Eigen::VectorXd& mean() const { return mean_; }
  std::size_t size() const { return contents_.size(); }
  int capacity() const { return capacity_; }
  const std::deque<Eigen::VectorXd>& contents() const { return contents_; }
  void clear();

 private:
  int capacity_ = 336;
  std::deque<Eigen::VectorXd> contents_;
  Eigen::VectorXd mean_;
};

// b_comp = b_flow - neighborhood mean (mean enters as a constant).
Var compare_to_neighborhood(Tape& tape, Var b_flow, const NeighborhoodBuffer& nbhd);

}  // namespace setcast

#endif  // SETCAST_BACKBONE_HPP_
