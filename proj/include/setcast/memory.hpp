#ifndef SETCAST_MEMORY_HPP_
#define SETCAST_MEMORY_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "setcast/rng.hpp"
#include "setcast/tape.hpp"

namespace setcast {

// Fixed-capacity key-value store of exchange episodes. Slots are filled
// first-free, then least-recently-read. Reads are by attention over the
// occupied rows only.
class EpisodicBank {
 public:
  EpisodicBank() = default;
  EpisodicBank(int capacity, int dim)
      : keys_(Eigen::MatrixXd::Zero(capacity, dim)),
        values_(Eigen::MatrixXd::Zero(capacity, dim)),
        usage_(capacity, 0),
        occupied_(capacity, false) {}

  int capacity() const { return static_cast<int>(occupied_.size()); }
  int dim() const { return static_cast<int>(keys_.cols()); }
  int occupied_count() const;
  bool empty() const { return occupied_count() == 0; }

  // Compacted views over occupied slots, plus the slot index per row.
  Eigen::MatrixXd occupied_keys(std::vector<int>* slot_of_row = nullptr) const;
  Eigen::MatrixXd occupied_values() const;

  void touch(int slot, long step) { usage_[slot] = step; }
  int pick_write_slot() const;  // first free, else least-recently-read

  // Gated interpolation write; no-op when g_write <= 0.5. Fresh slots take the
  // candidate outright.
  void write(const Eigen::VectorXd& key_candidate, const Eigen::VectorXd& value_candidate,
             double g_write, long step);

  const Eigen::MatrixXd& keys() const { return keys_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<long>& usage() const { return usage_; }
  const std::vector<bool>& occupied() const { return occupied_; }
  void restore(Eigen::MatrixXd keys, Eigen::MatrixXd values, std::vector<long> usage,
               std::vector<bool> occupied);

 private:
  Eigen::MatrixXd keys_;
  Eigen::MatrixXd values_;
  std::vector<long> usage_;
  std::vector<bool> occupied_;
};

// Reservoir-sampled buffer: after `seen` pushes every record ever pushed has
// equal probability capacity/seen of being retained.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

  void push(const T& record, Rng& rng) {
    ++seen_;
    if (records_.size() < capacity_) {
      records_.push_back(record);
    } else {
      std::uint64_t j = rng.uniform_int(seen_);
      if (j < capacity_) records_[static_cast<std::size_t>(j)] = record;
    }
  }

  // min(k, size) records uniformly without replacement.
  std::vector<T> sample(std::size_t k, Rng& rng) const {
    const std::size_t n = records_.size();
    k = std::min(k, n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<T> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
      std::swap(idx[i], idx[j]);
      out.push_back(records_[idx[i]]);
    }
    return out;
  }

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t seen() const { return seen_; }
  const std::vector<T>& records() const { return records_; }
  void restore(std::vector<T> records, std::uint64_t seen) {
    records_ = std::move(records);
    seen_ = seen;
  }

 private:
  std::size_t capacity_;
  std::vector<T> records_;
  std::uint64_t seen_ = 0;
};

// Windowed engagement pooling at one timescale: EMA over per-bin feature
// vectors followed by a learned projection. The projection parameters carry
// the fast/slow group tag so the optimizer can apply per-group step sizes.
class TimescaleAdapter {
 public:
  TimescaleAdapter() = default;
  TimescaleAdapter(std::string prefix, ParamGroup group, int window_bins, double ema_decay,
                   int feature_dim, int memory_dim)
      : prefix_(std::move(prefix)),
        group_(group),
        window_bins_(window_bins),
        ema_decay_(ema_decay),
        feature_dim_(feature_dim),
        memory_dim_(memory_dim) {}

  void init_params(ParamStore& store, Rng& rng) const;

  // First element seeds the average, so a single bin passes through exactly;
  // an empty window pools to the zero vector.
  Eigen::VectorXd ema_pool(const std::vector<Eigen::VectorXd>& window_feats) const;
  Var project(Tape& tape, const Eigen::VectorXd& pooled) const;
  Var features(Tape& tape, const std::vector<Eigen::VectorXd>& window_feats) const {
    return project(tape, ema_pool(window_feats));
  }

  int window_bins() const { return window_bins_; }
  double ema_decay() const { return ema_decay_; }

 private:
  std::string prefix_;
  ParamGroup group_ = ParamGroup::kDefault;
  int window_bins_ = 48;
  double ema_decay_ = 0.8;
  int feature_dim_ = 4;
  int memory_dim_ = 32;
};

struct MemoryFusion {
  Var fused;  // M = alpha * m_f + (1 - alpha) * m_s
  Var alpha;  // scalar in (0, 1)
};
// alpha = sigmoid(W_alpha [z_c; z_t] + b_alpha).
MemoryFusion fuse_memory(Tape& tape, Var m_f, Var m_s, Var z_c, Var z_t,
                         const std::string& prefix);
void init_fuse_memory_params(ParamStore& store, Rng& rng, const std::string& prefix,
                             int factor_dim);

// g_write = sigmoid(W_g [z; M; e] + b_g), scalar in (0, 1).
Var write_gate(Tape& tape, Var z, Var fused_memory, const Eigen::VectorXd& engagement,
               const std::string& prefix);
void init_write_gate_params(ParamStore& store, Rng& rng, const std::string& prefix,
                            int ctx_dim, int memory_dim, int engagement_dim);

// Candidate key/value maps psi_key(s), psi_val(s) for episodic writes.
void init_episodic_write_params(ParamStore& store, Rng& rng, const std::string& prefix,
                                int state_dim, int memory_dim);
Eigen::VectorXd episodic_key_candidate(const ParamStore& store, const std::string& prefix,
                                       const Eigen::VectorXd& state);
Eigen::VectorXd episodic_value_candidate(const ParamStore& store, const std::string& prefix,
                                         const Eigen::VectorXd& state);

}  // namespace setcast

#endif  // SETCAST_MEMORY_HPP_
