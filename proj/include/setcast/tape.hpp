#ifndef SETCAST_TAPE_HPP_
#define SETCAST_TAPE_HPP_

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "setcast/param_store.hpp"

namespace setcast {

// Raised when an input is valid by type but numerically unusable
// (e.g. projecting a near-zero vector onto the unit sphere); the caller
// decides the fallback.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  Eigen::Index dim() const;
  const Eigen::VectorXd& value() const;
  double scalar() const;
};

// Reverse-mode tape over vector-valued nodes. All arithmetic is 64-bit.
// A Var of dimension 1 doubles as a scalar.
class Tape {
 public:
  struct Node {
    Eigen::VectorXd value;
    Eigen::VectorXd grad;  // empty until touched during backward
    std::function<void(Tape&, int)> backward;  // nullptr for leaves/constants
  };

  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  ParamStore* store() { return store_; }

  Var constant(const Eigen::VectorXd& v);
  Var constant_scalar(double v);
  // Leaf bound to a vector (n x 1) parameter; backward accumulates into the store.
  Var param(const std::string& name);

  int emit(Eigen::VectorXd value, std::function<void(Tape&, int)> backward);
  Node& node(int i) { return nodes_[i]; }
  const Node& node(int i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  // Adds g into the gradient slot of node i (allocating it if needed).
  void accum(int i, const Eigen::VectorXd& g);
  Eigen::VectorXd& grad(int i);

  // Runs reverse accumulation from a scalar loss. Parameter gradients are
  // accumulated into the bound ParamStore (existing grads are kept, so the
  // caller zeroes them per optimizer step).
  void backward(Var loss);

 private:
  ParamStore* store_;
  std::vector<Node> nodes_;
};

namespace ops {

// ---- elementwise / arithmetic ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);                 // elementwise product
Var scale(Var a, double c);
Var scale_by(Var v, Var s);             // s scalar: s * v
Var add_scalar_mul(Var a, Var b, double ca, double cb);  // ca*a + cb*b
Var tanh_(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
Var exp_(Var x);
Var clamp(Var x, double lo, double hi);  // zero gradient outside [lo, hi]

// ---- shape ----
Var concat(const std::vector<Var>& parts);
Var slice(Var x, Eigen::Index offset, Eigen::Index len);

// ---- reductions ----
Var sum(Var x);
Var mean(Var x);
Var dot(Var a, Var b);

// ---- parametric ----
// y = W x + b with W, b looked up in the tape's ParamStore.
Var linear(Var x, const std::string& w_name, const std::string& b_name);
Var linear_nobias(Var x, const std::string& w_name);

// ---- constants mixed in ----
Var matvec_const(const Eigen::MatrixXd& m, Var x);    // m * x
Var matTvec_const(const Eigen::MatrixXd& m, Var w);   // m^T * w

// ---- normalization / attention ----
Var softmax(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-8);
// Projects onto the unit sphere; throws DegenerateInputError if ||x|| <= eps.
Var unit_project(Var x, double eps = 1e-8);
// weights = softmax(scale * K q), out = weights^T V. K, V are constants
// (memory contents); gradient flows through q only.
struct AttentionResult {
  Var output;
  Eigen::VectorXd weights;
};
AttentionResult dot_attention(Var q, const Eigen::MatrixXd& keys,
                              const Eigen::MatrixXd& values, double scale);

// ---- losses ----
// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar)
Var kl_std_normal(Var mu, Var logvar);
// Mean over masked entries of |yhat_i - y_i| / max(|y_i|, eps).
// Subgradient of |.| at 0 is taken as 0. Throws if no mask bit is set.
Var mape(Var yhat, const Eigen::VectorXd& y, const std::vector<bool>& mask,
         double eps);
// Minibatch total-correlation estimator over B posterior samples:
//   mean_b [ log qhat(z_b) - sum_j log qhat_j(z_b[j]) ]
// where qhat is the uniform Gaussian mixture with components
// N(mu_b', diag(exp(logvar_b'))). Fully differentiable in samples, mus and
// logvars (fused analytic backward).
Var total_correlation(const std::vector<Var>& samples, const std::vector<Var>& mus,
                      const std::vector<Var>& logvars);

}  // namespace ops

}  // namespace setcast

#endif  // SETCAST_TAPE_HPP_
