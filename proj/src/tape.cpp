#include "setcast/tape.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace setcast {

Eigen::Index Var::dim() const { return tape->node(idx).value.size(); }
const Eigen::VectorXd& Var::value() const { return tape->node(idx).value; }
double Var::scalar() const {
  const Eigen::VectorXd& v = value();
  if (v.size() != 1) throw std::invalid_argument("Var::scalar: dimension != 1");
  return v[0];
}

Var Tape::constant(const Eigen::VectorXd& v) {
  return Var{this, emit(v, nullptr)};
}

Var Tape::constant_scalar(double v) {
  Eigen::VectorXd x(1);
  x[0] = v;
  return Var{this, emit(x, nullptr)};
}

Var Tape::param(const std::string& name) {
  if (store_ == nullptr) throw std::invalid_argument("Tape::param: no ParamStore bound");
  const Eigen::MatrixXd& m = store_->value(name);
  if (m.cols() != 1) {
    throw std::invalid_argument("Tape::param: " + name + " is not a vector parameter");
  }
  ParamStore* store = store_;
  int i = emit(m.col(0), [store, name](Tape& t, int self) {
    store->grad(name).col(0) += t.grad(self);
  });
  return Var{this, i};
}

int Tape::emit(Eigen::VectorXd value, std::function<void(Tape&, int)> backward) {
  if (!value.allFinite()) {
    throw std::runtime_error("Tape: non-finite value produced at node " +
                             std::to_string(nodes_.size()));
  }
  nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accum(int i, const Eigen::VectorXd& g) {
  Eigen::VectorXd& slot = nodes_[i].grad;
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

Eigen::VectorXd& Tape::grad(int i) {
  Eigen::VectorXd& slot = nodes_[i].grad;
  if (slot.size() == 0) slot = Eigen::VectorXd::Zero(nodes_[i].value.size());
  return slot;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("Tape::backward: foreign Var");
  if (loss.dim() != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
  Eigen::VectorXd one(1);
  one[0] = 1.0;
  accum(loss.idx, one);
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

namespace ops {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("ops: Vars from different tapes");
  return *a.tape;
}

void check_same_dim(Var a, Var b, const char* op) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << op << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
    throw std::invalid_argument(os.str());
  }
}

Var unary(Var x, Eigen::VectorXd value, Eigen::VectorXd dvalue) {
  Tape& t = *x.tape;
  int xi = x.idx;
  int i = t.emit(std::move(value), [xi, d = std::move(dvalue)](Tape& t, int self) {
    t.accum(xi, (d.array() * t.grad(self).array()).matrix());
  });
  return Var{&t, i};
}

double stable_softplus(double v) {
  return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

double clamped_sigmoid(double v) {
  double s = 1.0 / (1.0 + std::exp(-v));
  const double hi = std::nextafter(1.0, 0.0);
  const double lo = std::numeric_limits<double>::min();
  return std::min(std::max(s, lo), hi);
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_dim(a, b, "add");
  int ai = a.idx, bi = b.idx;
  int i = t.emit(a.value() + b.value(), [ai, bi](Tape& t, int self) {
    t.accum(ai, t.grad(self));
    t.accum(bi, t.grad(self));
  });
  return Var{&t, i};
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_dim(a, b, "sub");
  int ai = a.idx, bi = b.idx;
  int i = t.emit(a.value() - b.value(), [ai, bi](Tape& t, int self) {
    t.accum(ai, t.grad(self));
    t.accum(bi, -t.grad(self));
  });
  return Var{&t, i};
}

Var cmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_dim(a, b, "cmul");
  int ai = a.idx, bi = b.idx;
  int i = t.emit((a.value().array() * b.value().array()).matrix(),
                 [ai, bi](Tape& t, int self) {
                   const Eigen::VectorXd& g = t.grad(self);
                   t.accum(ai, (t.node(bi).value.array() * g.array()).matrix());
                   t.accum(bi, (t.node(ai).value.array() * g.array()).matrix());
                 });
  return Var{&t, i};
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  int ai = a.idx;
  int i = t.emit(c * a.value(), [ai, c](Tape& t, int self) {
    t.accum(ai, c * t.grad(self));
  });
  return Var{&t, i};
}

Var scale_by(Var v, Var s) {
  Tape& t = same_tape(v, s);
  if (s.dim() != 1) throw std::invalid_argument("scale_by: s must be scalar");
  int vi = v.idx, si = s.idx;
  int i = t.emit(s.scalar() * v.value(), [vi, si](Tape& t, int self) {
    const Eigen::VectorXd& g = t.grad(self);
    t.accum(vi, t.node(si).value[0] * g);
    Eigen::VectorXd gs(1);
    gs[0] = t.node(vi).value.dot(g);
    t.accum(si, gs);
  });
  return Var{&t, i};
}

Var add_scalar_mul(Var a, Var b, double ca, double cb) {
  Tape& t = same_tape(a, b);
  check_same_dim(a, b, "add_scalar_mul");
  int ai = a.idx, bi = b.idx;
  int i = t.emit(ca * a.value() + cb * b.value(), [ai, bi, ca, cb](Tape& t, int self) {
    t.accum(ai, ca * t.grad(self));
    t.accum(bi, cb * t.grad(self));
  });
  return Var{&t, i};
}

Var tanh_(Var x) {
  Eigen::VectorXd y = x.value().array().tanh().matrix();
  Eigen::VectorXd d = (1.0 - y.array().square()).matrix();
  return unary(x, std::move(y), std::move(d));
}

Var sigmoid(Var x) {
  Eigen::VectorXd y = x.value().unaryExpr([](double v) { return clamped_sigmoid(v); });
  Eigen::VectorXd d = (y.array() * (1.0 - y.array())).matrix();
  return unary(x, std::move(y), std::move(d));
}

Var softplus(Var x) {
  Eigen::VectorXd y = x.value().unaryExpr([](double v) { return stable_softplus(v); });
  Eigen::VectorXd d = x.value().unaryExpr([](double v) { return clamped_sigmoid(v); });
  return unary(x, std::move(y), std::move(d));
}

Var exp_(Var x) {
  Eigen::VectorXd y = x.value().array().exp().matrix();
  Eigen::VectorXd d = y;
  return unary(x, std::move(y), std::move(d));
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  Eigen::VectorXd y = x.value().unaryExpr(
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); });
  Eigen::VectorXd d = x.value().unaryExpr(
      [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
  return unary(x, std::move(y), std::move(d));
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  Tape& t = *parts[0].tape;
  Eigen::Index total = 0;
  for (Var p : parts) {
    if (p.tape != &t) throw std::invalid_argument("concat: Vars from different tapes");
    total += p.dim();
  }
  Eigen::VectorXd value(total);
  std::vector<int> idxs;
  std::vector<Eigen::Index> offs, lens;
  Eigen::Index off = 0;
  for (Var p : parts) {
    value.segment(off, p.dim()) = p.value();
    idxs.push_back(p.idx);
    offs.push_back(off);
    lens.push_back(p.dim());
    off += p.dim();
  }
  int i = t.emit(std::move(value), [idxs, offs, lens](Tape& t, int self) {
    const Eigen::VectorXd& g = t.grad(self);
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      t.accum(idxs[k], g.segment(offs[k], lens[k]));
    }
  });
  return Var{&t, i};
}

Var slice(Var x, Eigen::Index offset, Eigen::Index len) {
  if (offset < 0 || len < 0 || offset + len > x.dim()) {
    throw std::invalid_argument("slice: range out of bounds");
  }
  Tape& t = *x.tape;
  int xi = x.idx;
  Eigen::Index n = x.dim();
  int i = t.emit(x.value().segment(offset, len), [xi, offset, len, n](Tape& t, int self) {
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(n);
    gx.segment(offset, len) = t.grad(self);
    t.accum(xi, gx);
  });
  return Var{&t, i};
}

Var sum(Var x) {
  Tape& t = *x.tape;
  int xi = x.idx;
  Eigen::Index n = x.dim();
  Eigen::VectorXd v(1);
  v[0] = x.value().sum();
  int i = t.emit(std::move(v), [xi, n](Tape& t, int self) {
    t.accum(xi, Eigen::VectorXd::Constant(n, t.grad(self)[0]));
  });
  return Var{&t, i};
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.dim())); }

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_dim(a, b, "dot");
  int ai = a.idx, bi = b.idx;
  Eigen::VectorXd v(1);
  v[0] = a.value().dot(b.value());
  int i = t.emit(std::move(v), [ai, bi](Tape& t, int self) {
    double g = t.grad(self)[0];
    t.accum(ai, g * t.node(bi).value);
    t.accum(bi, g * t.node(ai).value);
  });
  return Var{&t, i};
}

Var linear(Var x, const std::string& w_name, const std::string& b_name) {
  Tape& t = *x.tape;
  ParamStore* store = t.store();
  if (store == nullptr) throw std::invalid_argument("linear: no ParamStore bound");
  const Eigen::MatrixXd& w = store->value(w_name);
  const Eigen::MatrixXd& b = store->value(b_name);
  if (w.cols() != x.dim() || b.rows() != w.rows() || b.cols() != 1) {
    std::ostringstream os;
    os << "linear: shape mismatch: W " << w.rows() << "x" << w.cols() << ", b "
       << b.rows() << "x" << b.cols() << ", x " << x.dim();
    throw std::invalid_argument(os.str());
  }
  int xi = x.idx;
  int i = t.emit(w * x.value() + b.col(0),
                 [store, w_name, b_name, xi](Tape& t, int self) {
                   const Eigen::VectorXd& g = t.grad(self);
                   store->grad(w_name).noalias() += g * t.node(xi).value.transpose();
                   store->grad(b_name).col(0) += g;
                   t.accum(xi, store->value(w_name).transpose() * g);
                 });
  return Var{&t, i};
}

Var linear_nobias(Var x, const std::string& w_name) {
  Tape& t = *x.tape;
  ParamStore* store = t.store();
  if (store == nullptr) throw std::invalid_argument("linear_nobias: no ParamStore bound");
  const Eigen::MatrixXd& w = store->value(w_name);
  if (w.cols() != x.dim()) {
    std::ostringstream os;
    os << "linear_nobias: shape mismatch: W " << w.rows() << "x" << w.cols() << ", x "
       << x.dim();
    throw std::invalid_argument(os.str());
  }
  int xi = x.idx;
  int i = t.emit(w * x.value(), [store, w_name, xi](Tape& t, int self) {
    const Eigen::VectorXd& g = t.grad(self);
    store->grad(w_name).noalias() += g * t.node(xi).value.transpose();
    t.accum(xi, store->value(w_name).transpose() * g);
  });
  return Var{&t, i};
}

Var matvec_const(const Eigen::MatrixXd& m, Var x) {
  if (m.cols() != x.dim()) throw std::invalid_argument("matvec_const: shape mismatch");
  Tape& t = *x.tape;
  int xi = x.idx;
  int i = t.emit(m * x.value(), [m, xi](Tape& t, int self) {
    t.accum(xi, m.transpose() * t.grad(self));
  });
  return Var{&t, i};
}

Var matTvec_const(const Eigen::MatrixXd& m, Var w) {
  if (m.rows() != w.dim()) throw std::invalid_argument("matTvec_const: shape mismatch");
  Tape& t = *w.tape;
  int wi = w.idx;
  int i = t.emit(m.transpose() * w.value(), [m, wi](Tape& t, int self) {
    t.accum(wi, m * t.grad(self));
  });
  return Var{&t, i};
}

Var softmax(Var x) {
  if (x.dim() < 1) throw std::invalid_argument("softmax: empty input");
  Eigen::ArrayXd a = x.value().array();
  a -= a.maxCoeff();
  Eigen::ArrayXd e = a.exp();
  Eigen::VectorXd y = (e / e.sum()).matrix();
  Tape& t = *x.tape;
  int xi = x.idx;
  int i = t.emit(y, [xi](Tape& t, int self) {
    const Eigen::VectorXd& y = t.node(self).value;
    const Eigen::VectorXd& g = t.grad(self);
    double yg = y.dot(g);
    t.accum(xi, (y.array() * (g.array() - yg)).matrix());
  });
  return Var{&t, i};
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  if (x.dim() < 2) {
    throw std::invalid_argument("layer_norm: dimension must be >= 2 (variance undefined)");
  }
  check_same_dim(x, gain, "layer_norm");
  check_same_dim(x, bias, "layer_norm");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  Tape& t = same_tape(x, gain);
  const Eigen::VectorXd& xv = x.value();
  const double n = static_cast<double>(xv.size());
  const double mu = xv.mean();
  Eigen::VectorXd centered = xv.array() - mu;
  const double var = centered.squaredNorm() / n;
  const double s = std::sqrt(var + eps);
  Eigen::VectorXd xhat = centered / s;
  Eigen::VectorXd y =
      (gain.value().array() * xhat.array() + bias.value().array()).matrix();
  int xi = x.idx, gi = gain.idx, bi = bias.idx;
  int i = t.emit(std::move(y), [xi, gi, bi, xhat, s, n](Tape& t, int self) {
    const Eigen::VectorXd& g = t.grad(self);
    const Eigen::VectorXd& gain_v = t.node(gi).value;
    Eigen::VectorXd gy = (g.array() * gain_v.array()).matrix();
    const double m1 = gy.mean();
    const double m2 = (gy.array() * xhat.array()).mean();
    Eigen::VectorXd gx = (gy.array() - m1 - xhat.array() * m2) / s;
    t.accum(xi, gx);
    t.accum(gi, (g.array() * xhat.array()).matrix());
    t.accum(bi, g);
  });
  return Var{&t, i};
}

Var unit_project(Var x, double eps) {
  const double norm = x.value().norm();
  if (!(norm > eps)) {
    throw DegenerateInputError("unit_project: input norm " + std::to_string(norm) +
                               " <= eps " + std::to_string(eps));
  }
  Eigen::VectorXd y = x.value() / norm;
  Tape& t = *x.tape;
  int xi = x.idx;
  int i = t.emit(std::move(y), [xi, norm](Tape& t, int self) {
    const Eigen::VectorXd& y = t.node(self).value;
    const Eigen::VectorXd& g = t.grad(self);
    t.accum(xi, (g - y * y.dot(g)) / norm);
  });
  return Var{&t, i};
}

AttentionResult dot_attention(Var q, const Eigen::MatrixXd& keys,
                              const Eigen::MatrixXd& values, double scale) {
  if (keys.rows() < 1) throw std::invalid_argument("dot_attention: need >= 1 key row");
  if (keys.cols() != q.dim()) {
    throw std::invalid_argument("dot_attention: key dim does not match query");
  }
  if (values.rows() != keys.rows()) {
    throw std::invalid_argument("dot_attention: key/value row count mismatch");
  }
  Tape& t = *q.tape;
  Eigen::ArrayXd scores = (scale * (keys * q.value())).array();
  scores -= scores.maxCoeff();
  Eigen::ArrayXd e = scores.exp();
  Eigen::VectorXd w = (e / e.sum()).matrix();
  Eigen::VectorXd out = values.transpose() * w;
  int qi = q.idx;
  int i = t.emit(std::move(out), [qi, keys, values, w, scale](Tape& t, int self) {
    const Eigen::VectorXd& g = t.grad(self);
    Eigen::VectorXd gw = values * g;
    double wg = w.dot(gw);
    Eigen::VectorXd gscores = (w.array() * (gw.array() - wg)).matrix();
    t.accum(qi, scale * keys.transpose() * gscores);
  });
  return AttentionResult{Var{&t, i}, w};
}

Var kl_std_normal(Var mu, Var logvar) {
  Tape& t = same_tape(mu, logvar);
  check_same_dim(mu, logvar, "kl_std_normal");
  const Eigen::ArrayXd m = mu.value().array();
  const Eigen::ArrayXd lv = logvar.value().array();
  Eigen::VectorXd v(1);
  v[0] = 0.5 * (m.square() + lv.exp() - 1.0 - lv).sum();
  int mi = mu.idx, li = logvar.idx;
  int i = t.emit(std::move(v), [mi, li](Tape& t, int self) {
    double g = t.grad(self)[0];
    t.accum(mi, g * t.node(mi).value);
    t.accum(li, (0.5 * g * (t.node(li).value.array().exp() - 1.0)).matrix());
  });
  return Var{&t, i};
}

Var mape(Var yhat, const Eigen::VectorXd& y, const std::vector<bool>& mask,
         double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("mape: eps must be > 0");
  if (static_cast<Eigen::Index>(mask.size()) != y.size() || y.size() != yhat.dim()) {
    throw std::invalid_argument("mape: yhat/y/mask size mismatch");
  }
  int m = 0;
  for (bool b : mask) m += b ? 1 : 0;
  if (m == 0) {
    throw std::invalid_argument("mape: all entries masked out (mean undefined)");
  }
  Tape& t = *yhat.tape;
  double total = 0.0;
  const Eigen::VectorXd& yh = yhat.value();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!mask[i]) continue;
    total += std::abs(yh[i] - y[i]) / std::max(std::abs(y[i]), eps);
  }
  Eigen::VectorXd v(1);
  v[0] = total / m;
  int yi = yhat.idx;
  int node = t.emit(std::move(v), [yi, y, mask, eps, m](Tape& t, int self) {
    double g = t.grad(self)[0];
    const Eigen::VectorXd& yh = t.node(yi).value;
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!mask[i]) continue;
      double diff = yh[i] - y[i];
      double sgn = (diff > 0.0) - (diff < 0.0);  // subgradient 0 at the kink
      gx[i] = g * sgn / (std::max(std::abs(y[i]), eps) * m);
    }
    t.accum(yi, gx);
  });
  return Var{&t, node};
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double logsumexp_row(const Eigen::VectorXd& row) {
  double mx = row.maxCoeff();
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace

Var total_correlation(const std::vector<Var>& samples, const std::vector<Var>& mus,
                      const std::vector<Var>& logvars) {
  const std::size_t B = samples.size();
  if (B < 2) {
    throw std::invalid_argument("total_correlation: batch size must be >= 2");
  }
  if (mus.size() != B || logvars.size() != B) {
    throw std::invalid_argument("total_correlation: samples/mus/logvars size mismatch");
  }
  Tape& t = *samples[0].tape;
  const Eigen::Index d = samples[0].dim();
  for (std::size_t b = 0; b < B; ++b) {
    if (samples[b].dim() != d || mus[b].dim() != d || logvars[b].dim() != d) {
      throw std::invalid_argument("total_correlation: inconsistent dimensions");
    }
  }

  // Per-dimension log-density matrices A_j(b, b') = log N(z_bj | mu_b'j, v_b'j).
  std::vector<Eigen::MatrixXd> a(d, Eigen::MatrixXd(B, B));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t bp = 0; bp < B; ++bp) {
      const double lv = logvars[bp].value()[j];
      const double muj = mus[bp].value()[j];
      const double inv_v = std::exp(-lv);
      for (std::size_t b = 0; b < B; ++b) {
        const double diff = samples[b].value()[j] - muj;
        a[j](b, bp) = -0.5 * (kLog2Pi + lv + diff * diff * inv_v);
      }
    }
  }

  const double logB = std::log(static_cast<double>(B));
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    Eigen::VectorXd joint = Eigen::VectorXd::Zero(B);
    double marg = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      joint += a[j].row(b).transpose();
      marg += logsumexp_row(a[j].row(b).transpose()) - logB;
    }
    total += (logsumexp_row(joint) - logB) - marg;
  }
  Eigen::VectorXd v(1);
  v[0] = total / static_cast<double>(B);

  std::vector<int> zi(B), mi(B), li(B);
  for (std::size_t b = 0; b < B; ++b) {
    zi[b] = samples[b].idx;
    mi[b] = mus[b].idx;
    li[b] = logvars[b].idx;
  }

  int node = t.emit(std::move(v), [zi, mi, li, a, d, B](Tape& t, int self) {
    const double g = t.grad(self)[0];
    const double invB = 1.0 / static_cast<double>(B);
    // Softmax responsibilities over components b' for each evaluation point b.
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(B, B);
    for (Eigen::Index j = 0; j < d; ++j) joint += a[j];
    auto row_softmax = [](const Eigen::MatrixXd& m) {
      Eigen::MatrixXd out(m.rows(), m.cols());
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::ArrayXd row = m.row(r).array();
        row -= row.maxCoeff();
        Eigen::ArrayXd e = row.exp();
        out.row(r) = (e / e.sum()).matrix().transpose();
      }
      return out;
    };
    Eigen::MatrixXd p = row_softmax(joint);
    std::vector<Eigen::VectorXd> gz(B, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> gm(B, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> gl(B, Eigen::VectorXd::Zero(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::MatrixXd qj = row_softmax(a[j]);
      Eigen::MatrixXd w = (p - qj) * invB;  // weight of dA_j(b,b') in dL
      for (std::size_t bp = 0; bp < B; ++bp) {
        const double lv = t.node(li[bp]).value[j];
        const double muj = t.node(mi[bp]).value[j];
        const double inv_v = std::exp(-lv);
        for (std::size_t b = 0; b < B; ++b) {
          const double diff = t.node(zi[b]).value[j] - muj;
          const double wj = w(b, bp);
          if (wj == 0.0) continue;
          gz[b][j] += wj * (-diff * inv_v);
          gm[bp][j] += wj * (diff * inv_v);
          gl[bp][j] += wj * (-0.5) * (1.0 - diff * diff * inv_v);
        }
      }
    }
    for (std::size_t b = 0; b < B; ++b) {
      t.accum(zi[b], g * gz[b]);
      t.accum(mi[b], g * gm[b]);
      t.accum(li[b], g * gl[b]);
    }
  });
  return Var{&t, node};
}

}  // namespace ops

}  // namespace setcast
