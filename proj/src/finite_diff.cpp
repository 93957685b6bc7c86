#include "setcast/finite_diff.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

std::map<std::string, Eigen::MatrixXd> finite_diff_grad(
    const std::function<double(ParamStore&)>& f, ParamStore& store, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::map<std::string, Eigen::MatrixXd> out;
  for (auto& [name, entry] : store.entries()) {
    Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(entry.value.rows(), entry.value.cols());
    for (Eigen::Index r = 0; r < entry.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < entry.value.cols(); ++c) {
        const double orig = entry.value(r, c);
        entry.value(r, c) = orig + h;
        const double fp = f(store);
        entry.value(r, c) = orig - h;
        const double fm = f(store);
        entry.value(r, c) = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
          throw std::runtime_error("finite_diff_grad: non-finite evaluation at " + name +
                                   "(" + std::to_string(r) + "," + std::to_string(c) + ")");
        }
        fd(r, c) = (fp - fm) / (2.0 * h);
      }
    }
    out[name] = std::move(fd);
  }
  return out;
}

double max_grad_rel_error(const std::function<double(ParamStore&)>& f,
                          ParamStore& store, double h, double floor) {
  auto fd = finite_diff_grad(f, store, h);
  double worst = 0.0;
  for (auto& [name, entry] : store.entries()) {
    const Eigen::MatrixXd& fdm = fd.at(name);
    for (Eigen::Index r = 0; r < entry.grad.rows(); ++r) {
      for (Eigen::Index c = 0; c < entry.grad.cols(); ++c) {
        const double a = entry.grad(r, c);
        const double b = fdm(r, c);
        const double denom = std::max({std::abs(a), std::abs(b), floor});
        worst = std::max(worst, std::abs(a - b) / denom);
      }
    }
  }
  return worst;
}

}  // namespace setcast
