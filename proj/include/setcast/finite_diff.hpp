#ifndef SETCAST_FINITE_DIFF_HPP_
#define SETCAST_FINITE_DIFF_HPP_

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>

#include "setcast/param_store.hpp"

namespace setcast {

// Central finite differences of a pure scalar function of the store:
// (f(theta + h) - f(theta - h)) / (2h) per coordinate. The store is restored
// exactly before returning. Throws if f evaluates non-finite, naming the
// offending parameter coordinate.
std::map<std::string, Eigen::MatrixXd> finite_diff_grad(
    const std::function<double(ParamStore&)>& f, ParamStore& store, double h = 1e-5);

// Convenience for tests: max relative error between analytic gradients
// already in `store` and the finite-difference estimate, over all entries.
// Relative error uses max(|analytic|, |fd|, floor) as the denominator.
double max_grad_rel_error(const std::function<double(ParamStore&)>& f,
                          ParamStore& store, double h = 1e-5, double floor = 1e-6);

}  // namespace setcast

#endif  // SETCAST_FINITE_DIFF_HPP_
