#ifndef SETCAST_BASELINES_HPP_
#define SETCAST_BASELINES_HPP_

#include <Eigen/Dense>

namespace setcast {

// Horizon-aggregated forecasts from one per-bin series (the input window).
// All return a nonnegative total over the next `horizon` bins.

// Window mean rate times horizon.
double histavg_forecast(const Eigen::VectorXd& window, long horizon);

// Sum over the trailing min(horizon, window) bins, rescaled to the horizon.
double persistence_forecast(const Eigen::VectorXd& window, long horizon);

// Least-squares AR(order) fit on the window, iterated forward and summed.
// Falls back to the window mean when the design matrix is rank-deficient or
// the window is too short.
double ar_forecast(const Eigen::VectorXd& window, long horizon, int order = 8);

}  // namespace setcast

#endif  // SETCAST_BASELINES_HPP_
