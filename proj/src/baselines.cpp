#include "setcast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace setcast {

double histavg_forecast(const Eigen::VectorXd& window, long horizon) {
  if (window.size() == 0) throw std::invalid_argument("empty forecast window");
  return std::max(window.mean(), 0.0) * static_cast<double>(horizon);
}

double persistence_forecast(const Eigen::VectorXd& window, long horizon) {
  if (window.size() == 0) throw std::invalid_argument("empty forecast window");
  long k = std::min<long>(horizon, window.size());
  double recent = window.tail(k).sum();
  return std::max(recent, 0.0) * static_cast<double>(horizon) / static_cast<double>(k);
}

double ar_forecast(const Eigen::VectorXd& window, long horizon, int order) {
  if (window.size() == 0) throw std::invalid_argument("empty forecast window");
  if (order < 1) throw std::invalid_argument("AR order must be positive");
  const long n = window.size();
  const long rows = n - order;
  if (rows < order + 2) return histavg_forecast(window, horizon);

  // Lags only, no intercept: count series carry their mean through the lag
  // coefficients, and an intercept column would be collinear with the lags on
  // trending series.
  Eigen::MatrixXd X(rows, order);
  Eigen::VectorXd y(rows);
  for (long i = 0; i < rows; ++i) {
    for (int j = 0; j < order; ++j) X(i, j) = window[i + order - 1 - j];
    y[i] = window[i + order];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < order) return histavg_forecast(window, horizon);
  Eigen::VectorXd coef = qr.solve(y);

  // Iterate the fitted recursion forward, clamping each step at zero so the
  // aggregate stays a count forecast.
  Eigen::VectorXd lags(order);
  for (int j = 0; j < order; ++j) lags[j] = window[n - 1 - j];
  double total = 0.0;
  double cap = std::max(window.maxCoeff(), 1.0) * 10.0;
  for (long h = 0; h < horizon; ++h) {
    double next = 0.0;
    for (int j = 0; j < order; ++j) next += coef[j] * lags[j];
    if (!std::isfinite(next)) return histavg_forecast(window, horizon);
    next = std::clamp(next, 0.0, cap);
    total += next;
    for (int j = order - 1; j > 0; --j) lags[j] = lags[j - 1];
    lags[0] = next;
  }
  return total;
}

}  // namespace setcast
