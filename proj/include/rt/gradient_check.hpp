#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace rt {

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps per coordinate.
template <typename Loss>
Eigen::VectorXd numerical_gradient(Loss&& loss, Eigen::VectorXd x, double eps) {
  Eigen::VectorXd grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = loss(x);
    x[i] = saved - eps;
    const double down = loss(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)
inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

/// Compares an analytic gradient of a scalar loss against central
/// differences and returns the worst relative error. Run in double.
template <typename Loss>
double gradient_check(Loss&& loss, const Eigen::VectorXd& x, const Eigen::VectorXd& analytic,
                      double eps = 1e-5) {
  return max_relative_error(analytic, numerical_gradient(loss, x, eps));
}

}  // namespace rt
