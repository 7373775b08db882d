#pragma once

#include <Eigen/Dense>

#include "qrgmm/errors.hpp"

namespace qrgmm {

namespace detail {

// Unchecked kernels, usable inside solver loops and Eigen expressions.
template <typename Scalar>
inline Scalar pinball(Scalar tau, Scalar u) {
  return u > Scalar(0) ? tau * u : (tau - Scalar(1)) * u;
}

// One-sided Huber ramp h_eps(t) for t >= 0: t^2/(2 eps) on [0, eps],
// t - eps/2 beyond. C^1, and h_eps(t) -> t as eps -> 0.
template <typename Scalar>
inline Scalar huber_ramp(Scalar t, Scalar eps) {
  return t <= eps ? t * t / (2 * eps) : t - eps / 2;
}

template <typename Scalar>
inline Scalar huber_ramp_derivative(Scalar t, Scalar eps) {
  return t <= eps ? t / eps : Scalar(1);
}

template <typename Scalar>
inline Scalar smoothed_pinball(Scalar tau, Scalar u, Scalar eps) {
  return u >= Scalar(0) ? tau * huber_ramp(u, eps)
                        : (Scalar(1) - tau) * huber_ramp(-u, eps);
}

// d/du of smoothed_pinball; continuous everywhere, zero at u = 0.
template <typename Scalar>
inline Scalar smoothed_pinball_derivative(Scalar tau, Scalar u, Scalar eps) {
  return u >= Scalar(0) ? tau * huber_ramp_derivative(u, eps)
                        : -(Scalar(1) - tau) * huber_ramp_derivative(-u, eps);
}

template <typename Scalar>
inline void check_tau(Scalar tau) {
  if (!(tau > Scalar(0) && tau < Scalar(1)))
    throw InvalidTau("quantile level must lie in (0,1)");
}

}  // namespace detail

// rho_tau(u) = (tau - 1{u <= 0}) u: tau * u above zero, (1-tau)|u| below.
template <typename Scalar>
Scalar pinball_loss(Scalar tau, Scalar u) {
  detail::check_tau(tau);
  return detail::pinball(tau, u);
}

// Huber-smoothed pinball loss: both branches of rho_tau replaced by the
// one-sided Huber ramp, giving a C^1 objective for gradient training.
// Under-approximates: rho - max(tau, 1-tau) * eps/2 <= smoothed <= rho.
template <typename Scalar>
Scalar smoothed_pinball(Scalar tau, Scalar u, Scalar eps) {
  detail::check_tau(tau);
  if (!(eps > Scalar(0))) throw InvalidEps("smoothing epsilon must be > 0");
  return detail::smoothed_pinball(tau, u, eps);
}

// Total pinball loss of residuals y - X beta at level tau.
inline double pinball_objective(double tau,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::VectorXd>& beta) {
  detail::check_tau(tau);
  const Eigen::VectorXd r = y - X * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += detail::pinball(tau, r[i]);
  return total;
}

}  // namespace qrgmm
