#include "qrgmm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrgmm/errors.hpp"

namespace qrgmm {
namespace {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest step in [0,1] keeping z + alpha*dz strictly positive, damped.
double step_length(const ArrayXd& z, const ArrayXd& dz) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (dz[i] < 0.0) alpha = std::min(alpha, -z[i] / dz[i]);
  }
  return std::min(1.0, 0.9995 * alpha);
}

FitResult fit_interior_point(const Eigen::Ref<const MatrixXd>& X,
                             const Eigen::Ref<const VectorXd>& y, double tau,
                             const SolverOptions& opts) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();

  VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  ArrayXd r = (y - X * beta).array();

  const double shift =
      0.1 * r.abs().mean() + 1e-3 * std::sqrt(y.array().square().mean()) + 1e-8;
  ArrayXd up = r.max(0.0) + shift;   // u+
  ArrayXd un = (-r).max(0.0) + shift;  // u-
  ArrayXd a = ArrayXd::Constant(n, 1.0 - tau);
  ArrayXd s = ArrayXd::Constant(n, tau);
  // X beta + u+ - u- = y and X'a = (1-tau) X'1 hold exactly from here on;
  // iterations only have to close the complementarity gap.

  FitResult best;
  best.beta = beta;
  best.objective = pinball_objective(tau, X, y, beta);

  MatrixXd M(p, p);
  ArrayXd w(n), rhs_n(n), da(n), dup(n), dun(n), da_c(n), dup_c(n), dun_c(n);
  VectorXd db(p), db_c(p);

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double gap = (up * s).sum() + (un * a).sum();
    const double obj = pinball_objective(tau, X, y, beta);
    if (obj < best.objective) {
      best.beta = beta;
      best.objective = obj;
    }
    if (gap <= opts.tolerance * (1.0 + std::abs(obj))) {
      best.converged = true;
      break;
    }

    w = 1.0 / (up / s + un / a);
    M.noalias() = X.transpose() * w.matrix().asDiagonal() * X;
    Eigen::LDLT<MatrixXd> ldlt(M);

    // Affine (predictor) direction: aim complementarity at zero.
    // Eliminating du+-, da leaves a p x p normal-equation solve.
    rhs_n = w * (-un + up);  // w * (c-/a - c+/s) with c+ = -up*s, c- = -un*a
    db = ldlt.solve((X.transpose() * rhs_n.matrix()).eval());
    da = w * (-(X * db).array() + up - un);
    dup = (-up * s + up * da) / s;
    dun = (-un * a - un * da) / a;

    const double ap_aff = std::min(step_length(up, dup), step_length(un, dun));
    const double ad_aff = std::min(step_length(a, da), step_length(s, -da));
    const double gap_aff = ((up + ap_aff * dup) * (s - ad_aff * da)).sum() +
                           ((un + ap_aff * dun) * (a + ad_aff * da)).sum();
    const double mu = gap / (2.0 * static_cast<double>(n));
    const double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
    const double mu_target = sigma * mu;

    // Corrector: same factorization, recentered and second-order-corrected.
    ArrayXd cp = mu_target - up * s - dup * (-da);
    ArrayXd cn = mu_target - un * a - dun * da;
    rhs_n = w * (cn / a - cp / s);
    db_c = ldlt.solve((X.transpose() * rhs_n.matrix()).eval());
    da_c = w * (-(X * db_c).array() - cp / s + cn / a);
    dup_c = (cp + up * da_c) / s;
    dun_c = (cn - un * da_c) / a;

    const double ap = std::min(step_length(up, dup_c), step_length(un, dun_c));
    const double ad = std::min(step_length(a, da_c), step_length(s, -da_c));

    beta += ap * db_c;
    up += ap * dup_c;
    un += ap * dun_c;
    a += ad * da_c;
    s -= ad * da_c;

    if (ap < 1e-12 && ad < 1e-12) break;  // stalled; report best iterate
  }

  if (!best.converged) {
    const double obj = pinball_objective(tau, X, y, beta);
    if (obj < best.objective) {
      best.beta = beta;
      best.objective = obj;
    }
    const double gap = (up * s).sum() + (un * a).sum();
    best.converged = gap <= opts.tolerance * (1.0 + std::abs(best.objective));
  }
  best.iterations = it;
  return best;
}

FitResult fit_smoothed_newton(const Eigen::Ref<const MatrixXd>& X,
                              const Eigen::Ref<const VectorXd>& y, double tau,
                              const SolverOptions& opts) {
  if (opts.smoothing_epsilon <= 0.0)
    throw InvalidEps("smoothing_epsilon must be positive");
  const Eigen::Index n = X.rows();

  VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);

  const double y_scale = std::sqrt(y.array().square().mean()) + 1.0;
  double eps = std::max(opts.smoothing_epsilon, 0.1 * y_scale);

  auto smoothed_objective = [&](const VectorXd& b, double e) {
    const ArrayXd r = (y - X * b).array();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      total += detail::smoothed_pinball(tau, r[i], e);
    return total;
  };

  int it = 0;
  bool converged = false;
  const double grad_scale =
      1.0 + X.array().abs().colwise().sum().maxCoeff();
  while (it < opts.max_iterations) {
    const ArrayXd r = (y - X * beta).array();
    ArrayXd psi(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      psi[i] = detail::smoothed_pinball_derivative(tau, r[i], eps);
      const double in_band = std::abs(r[i]) <= eps ? 1.0 : 0.0;
      h[i] = in_band * (r[i] >= 0.0 ? tau : 1.0 - tau) / eps;
    }
    VectorXd grad = -(X.transpose() * psi.matrix());

    if (grad.lpNorm<Eigen::Infinity>() <= opts.tolerance * grad_scale) {
      if (eps <= opts.smoothing_epsilon) {
        converged = true;
        break;
      }
      eps = std::max(opts.smoothing_epsilon, 0.5 * eps);
      continue;
    }

    MatrixXd H = X.transpose() * h.matrix().asDiagonal() * X;
    H.diagonal().array() += 1e-8 * (1.0 + H.trace());
    VectorXd step = H.ldlt().solve(-grad);
    if (!step.allFinite() || grad.dot(step) >= 0.0)
      step = -grad / grad_scale;  // fall back to scaled steepest descent
    const double max_step = 1e3 * (1.0 + beta.norm()) + y_scale;
    if (step.norm() > max_step) step *= max_step / step.norm();

    // Backtracking line search on the smoothed objective.
    const double f0 = smoothed_objective(beta, eps);
    const double slope = grad.dot(step);
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls) {
      if (smoothed_objective(beta + t * step, eps) <= f0 + 1e-4 * t * slope)
        break;
      t *= 0.5;
    }
    beta += t * step;
    ++it;
  }

  FitResult result;
  result.beta = beta;
  result.objective = pinball_objective(tau, X, y, beta);
  result.iterations = it;
  result.converged = converged;
  return result;
}

}  // namespace

namespace detail {

FitResult fit_prechecked(const Eigen::Ref<const MatrixXd>& X,
                         const Eigen::Ref<const VectorXd>& y, double tau,
                         const SolverOptions& opts) {
  check_tau(tau);
  if (!(opts.tolerance > 0.0))
    throw InvalidArgument("solver tolerance must be positive");
  if (opts.max_iterations < 1)
    throw InvalidArgument("max_iterations must be at least 1");
  if (opts.method == SolveMethod::smoothed_newton)
    return fit_smoothed_newton(X, y, tau, opts);
  return fit_interior_point(X, y, tau, opts);
}

}  // namespace detail

FitResult fit(const Dataset& data, double tau, const SolverOptions& opts) {
  const MatrixXd& X = data.design;
  const VectorXd y = data.y();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw RankDeficient("design matrix has column rank " +
                        std::to_string(qr.rank()) + " < " +
                        std::to_string(X.cols()));
  return detail::fit_prechecked(X, y, tau, opts);
}

double subgradient_certificate(double tau,
                               const Eigen::Ref<const MatrixXd>& X,
                               const Eigen::Ref<const VectorXd>& y,
                               const Eigen::Ref<const VectorXd>& beta,
                               double zero_tol) {
  detail::check_tau(tau);
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const VectorXd r = y - X * beta;
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double scale = 1.0 + X.col(k).array().abs().sum();
    for (const double dir : {1.0, -1.0}) {
      // Moving beta_k by +dir changes residual i at rate -dir*x_ik.
      double deriv = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double rate = -dir * X(i, k);
        if (std::abs(r[i]) <= zero_tol) {
          // At the kink either sign of movement is charged.
          deriv += rate > 0.0 ? tau * rate : -(1.0 - tau) * rate;
        } else if (r[i] > 0.0) {
          deriv += tau * rate;
        } else {
          deriv += (tau - 1.0) * rate;
        }
      }
      worst = std::min(worst, deriv / scale);
    }
  }
  return worst;
}

}  // namespace qrgmm
