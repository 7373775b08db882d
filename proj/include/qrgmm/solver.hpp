#pragma once

#include <Eigen/Dense>

#include "qrgmm/dataset.hpp"
#include "qrgmm/pinball.hpp"

namespace qrgmm {

enum class SolveMethod { interior_point, smoothed_newton };

struct SolverOptions {
  SolveMethod method = SolveMethod::interior_point;
  // interior_point: bound on the duality gap relative to 1 + |objective|.
  // smoothed_newton: gradient sup-norm threshold at the final epsilon.
  double tolerance = 1e-8;
  int max_iterations = 200;
  // smoothed_newton only: target smoothing width reached by continuation
  // (start wide, halve down to this).
  double smoothing_epsilon = 1e-6;
};

struct FitResult {
  Eigen::VectorXd beta;
  double objective = 0.0;  // achieved pinball loss at beta
  int iterations = 0;
  bool converged = false;
};

// Minimize sum_i rho_tau(y_i - beta^T x_i) over beta.
//
// interior_point runs a primal-dual predictor-corrector on the LP
// reformulation (min tau 1'u+ + (1-tau) 1'u- s.t. X beta + u+ - u- = y,
// u+- >= 0) from a feasible start, so the duality gap bounds the objective
// excess directly. smoothed_newton minimizes the Huber-smoothed objective
// with continuation on the smoothing width.
//
// Throws RankDeficient when the design has column rank < p (the optimum is
// then non-unique along a subspace). Hitting max_iterations returns the best
// iterate found with converged=false rather than throwing.
FitResult fit(const Dataset& data, double tau, const SolverOptions& opts = {});

// Smallest one-sided directional derivative of the pinball objective at beta
// over the directions +-e_k, each divided by its natural scale
// 1 + sum_i |x_ik|. Residuals within zero_tol of 0 are treated as sitting
// exactly at the kink (where any movement costs), which is what makes the
// check usable on interior-point output whose residuals are never exactly
// zero. At an optimum this is >= 0 up to roundoff.
double subgradient_certificate(double tau,
                               const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const Eigen::Ref<const Eigen::VectorXd>& beta,
                               double zero_tol);

namespace detail {

// Rank check already done by the caller (fit_grid shares one check across
// all grid levels).
FitResult fit_prechecked(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y, double tau,
                         const SolverOptions& opts);

}  // namespace detail

}  // namespace qrgmm
