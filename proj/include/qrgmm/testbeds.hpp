#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "qrgmm/dataset.hpp"
#include "qrgmm/rng.hpp"

namespace qrgmm {

// Standard normal inverse CDF, absolute accuracy well under 1e-9
// (rational initial guess refined by one Halley step on erfc).
double normal_quantile(double tau);
double normal_cdf(double x);

// Laplace(0,1) inverse CDF: ln(2 tau) below the median, -ln(2(1-tau)) above.
double laplace_quantile(double tau);
double laplace_cdf(double x);

// Conditional quantile of test problem 1 at design vector x = (1, x1, x2, x3):
// mu(x) + sigma(x) z_tau with mu = 5 + x1 + 2 x2 + 0.5 x3 and
// sigma = 1 + 0.1 x1 + 0.2 x2 + 0.05 x3 (normal conditional law).
double tp1_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double tau);

// The same quantile as a linear form: tp1_quantile(x, tau) = tp1_beta(tau).x.
Eigen::Vector4d tp1_beta(double tau);

// Conditional quantile of test problem 2 at design vector x = (1, x1, x2):
// l(x) + s(x) zeta_tau with l = 0.05 x1 x2, s = 5 sin^2(x1 + x2) + 5
// (Laplace conditional law).
double tp2_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double tau);

// Conditional quantiles of the bivariate problem on raw covariates
// x = (x1, x2): stage 1 is Y1|x ~ N(x1, 1); stage 2 is
// Y2|x,y1 ~ N(0.5 y1 + x2, 1). Stage 2 needs its conditioner y1.
double bivariate_quantile(const Eigen::Ref<const Eigen::VectorXd>& x,
                          double tau, int stage,
                          std::optional<double> y1 = std::nullopt);

// A synthetic problem: raw covariate sampler over the fixed domain
// (x1 ~ U(0,10), x2 ~ U(-5,5), x3 ~ U(0,5), independent), plus the exact
// conditional quantile and CDF given the raw covariates.
struct TestProblem {
  std::string name;
  int dim = 0;  // raw covariates per row
  std::function<void(SeededRng&, double*)> sample_covariates;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&, double)>
      quantile;  // (raw x, tau)
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&, double)>
      cdf;  // (raw x, y)
};

TestProblem make_tp1();
TestProblem make_tp2();
TestProblem test_problem_by_name(const std::string& name);  // "tp1" | "tp2"

// n rows: per row, the covariates are drawn first (one uniform each), then
// one uniform feeds the inverse-CDF response. Design holds raw covariates.
Dataset sample_dataset(const TestProblem& problem, Eigen::Index n,
                       SeededRng& rng);

// Bivariate training data: design (x1, x2), responses (y1, y2) built by the
// stage quantiles. Per row: x1, x2, u1, u2.
Dataset sample_bivariate_dataset(Eigen::Index n, SeededRng& rng);

// K oracle draws of (Y1, Y2) at fixed raw x, two uniforms per row.
Eigen::MatrixXd sample_bivariate_conditional(
    const Eigen::Ref<const Eigen::VectorXd>& x, int K, SeededRng& rng);

}  // namespace qrgmm
