#include "qrgmm/testbeds.hpp"

#include <cmath>

#include "qrgmm/errors.hpp"
#include "qrgmm/pinball.hpp"

namespace qrgmm {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

// Rational approximation for the normal inverse CDF (relative error about
// 1e-9), used as the starting point for one Halley correction below.
double inverse_normal_estimate(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double tau) {
  detail::check_tau(tau);
  double x = inverse_normal_estimate(tau);
  // Halley step: e is the CDF residual, u its Newton ratio.
  const double e = normal_cdf(x) - tau;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double laplace_quantile(double tau) {
  detail::check_tau(tau);
  return tau < 0.5 ? std::log(2.0 * tau) : -std::log(2.0 * (1.0 - tau));
}

double laplace_cdf(double x) {
  return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
}

Eigen::Vector4d tp1_beta(double tau) {
  const double z = normal_quantile(tau);
  return {5.0 + z, 1.0 + 0.1 * z, 2.0 + 0.2 * z, 0.5 + 0.05 * z};
}

double tp1_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double tau) {
  if (x.size() != 4)
    throw DimensionMismatch("tp1 takes the design vector (1, x1, x2, x3)");
  return tp1_beta(tau).dot(x);
}

double tp2_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double tau) {
  if (x.size() != 3)
    throw DimensionMismatch("tp2 takes the design vector (1, x1, x2)");
  const double x1 = x[1], x2 = x[2];
  const double location = 0.05 * x1 * x2;
  const double s = std::sin(x1 + x2);
  const double scale = 5.0 * s * s + 5.0;
  return location + scale * laplace_quantile(tau);
}

double bivariate_quantile(const Eigen::Ref<const Eigen::VectorXd>& x,
                          double tau, int stage, std::optional<double> y1) {
  if (x.size() != 2)
    throw DimensionMismatch("bivariate problem takes raw covariates (x1, x2)");
  if (stage == 1) return x[0] + normal_quantile(tau);
  if (stage == 2) {
    if (!y1)
      throw MissingConditioner("stage 2 conditions on y1, which was not given");
    return 0.5 * *y1 + x[1] + normal_quantile(tau);
  }
  throw InvalidArgument("stage must be 1 or 2");
}

TestProblem make_tp1() {
  TestProblem p;
  p.name = "tp1";
  p.dim = 3;
  p.sample_covariates = [](SeededRng& rng, double* out) {
    out[0] = 10.0 * rng.next_uniform();
    out[1] = 10.0 * rng.next_uniform() - 5.0;
    out[2] = 5.0 * rng.next_uniform();
  };
  p.quantile = [](const Eigen::Ref<const Eigen::VectorXd>& x, double tau) {
    return tp1_quantile(Eigen::Vector4d(1.0, x[0], x[1], x[2]), tau);
  };
  p.cdf = [](const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    const double mu = 5.0 + x[0] + 2.0 * x[1] + 0.5 * x[2];
    const double sigma = 1.0 + 0.1 * x[0] + 0.2 * x[1] + 0.05 * x[2];
    return normal_cdf((y - mu) / sigma);
  };
  return p;
}

TestProblem make_tp2() {
  TestProblem p;
  p.name = "tp2";
  p.dim = 2;
  p.sample_covariates = [](SeededRng& rng, double* out) {
    out[0] = 10.0 * rng.next_uniform();
    out[1] = 10.0 * rng.next_uniform() - 5.0;
  };
  p.quantile = [](const Eigen::Ref<const Eigen::VectorXd>& x, double tau) {
    return tp2_quantile(Eigen::Vector3d(1.0, x[0], x[1]), tau);
  };
  p.cdf = [](const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    const double location = 0.05 * x[0] * x[1];
    const double s = std::sin(x[0] + x[1]);
    const double scale = 5.0 * s * s + 5.0;
    return laplace_cdf((y - location) / scale);
  };
  return p;
}

TestProblem test_problem_by_name(const std::string& name) {
  if (name == "tp1") return make_tp1();
  if (name == "tp2") return make_tp2();
  throw InvalidArgument("unknown test problem: " + name);
}

Dataset sample_dataset(const TestProblem& problem, Eigen::Index n,
                       SeededRng& rng) {
  if (n < 1) throw InvalidArgument("sample_dataset needs n >= 1");
  Eigen::MatrixXd design(n, problem.dim);
  Eigen::VectorXd response(n);
  Eigen::VectorXd row(problem.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    problem.sample_covariates(rng, row.data());
    design.row(i) = row.transpose();
    response[i] = problem.quantile(row, rng.next_uniform());
  }
  return validate_dataset(std::move(design), std::move(response));
}

Dataset sample_bivariate_dataset(Eigen::Index n, SeededRng& rng) {
  if (n < 1) throw InvalidArgument("sample_bivariate_dataset needs n >= 1");
  Eigen::MatrixXd design(n, 2);
  Eigen::MatrixXd response(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 10.0 * rng.next_uniform();
    design(i, 1) = 10.0 * rng.next_uniform() - 5.0;
    const Eigen::Vector2d x = design.row(i).transpose();
    const double y1 = bivariate_quantile(x, rng.next_uniform(), 1);
    const double y2 = bivariate_quantile(x, rng.next_uniform(), 2, y1);
    response(i, 0) = y1;
    response(i, 1) = y2;
  }
  return validate_dataset(std::move(design), std::move(response));
}

Eigen::MatrixXd sample_bivariate_conditional(
    const Eigen::Ref<const Eigen::VectorXd>& x, int K, SeededRng& rng) {
  if (K < 1) throw InvalidArgument("need K >= 1");
  Eigen::MatrixXd out(K, 2);
  for (int k = 0; k < K; ++k) {
    const double y1 = bivariate_quantile(x, rng.next_uniform(), 1);
    const double y2 = bivariate_quantile(x, rng.next_uniform(), 2, y1);
    out(k, 0) = y1;
    out(k, 1) = y2;
  }
  return out;
}

}  // namespace qrgmm
