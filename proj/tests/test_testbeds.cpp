#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qrgmm/errors.hpp"
#include "qrgmm/metrics.hpp"
#include "qrgmm/rng.hpp"
#include "qrgmm/testbeds.hpp"

using namespace qrgmm;

namespace {

Eigen::VectorXd design4(double x1, double x2, double x3) {
  Eigen::VectorXd x(4);
  x << 1.0, x1, x2, x3;
  return x;
}

Eigen::VectorXd design3(double x1, double x2) {
  Eigen::VectorXd x(3);
  x << 1.0, x1, x2;
  return x;
}

Eigen::VectorXd raw2(double x1, double x2) {
  Eigen::VectorXd x(2);
  x << x1, x2;
  return x;
}

}  // namespace

TEST_CASE("normal quantile hits frozen reference points") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(std::abs(normal_quantile(0.975) - 1.9599639845400532) < 1e-9);
  CHECK(std::abs(normal_quantile(0.025) + 1.9599639845400532) < 1e-9);
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidTau);
  CHECK_THROWS_AS(normal_quantile(1.0), InvalidTau);
  CHECK_THROWS_AS(normal_quantile(-0.5), InvalidTau);
}

TEST_CASE("normal quantile is symmetric and inverts the cdf") {
  for (int k = 1; k < 1024; ++k) {
    const double tau = k / 1024.0;
    CHECK(std::abs(normal_quantile(1.0 - tau) + normal_quantile(tau)) < 1e-13);
    CHECK(std::abs(normal_cdf(normal_quantile(tau)) - tau) < 1e-12);
  }
  double prev = normal_quantile(0.001);
  for (int k = 2; k < 1000; ++k) {
    const double q = normal_quantile(k / 1000.0);
    CHECK(q > prev);
    prev = q;
  }
}

TEST_CASE("laplace quantile closed forms and inversion") {
  CHECK(std::abs(laplace_quantile(0.25) + 0.6931471805599453) < 1e-15);
  CHECK(std::abs(laplace_quantile(0.9) - 1.6094379124341003) < 1e-15);
  CHECK(laplace_quantile(0.5) == 0.0);
  CHECK(laplace_cdf(0.0) == 0.5);
  CHECK_THROWS_AS(laplace_quantile(0.0), InvalidTau);
  for (int k = 1; k < 200; ++k) {
    const double tau = k / 200.0;
    CHECK(std::abs(laplace_cdf(laplace_quantile(tau)) - tau) < 1e-14);
    CHECK(std::abs(laplace_quantile(1.0 - tau) + laplace_quantile(tau)) <
          1e-14);
  }
}

TEST_CASE("first problem quantile at frozen points") {
  CHECK(tp1_quantile(design4(6.0, 1.0, 2.0), 0.5) == 14.0);
  CHECK(std::abs(tp1_quantile(design4(6.0, 1.0, 2.0), 0.975) -
                 17.7239315706261) < 5e-12);
  CHECK(tp1_quantile(design4(4.0, -1.0, 3.0), 0.5) == 8.5);
  CHECK_THROWS_AS(tp1_quantile(raw2(1.0, 2.0), 0.5), DimensionMismatch);
}

TEST_CASE("coefficient form equals location-scale form") {
  SeededRng rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const double x1 = 10.0 * rng.next_uniform();
    const double x2 = 10.0 * rng.next_uniform() - 5.0;
    const double x3 = 5.0 * rng.next_uniform();
    const double tau = 0.01 + 0.98 * rng.next_uniform();
    const double mu = 5.0 + x1 + 2.0 * x2 + 0.5 * x3;
    const double sigma = 1.0 + 0.1 * x1 + 0.2 * x2 + 0.05 * x3;
    const double direct = mu + sigma * normal_quantile(tau);
    const double linear = tp1_beta(tau).dot(design4(x1, x2, x3));
    CHECK(std::abs(linear - direct) < 1e-12 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("second problem quantile at frozen points") {
  CHECK(tp2_quantile(design3(4.0, 4.0), 0.5) == 0.8);
  CHECK(std::abs(tp2_quantile(design3(4.0, 4.0), 0.9) - 16.724018030341735) <
        5e-12);
  CHECK(std::abs(tp2_quantile(design3(0.0, 0.0), 0.25) +
                 3.4657359027997265) < 5e-13);
  CHECK_THROWS_AS(tp2_quantile(design4(1.0, 2.0, 3.0), 0.5),
                  DimensionMismatch);
}

TEST_CASE("bivariate stage quantiles and their guards") {
  CHECK(bivariate_quantile(raw2(3.0, 1.0), 0.5, 1) == 3.0);
  CHECK(bivariate_quantile(raw2(3.0, 1.0), 0.5, 2, 2.0) == 2.0);
  CHECK_THROWS_AS(bivariate_quantile(raw2(3.0, 1.0), 0.5, 2),
                  MissingConditioner);
  CHECK_THROWS_AS(bivariate_quantile(raw2(3.0, 1.0), 0.5, 3), InvalidArgument);
  CHECK_THROWS_AS(bivariate_quantile(design3(1.0, 2.0), 0.5, 1),
                  DimensionMismatch);
}

TEST_CASE("problem quantiles are strictly increasing in tau") {
  const TestProblem tp1 = make_tp1();
  const TestProblem tp2 = make_tp2();
  const Eigen::VectorXd x1 = (Eigen::VectorXd(3) << 6.0, 1.0, 2.0).finished();
  const Eigen::VectorXd x2 = raw2(4.0, 4.0);
  double p1 = tp1.quantile(x1, 0.001);
  double p2 = tp2.quantile(x2, 0.001);
  for (int k = 2; k < 1000; ++k) {
    const double tau = k / 1000.0;
    const double q1 = tp1.quantile(x1, tau);
    const double q2 = tp2.quantile(x2, tau);
    CHECK(q1 > p1);
    CHECK(q2 > p2);
    p1 = q1;
    p2 = q2;
  }
}

TEST_CASE("inverse-transform draws follow the stated cdf") {
  const int K = 100000;
  SeededRng rng(71);
  for (const TestProblem& problem : {make_tp1(), make_tp2()}) {
    Eigen::VectorXd x(problem.dim);
    for (int i = 0; i < problem.dim; ++i) x[i] = 1.0 + i;
    Eigen::VectorXd sample(K);
    for (int k = 0; k < K; ++k)
      sample[k] = problem.quantile(x, rng.next_uniform());
    const double d =
        ks_vs_cdf(sample, [&](double y) { return problem.cdf(x, y); });
    CHECK(d < 0.006);
  }
}

TEST_CASE("dataset sampling is deterministic and in range") {
  const TestProblem problem = make_tp1();
  SeededRng a(42), b(42);
  const Dataset d1 = sample_dataset(problem, 50, a);
  const Dataset d2 = sample_dataset(problem, 50, b);
  CHECK(d1.design == d2.design);
  CHECK(d1.response == d2.response);
  for (Eigen::Index i = 0; i < d1.n(); ++i) {
    CHECK(d1.design(i, 0) > 0.0);
    CHECK(d1.design(i, 0) < 10.0);
    CHECK(d1.design(i, 1) > -5.0);
    CHECK(d1.design(i, 1) < 5.0);
    CHECK(d1.design(i, 2) > 0.0);
    CHECK(d1.design(i, 2) < 5.0);
  }

  SeededRng c(42);
  Eigen::VectorXd row(3);
  row[0] = 10.0 * c.next_uniform();
  row[1] = 10.0 * c.next_uniform() - 5.0;
  row[2] = 5.0 * c.next_uniform();
  const double y0 = problem.quantile(row, c.next_uniform());
  CHECK(d1.design.row(0).transpose() == row);
  CHECK(d1.response(0, 0) == y0);

  CHECK_THROWS_AS(sample_dataset(problem, 0, a), InvalidArgument);
}

TEST_CASE("large-sample mean matches the population value") {
  SeededRng rng(99);
  const Dataset data = sample_dataset(make_tp1(), 100000, rng);
  CHECK(std::abs(sample_mean(data.y()) - 11.25) < 0.064);
}

TEST_CASE("bivariate sampling shape and residual behavior") {
  SeededRng rng(123);
  const Dataset data = sample_bivariate_dataset(10000, rng);
  CHECK(data.n() == 10000);
  CHECK(data.p() == 2);
  CHECK(data.outputs() == 2);

  const Eigen::VectorXd z1 = data.response.col(0) - data.design.col(0);
  const Eigen::VectorXd z2 = data.response.col(1) -
                             0.5 * data.response.col(0) - data.design.col(1);
  const SummaryStats s1 = summary_stats(z1);
  const SummaryStats s2 = summary_stats(z2);
  CHECK(std::abs(s1.mean) < 0.05);
  CHECK(std::abs(s1.sd - 1.0) < 0.05);
  CHECK(std::abs(s2.mean) < 0.05);
  CHECK(std::abs(s2.sd - 1.0) < 0.05);
  const double cross =
      ((z1.array() - s1.mean) * (z2.array() - s2.mean)).mean();
  CHECK(std::abs(cross) < 0.05);

  SeededRng r2(123);
  const Dataset again = sample_bivariate_dataset(10000, r2);
  CHECK(again.response == data.response);
}

TEST_CASE("conditional oracle draws have the right moments") {
  SeededRng rng(321);
  const Eigen::VectorXd x = raw2(1.5, -0.5);
  const Eigen::MatrixXd draws = sample_bivariate_conditional(x, 50000, rng);
  CHECK(draws.rows() == 50000);
  const SummaryStats m1 = summary_stats(draws.col(0));
  const SummaryStats m2 = summary_stats(draws.col(1));
  CHECK(std::abs(m1.mean - 1.5) < 0.02);
  CHECK(std::abs(m1.sd - 1.0) < 0.02);
  CHECK(std::abs(m2.mean - (0.5 * 1.5 - 0.5)) < 0.03);
  CHECK(std::abs(m2.sd - std::sqrt(1.25)) < 0.03);
  const double corr = ((draws.col(0).array() - m1.mean) *
                       (draws.col(1).array() - m2.mean))
                          .mean() /
                      (m1.sd * m2.sd);
  CHECK(std::abs(corr - 0.4472135954999579) < 0.02);
  CHECK_THROWS_AS(sample_bivariate_conditional(x, 0, rng), InvalidArgument);
}

TEST_CASE("problems resolve by name") {
  CHECK(test_problem_by_name("tp1").dim == 3);
  CHECK(test_problem_by_name("tp2").dim == 2);
  CHECK_THROWS_AS(test_problem_by_name("tp3"), InvalidArgument);
}
