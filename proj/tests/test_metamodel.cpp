#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qrgmm/errors.hpp"
#include "qrgmm/metamodel.hpp"
#include "qrgmm/rng.hpp"
#include "qrgmm/solver.hpp"
#include "qrgmm/testbeds.hpp"
#include "test_support.hpp"

using namespace qrgmm;

namespace {

GenerativeMetamodel single_column_model(std::initializer_list<double> rows,
                                        int m, bool rearranged = false) {
  GenerativeMetamodel model;
  model.basis = BasisSpec::identity(1);
  model.table.grid = make_grid(m);
  model.table.coefficients.resize(static_cast<Eigen::Index>(rows.size()), 1);
  Eigen::Index i = 0;
  for (const double v : rows) model.table.coefficients(i++, 0) = v;
  model.rearranged = rearranged;
  validate_model(model);
  return model;
}

Eigen::VectorXd unit_x() {
  Eigen::VectorXd x(1);
  x << 1.0;
  return x;
}

// TP1 model whose table holds the exact conditional-quantile coefficients.
GenerativeMetamodel tp1_truth_model(int m) {
  GenerativeMetamodel model;
  model.basis = BasisSpec::identity(4);
  model.table.grid = make_grid(m);
  model.table.coefficients.resize(m - 1, 4);
  for (int j = 1; j < m; ++j)
    model.table.coefficients.row(j - 1) =
        tp1_beta(model.table.grid.level(j)).transpose();
  return model;
}

const GenerativeMetamodel& fitted_tp1_model() {
  static const GenerativeMetamodel model = [] {
    SeededRng rng(2001);
    const Dataset data = add_intercept(sample_dataset(make_tp1(), 10000, rng));
    return fit_grid(data, BasisSpec::identity(4), 100, SolverOptions{}, 4);
  }();
  return model;
}

}  // namespace

TEST_CASE("default grid size is floor of sqrt n") {
  CHECK(default_m(10000) == 100);
  CHECK(default_m(10) == 3);
  CHECK(default_m(5) == 2);
  CHECK(default_m(2) == 2);
}

TEST_CASE("coefficient interpolation on a tiny table") {
  const GenerativeMetamodel model = single_column_model({0, 1, 2}, 4);
  CHECK(interpolate_coefficients(model.table, 0.5)[0] == 1.0);
  CHECK(interpolate_coefficients(model.table, 0.625)[0] == 1.5);
  CHECK(interpolate_coefficients(model.table, 0.9)[0] == 2.0);
  CHECK(interpolate_coefficients(model.table, 0.75)[0] == 2.0);
  CHECK(interpolate_coefficients(model.table, 0.25)[0] == 0.0);
  CHECK(interpolate_coefficients(model.table, 0.05)[0] == 0.0);
  CHECK_THROWS_AS(interpolate_coefficients(model.table, 0.0), InvalidTau);
  CHECK_THROWS_AS(interpolate_coefficients(model.table, 1.0), InvalidTau);
}

TEST_CASE("prediction with the true TP1 coefficients") {
  const GenerativeMetamodel model = tp1_truth_model(100);
  Eigen::VectorXd x(4);
  x << 1, 4, -1, 3;
  CHECK(predict_quantile(model, x, 0.5) == doctest::Approx(8.5).epsilon(1e-12));

  // constant tables predict c.b(x) at every tau
  GenerativeMetamodel constant;
  constant.basis = BasisSpec::identity(2);
  constant.table.grid = make_grid(5);
  constant.table.coefficients = Eigen::MatrixXd::Ones(4, 2) * 1.5;
  Eigen::VectorXd z(2);
  z << 2, 3;
  for (const double tau : {0.01, 0.2, 0.5, 0.77, 0.99})
    CHECK(predict_quantile(constant, z, tau) ==
          doctest::Approx(7.5).epsilon(1e-14));
}

TEST_CASE("rearranged prediction interpolates the sorted nodes") {
  const GenerativeMetamodel model = single_column_model({3, 1, 2}, 4, true);
  const Eigen::VectorXd x = unit_x();
  CHECK(predict_quantile(model, x, 0.25) == 1.0);
  CHECK(predict_quantile(model, x, 0.5) == 2.0);
  CHECK(predict_quantile(model, x, 0.625) == 2.5);
  CHECK(predict_quantile(model, x, 0.9) == 3.0);
}

TEST_CASE("rearrange sorts stably and keeps ties") {
  const Eigen::VectorXd x = unit_x();
  const GenerativeMetamodel tangled = single_column_model({3, 1, 2}, 4);
  const Eigen::VectorXd sorted = rearrange(tangled, x);
  CHECK(sorted[0] == 1.0);
  CHECK(sorted[1] == 2.0);
  CHECK(sorted[2] == 3.0);

  const GenerativeMetamodel mono = single_column_model({1, 2, 3}, 4);
  CHECK(rearrange(mono, x) == node_values(mono, x));

  const GenerativeMetamodel ties = single_column_model({5, 5, 5}, 4);
  const Eigen::VectorXd t = rearrange(ties, x);
  CHECK(t[0] == 5.0);
  CHECK(t[1] == 5.0);
  CHECK(t[2] == 5.0);
}

TEST_CASE("crossing frequency counts index mismatches exactly") {
  const Eigen::VectorXd x = unit_x();
  CHECK(crossing_frequency(single_column_model({1, 2, 3}, 4), x) == 0.0);
  CHECK(crossing_frequency(single_column_model({3, 1, 2}, 4), x) == 1.0);
  CHECK(crossing_frequency(single_column_model({1, 3, 2}, 4), x) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(
      crossing_frequency(single_column_model({1, 2, 3}, 4, true), x),
      InvalidArgument);
}

TEST_CASE("generation from a constant-quantile model") {
  const GenerativeMetamodel model = single_column_model({7, 7, 7}, 4);
  SeededRng rng(5);
  const Eigen::VectorXd s = generate(model, unit_x(), 200, rng);
  REQUIRE(s.size() == 200);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == 7.0);
}

TEST_CASE("generation is deterministic and spans the node range") {
  const GenerativeMetamodel model = tp1_truth_model(50);
  Eigen::VectorXd x(4);
  x << 1, 6, 1, 2;
  SeededRng a(99), b(99);
  const Eigen::VectorXd s1 = generate(model, x, 5000, a);
  const Eigen::VectorXd s2 = generate(model, x, 5000, b);
  CHECK(s1 == s2);

  const Eigen::VectorXd nodes = node_values(model, x);
  const double lo = nodes.minCoeff(), hi = nodes.maxCoeff();
  for (Eigen::Index i = 0; i < s1.size(); ++i) {
    CHECK(s1[i] >= lo);
    CHECK(s1[i] <= hi);
  }
  CHECK_THROWS_AS(generate(model, x, 0, a), InvalidArgument);
}

TEST_CASE("generated mean matches the true conditional mean") {
  const GenerativeMetamodel model = tp1_truth_model(100);
  Eigen::VectorXd x(4);
  x << 1, 4, -1, 3;
  SeededRng rng(17);
  const Eigen::VectorXd s = generate(model, x, 100000, rng);
  CHECK(std::abs(s.mean() - 8.5) < 0.013);
}

TEST_CASE("fit_grid on exact data reduces to single fits") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 1, 1, 2, 1, 3;
  Eigen::VectorXd y(3);
  y << 2, 4, 7;
  const Dataset data = validate_dataset(X, y);
  const GenerativeMetamodel model = fit_grid(data, BasisSpec::identity(2), 2);
  REQUIRE(model.table.coefficients.rows() == 1);
  const FitResult direct = fit(data, 0.5);
  CHECK(model.table.coefficients(0, 0) == direct.beta[0]);
  CHECK(model.table.coefficients(0, 1) == direct.beta[1]);
  CHECK_FALSE(model.rearranged);
}

TEST_CASE("fit_grid rejects collinear expanded designs") {
  Eigen::MatrixXd X(6, 3);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = i + 1.0;
    X(i, 2) = i + 1.0;  // duplicate of column 1
  }
  const Dataset data = validate_dataset(X, Eigen::VectorXd(Eigen::VectorXd::Ones(6)));
  CHECK_THROWS_AS(fit_grid(data, BasisSpec::identity(3), 4), RankDeficient);
  try {
    fit_grid(data, BasisSpec::identity(3), 4);
  } catch (const RankDeficient& e) {
    CHECK(std::string(e.what()).find("tau") != std::string::npos);
  }
  CHECK_THROWS_AS(fit_grid(data, BasisSpec::identity(3), 1), InvalidM);
}

TEST_CASE("fitted TP1 median row recovers the true coefficients") {
  const GenerativeMetamodel& model = fitted_tp1_model();
  const Eigen::RowVectorXd row = model.table.coefficients.row(49);  // tau 0.5
  Eigen::RowVector4d truth;
  truth << 5, 1, 2, 0.5;
  CHECK((row - truth).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("node exactness and piecewise linearity") {
  SeededRng rng(808);
  for (int rep = 0; rep < 5; ++rep) {
    const auto inst = testsupport::random_instance(rng, 40, 2);
    Eigen::VectorXd y = inst.y;
    const GenerativeMetamodel model =
        fit_grid(validate_dataset(inst.X, y), BasisSpec::identity(2), 7);
    const QuantileGrid& grid = model.table.grid;
    for (int t = 0; t < 3; ++t) {
      Eigen::VectorXd x(2);
      x << 1.0, 10.0 * rng.next_uniform() - 5.0;
      for (int j = 1; j < 7; ++j) {
        const double direct = model.table.coefficients.row(j - 1).dot(x);
        CHECK(std::abs(predict_quantile(model, x, grid.level(j)) - direct) <
              1e-12);
      }
      for (int t2 = 0; t2 < 20; ++t2) {
        const int j = 1 + static_cast<int>(rng.next_u64() % 5);
        const double lo = grid.level(j), hi = grid.level(j + 1);
        const double tau1 = lo + (hi - lo) * rng.next_uniform();
        const double tau2 = lo + (hi - lo) * rng.next_uniform();
        const double lam = rng.next_uniform();
        const double blend = lam * predict_quantile(model, x, tau1) +
                             (1.0 - lam) * predict_quantile(model, x, tau2);
        const double at = predict_quantile(
            model, x, lam * tau1 + (1.0 - lam) * tau2);
        CHECK(std::abs(at - blend) < 1e-10);
      }
    }
  }
}

TEST_CASE("rearranged predictions are monotone in tau") {
  SeededRng rng(3131);
  const auto inst = testsupport::random_instance(rng, 60, 2);
  GenerativeMetamodel model =
      fit_grid(validate_dataset(inst.X, inst.y), BasisSpec::identity(2), 9);
  model.rearranged = true;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd x(2);
    x << 1.0, 10.0 * rng.next_uniform() - 5.0;
    double prev = -std::numeric_limits<double>::infinity();
    for (double tau = 0.005; tau < 0.9999; tau += 0.005) {
      const double q = predict_quantile(model, x, tau);
      CHECK(q >= prev);
      prev = q;
    }
    // the sorted node sequence never crosses
    const Eigen::VectorXd sorted = rearrange(model, x);
    CHECK(std::is_sorted(sorted.data(), sorted.data() + sorted.size()));
  }
}

TEST_CASE("generated samples match the model's own distribution") {
  const GenerativeMetamodel& model = fitted_tp1_model();
  Eigen::VectorXd x(4);
  x << 1, 6, 1, 2;
  const Eigen::VectorXd q = node_values(model, x);
  const Eigen::Index last = q.size() - 1;
  REQUIRE(std::is_sorted(q.data(), q.data() + q.size()));

  const int m = model.table.grid.m;
  auto cdf = [&](double y) {
    if (y < q[0]) return 0.0;
    if (y >= q[last]) return 1.0;
    const double* hit = std::upper_bound(q.data(), q.data() + q.size(), y);
    const Eigen::Index j = hit - q.data() - 1;  // q[j] <= y < q[j+1]
    const double tau_j = static_cast<double>(j + 1) / m;
    return tau_j + (y - q[j]) / (q[j + 1] - q[j]) / m;
  };
  auto cdf_left = [&](double y) {
    if (y <= q[0]) return 0.0;
    if (y > q[last]) return 1.0;
    const double* hit = std::lower_bound(q.data(), q.data() + q.size(), y);
    const Eigen::Index j = hit - q.data();  // first q[j] >= y
    if (j == 0) return 0.0;
    const double tau_prev = static_cast<double>(j) / m;
    return tau_prev + (y - q[j - 1]) / (q[j] - q[j - 1]) / m;
  };

  SeededRng rng(92);
  const int K = 100000;
  const Eigen::VectorXd s = generate(model, x, K, rng);
  const double d = testsupport::ks_exact_vs_mixed_cdf(
      std::vector<double>(s.data(), s.data() + K), cdf, cdf_left);
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(K)) * 1.5);
}

TEST_CASE("middle-interval error shrinks with n") {
  Eigen::VectorXd x_model(4);
  x_model << 1, 6, 1, 2;
  const TestProblem tp1 = make_tp1();
  std::vector<double> sup_err;
  for (const Eigen::Index n : {400, 2500, 10000}) {
    double acc = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
      SeededRng rng(1000 + rep);
      const Dataset data = add_intercept(sample_dataset(tp1, n, rng));
      const GenerativeMetamodel model = fit_grid(
          data, BasisSpec::identity(4), default_m(n), SolverOptions{}, 4);
      double sup = 0.0;
      for (double tau = 0.1; tau <= 0.9 + 1e-12; tau += 0.005) {
        const double err = std::abs(predict_quantile(model, x_model, tau) -
                                    tp1_quantile(x_model, tau));
        sup = std::max(sup, err);
      }
      acc += sup;
    }
    sup_err.push_back(acc / 3.0);
  }
  CHECK(sup_err[1] < sup_err[0]);
  CHECK(sup_err[2] < sup_err[1]);
}
