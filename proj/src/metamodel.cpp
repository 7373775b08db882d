#include "qrgmm/metamodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrgmm/errors.hpp"
#include "qrgmm/parallel.hpp"

namespace qrgmm {
namespace {

// Interpolation cell: value = nodes[j] + lam * (nodes[j+1] - nodes[j]),
// with constant tails encoded as lam = 0 at the boundary nodes. Queries
// bit-equal to a grid level snap to that node so node predictions reproduce
// the fitted rows exactly, immune to roundoff in tau * m.
struct InterpPos {
  int j;
  double lam;
};

InterpPos locate(const QuantileGrid& grid, double tau) {
  detail::check_tau(tau);
  const int m = grid.m;
  const double t = tau * static_cast<double>(m);
  const int nearest = static_cast<int>(std::lround(t));
  if (nearest >= 1 && nearest <= m - 1 && tau == grid.level(nearest))
    return {nearest - 1, 0.0};
  if (t <= 1.0) return {0, 0.0};
  if (t >= static_cast<double>(m - 1)) return {m - 2, 0.0};
  const int j = static_cast<int>(t);  // 1..m-2
  return {j - 1, t - static_cast<double>(j)};
}

void check_input_dim(const GenerativeMetamodel& model, Eigen::Index got) {
  if (got != model.basis.input_dim)
    throw DimensionMismatch("query point has dimension " +
                            std::to_string(got) + ", basis expects " +
                            std::to_string(model.basis.input_dim));
}

Eigen::VectorXd sorted_nodes(const GenerativeMetamodel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd q = node_values(model, x);
  std::stable_sort(q.data(), q.data() + q.size());
  return q;
}

}  // namespace

void validate_model(const GenerativeMetamodel& model) {
  const int m = model.table.grid.m;
  if (m < 2) throw InvalidM("model grid has m < 2");
  if (model.table.coefficients.rows() != m - 1)
    throw DimensionMismatch(
        "coefficient table has " +
        std::to_string(model.table.coefficients.rows()) + " rows, expected " +
        std::to_string(m - 1));
  if (model.table.coefficients.cols() != model.basis.output_dim())
    throw DimensionMismatch(
        "coefficient table has " +
        std::to_string(model.table.coefficients.cols()) +
        " columns, basis produces " + std::to_string(model.basis.output_dim()));
  if (!model.table.coefficients.allFinite())
    throw NonFinite("coefficient table contains non-finite entries");
  if (static_cast<Eigen::Index>(model.table.grid.levels.size()) !=
      static_cast<Eigen::Index>(m - 1))
    throw DimensionMismatch("grid levels inconsistent with m");
}

int default_m(Eigen::Index n) {
  return std::max(2, static_cast<int>(std::floor(std::sqrt(
                         static_cast<double>(n)))));
}

GenerativeMetamodel fit_grid(const Dataset& data, const BasisSpec& basis,
                             int m, const SolverOptions& opts, int threads) {
  if (!data.single_output())
    throw DimensionMismatch("fit_grid needs a single-output dataset, got " +
                            std::to_string(data.outputs()) + " outputs");
  QuantileGrid grid = make_grid(m);
  const Eigen::MatrixXd X = expand_design(basis, data.design);
  const Eigen::VectorXd y = data.y();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw RankDeficient("expanded design has column rank " +
                        std::to_string(qr.rank()) + " < " +
                        std::to_string(X.cols()) + "; fit at tau=" +
                        std::to_string(grid.level(1)) + " not identified");

  GenerativeMetamodel model;
  model.basis = basis;
  model.table.grid = grid;
  model.table.coefficients.resize(m - 1, X.cols());
  model.rearranged = false;

  parallel_for(1, m, threads, [&](int j) {
    const double tau = grid.level(j);
    try {
      const FitResult r = detail::fit_prechecked(X, y, tau, opts);
      model.table.coefficients.row(j - 1) = r.beta.transpose();
    } catch (const InvalidEps& e) {
      throw InvalidEps("fit at tau=" + std::to_string(tau) + ": " + e.what());
    } catch (const NonFinite& e) {
      throw NonFinite("fit at tau=" + std::to_string(tau) + ": " + e.what());
    }
  });

  validate_model(model);
  return model;
}

Eigen::VectorXd interpolate_coefficients(const QuantileCoefficientTable& table,
                                         double tau) {
  const InterpPos pos = locate(table.grid, tau);
  if (pos.lam == 0.0) return table.coefficients.row(pos.j).transpose();
  return (table.coefficients.row(pos.j) +
          pos.lam * (table.coefficients.row(pos.j + 1) -
                     table.coefficients.row(pos.j)))
      .transpose();
}

Eigen::VectorXd node_values(const GenerativeMetamodel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_input_dim(model, x.size());
  return model.table.coefficients * expand_basis(model.basis, x);
}

double interpolate_values(const Eigen::Ref<const Eigen::VectorXd>& values,
                          const QuantileGrid& grid, double tau) {
  if (values.size() != grid.m - 1)
    throw DimensionMismatch("value vector size does not match grid");
  const InterpPos pos = locate(grid, tau);
  if (pos.lam == 0.0) return values[pos.j];
  return values[pos.j] + pos.lam * (values[pos.j + 1] - values[pos.j]);
}

double predict_quantile(const GenerativeMetamodel& model,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        double tau) {
  check_input_dim(model, x.size());
  if (model.rearranged)
    return interpolate_values(sorted_nodes(model, x), model.table.grid, tau);
  return interpolate_coefficients(model.table, tau)
      .dot(expand_basis(model.basis, x));
}

Eigen::VectorXd rearrange(const GenerativeMetamodel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  return sorted_nodes(model, x);
}

double crossing_frequency(const GenerativeMetamodel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.rearranged)
    throw InvalidArgument(
        "crossing_frequency is defined for the unrearranged model");
  const Eigen::VectorXd q = node_values(model, x);
  Eigen::VectorXd sorted = q;
  std::stable_sort(sorted.data(), sorted.data() + sorted.size());
  Eigen::Index crossings = 0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (q[i] != sorted[i]) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(q.size());
}

Eigen::VectorXd generate(const GenerativeMetamodel& model,
                         const Eigen::Ref<const Eigen::VectorXd>& x, int K,
                         SeededRng& rng) {
  if (K < 1) throw InvalidArgument("generate needs K >= 1");
  const Eigen::VectorXd q =
      model.rearranged ? rearrange(model, x) : node_values(model, x);
  Eigen::VectorXd out(K);
  for (int k = 0; k < K; ++k)
    out[k] = interpolate_values(q, model.table.grid, rng.next_uniform());
  return out;
}

}  // namespace qrgmm
