#pragma once

#include <Eigen/Dense>

#include "qrgmm/basis.hpp"
#include "qrgmm/dataset.hpp"
#include "qrgmm/grid.hpp"
#include "qrgmm/rng.hpp"
#include "qrgmm/solver.hpp"

namespace qrgmm {

// Coefficient rows beta~(tau_j), j = 1..m-1, one quantile regression per
// grid level. Row j-1 of `coefficients` belongs to level tau_j.
struct QuantileCoefficientTable {
  QuantileGrid grid;
  Eigen::MatrixXd coefficients;  // (m-1) x p
};

// A fitted conditional generator: basis-expanded linear quantile curves plus
// the piecewise-linear interpolator between grid levels. Treat as immutable
// once built.
struct GenerativeMetamodel {
  BasisSpec basis;
  QuantileCoefficientTable table;
  bool rearranged = false;
};

// Throws unless row count is m-1, entries are finite, and the basis output
// dimension matches the table width.
void validate_model(const GenerativeMetamodel& model);

// Fit one quantile regression per grid level tau_j = j/m on the
// basis-expanded design. The expansion's rank is checked once up front.
// Levels are independent fits; threads > 1 runs them concurrently with
// identical results.
GenerativeMetamodel fit_grid(const Dataset& data, const BasisSpec& basis,
                             int m, const SolverOptions& opts = {},
                             int threads = 1);

// Recommended grid size when the caller has no preference: floor(sqrt(n)).
int default_m(Eigen::Index n);

// Piecewise-linear interpolation of coefficient rows in tau: constant at
// beta~(tau_1) below the first level, beta~(tau_j) + m(tau - tau_j)
// [beta~(tau_{j+1}) - beta~(tau_j)] between adjacent levels, constant at
// beta~(tau_{m-1}) above the last. Exact at the levels themselves.
Eigen::VectorXd interpolate_coefficients(const QuantileCoefficientTable& table,
                                         double tau);

// Node predictions (Q~(tau_j|x))_j = table * b(x), the values every other
// query interpolates between.
Eigen::VectorXd node_values(const GenerativeMetamodel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x);

// Same interpolation rule applied to a vector of per-level scalar values.
double interpolate_values(const Eigen::Ref<const Eigen::VectorXd>& values,
                          const QuantileGrid& grid, double tau);

// Conditional quantile estimate at (x, tau). Plain models take the inner
// product of the interpolated coefficients with b(x); rearranged models
// interpolate the sorted node values instead.
double predict_quantile(const GenerativeMetamodel& model,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double tau);

// Node predictions at x sorted ascending (stable, so tied values keep their
// level order). Already-monotone sequences come back unchanged.
Eigen::VectorXd rearrange(const GenerativeMetamodel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// Fraction of node predictions that differ from the sorted sequence at the
// same index. Comparison is exact — sorting ties is stable, so ties never
// count as crossings.
double crossing_frequency(const GenerativeMetamodel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// K inverse-transform samples at x: one fresh uniform per sample, each
// mapped through the interpolated quantile function (sorted node values if
// model.rearranged). Deterministic given the rng seed; every sample lies in
// the closed interval spanned by the node predictions at x.
Eigen::VectorXd generate(const GenerativeMetamodel& model,
                         const Eigen::Ref<const Eigen::VectorXd>& x, int K,
                         SeededRng& rng);

}  // namespace qrgmm
