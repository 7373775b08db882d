#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qrgmm/metamodel.hpp"

namespace qrgmm {

// Sequential factorization of a d-dimensional response: stage l models
// Y_l | (x, y_1, ..., y_{l-1}), so stage inputs grow by one column per
// stage. Generation walks the stages left to right, feeding each stage the
// components already generated for that row.
struct SequentialModel {
  int d = 0;
  std::vector<GenerativeMetamodel> stages;
};

void validate_sequential(const SequentialModel& model);

// Stage l is fit_grid on [design, response columns 1..l-1] against response
// column l, with the caller-chosen basis per stage. Errors carry the stage
// index.
SequentialModel fit_multi(const Dataset& data,
                          const std::vector<BasisSpec>& bases, int m,
                          const SolverOptions& opts = {}, int threads = 1);

// K rows of d components. Each stage draws from its own sub-stream of `rng`
// (stage l uses substream(l-1)), and row k consumes the k-th uniform of
// every stage stream, so the marginal stream of any stage is independent of
// how many later stages exist. For d = 1 the output column is bit-identical
// to generate() driven by substream(0).
Eigen::MatrixXd generate_multi(const SequentialModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               int K, SeededRng& rng);

}  // namespace qrgmm
