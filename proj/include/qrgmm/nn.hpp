#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qrgmm/dataset.hpp"
#include "qrgmm/grid.hpp"
#include "qrgmm/rng.hpp"

namespace qrgmm {

enum class Activation { tanh, rectifier };

// Architecture and training knobs for the per-level networks. Defaults are
// this library's own choices (small tanh MLPs, plain mini-batch descent) —
// tune per problem.
struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., 1
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;
  int epochs = 200;
  double step_size = 0.05;
  int batch_size = 64;
  double smoothing_eps = 0.1;  // training loss width; halved every quarter
                               // of the epochs (continuation)

  static MlpSpec defaults(int input_dim);
};

// Fully connected network; hidden layers use `activation`, the output layer
// is linear with width 1.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // layer l: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::tanh;

  double forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct MlpGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Deterministic scaled-uniform initialization (width-aware), one draw per
// parameter from `rng`.
Mlp init_mlp(const MlpSpec& spec, SeededRng& rng);

// Smoothed pinball loss of the network's prediction at one observation;
// accumulates d(loss)/d(parameters) into grad when grad is non-null
// (backpropagation). Exposed so gradients can be checked against finite
// differences.
double nn_loss_and_gradient(const Mlp& net, double tau,
                            const Eigen::Ref<const Eigen::VectorXd>& x,
                            double y, double eps, MlpGradient* grad);

MlpGradient zero_gradient(const Mlp& net);

// One network per grid level, trained on raw covariates (no basis
// expansion). Node values at a query point are the m-1 forward passes.
struct NnQuantileModel {
  QuantileGrid grid;
  MlpSpec spec;
  std::vector<Mlp> networks;  // m-1
  std::vector<double> final_losses;  // mean training loss per level, last epoch
};

// Mini-batch gradient descent on the smoothed pinball loss, independently
// per level. Level j trains from substream j of the spec seed, so results
// do not depend on thread count.
NnQuantileModel fit_nn_grid(const Dataset& data, const MlpSpec& spec, int m,
                            int threads = 1);

// Network node predictions at x, rearranged (sorted ascending) — networks
// carry no monotonicity guarantee, so sorting is not optional here.
Eigen::VectorXd nn_node_values(const NnQuantileModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& x);

// Inverse-transform sampling through the interpolated (rearranged) node
// values, one uniform per sample, as generate().
Eigen::VectorXd nn_generate(const NnQuantileModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x, int K,
                            SeededRng& rng);

}  // namespace qrgmm
