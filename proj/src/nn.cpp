#include "qrgmm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "qrgmm/errors.hpp"
#include "qrgmm/metamodel.hpp"
#include "qrgmm/parallel.hpp"
#include "qrgmm/pinball.hpp"

namespace qrgmm {
namespace {

double activate(Activation act, double z) {
  return act == Activation::tanh ? std::tanh(z) : std::max(0.0, z);
}

double activate_derivative(Activation act, double z) {
  if (act == Activation::tanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

void check_spec(const MlpSpec& spec, Eigen::Index input_dim) {
  if (spec.widths.size() < 2)
    throw InvalidArgument("network needs at least input and output widths");
  if (spec.widths.back() != 1)
    throw InvalidArgument("final network width must be 1");
  if (spec.widths.front() != input_dim)
    throw DimensionMismatch("network input width " +
                            std::to_string(spec.widths.front()) +
                            " does not match covariate dimension " +
                            std::to_string(input_dim));
  for (int w : spec.widths)
    if (w < 1) throw InvalidArgument("network widths must be positive");
  if (spec.smoothing_eps <= 0.0)
    throw InvalidEps("smoothing epsilon must be > 0");
  if (spec.epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (spec.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(spec.step_size > 0.0)) throw InvalidArgument("step size must be > 0");
}

// Smoothing width for the given epoch: halved at every quarter of the
// training run, floor 1/8 of the initial width.
double epoch_eps(const MlpSpec& spec, int epoch) {
  const int quarter = std::max(1, spec.epochs / 4);
  const int halvings = std::min(3, epoch / quarter);
  return spec.smoothing_eps * std::pow(0.5, halvings);
}

Mlp train_level(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                const MlpSpec& spec, double tau, SeededRng rng,
                double* final_loss) {
  Mlp net = init_mlp(spec, rng);
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));

  MlpGradient batch = zero_gradient(net);
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const double eps = epoch_eps(spec, epoch);
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    for (Eigen::Index start = 0; start < n; start += spec.batch_size) {
      const Eigen::Index stop = std::min<Eigen::Index>(n, start + spec.batch_size);
      for (auto& g : batch.weights) g.setZero();
      for (auto& g : batch.biases) g.setZero();
      for (Eigen::Index i = start; i < stop; ++i) {
        const Eigen::Index row = order[static_cast<size_t>(i)];
        nn_loss_and_gradient(net, tau, X.row(row).transpose(), y[row], eps,
                             &batch);
      }
      const double scale = spec.step_size / static_cast<double>(stop - start);
      for (size_t l = 0; l < net.weights.size(); ++l) {
        net.weights[l] -= scale * batch.weights[l];
        net.biases[l] -= scale * batch.biases[l];
      }
    }
  }

  const double eps_final = epoch_eps(spec, std::max(0, spec.epochs - 1));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total += nn_loss_and_gradient(net, tau, X.row(i).transpose(), y[i],
                                  eps_final, nullptr);
  *final_loss = total / static_cast<double>(n);
  return net;
}

}  // namespace

MlpSpec MlpSpec::defaults(int input_dim) {
  MlpSpec spec;
  spec.widths = {input_dim, 32, 32, 1};
  return spec;
}

double Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != weights.front().cols())
    throw DimensionMismatch("network expects input dimension " +
                            std::to_string(weights.front().cols()) +
                            ", got " + std::to_string(x.size()));
  Eigen::VectorXd h = x;
  const size_t layers = weights.size();
  for (size_t l = 0; l + 1 < layers; ++l) {
    h = (weights[l] * h + biases[l])
            .unaryExpr([&](double z) { return activate(activation, z); });
  }
  return (weights.back() * h + biases.back())(0);
}

Mlp init_mlp(const MlpSpec& spec, SeededRng& rng) {
  Mlp net;
  net.activation = spec.activation;
  const size_t layers = spec.widths.size() - 1;
  net.weights.reserve(layers);
  net.biases.reserve(layers);
  for (size_t l = 0; l < layers; ++l) {
    const int fan_in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = a * (2.0 * rng.next_uniform() - 1.0);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

MlpGradient zero_gradient(const Mlp& net) {
  MlpGradient g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (const auto& w : net.weights)
    g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases)
    g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

double nn_loss_and_gradient(const Mlp& net, double tau,
                            const Eigen::Ref<const Eigen::VectorXd>& x,
                            double y, double eps, MlpGradient* grad) {
  detail::check_tau(tau);
  if (!(eps > 0.0)) throw InvalidEps("smoothing epsilon must be > 0");
  const size_t layers = net.weights.size();

  std::vector<Eigen::VectorXd> acts(layers + 1);  // acts[0] = input
  std::vector<Eigen::VectorXd> pre(layers);
  acts[0] = x;
  for (size_t l = 0; l < layers; ++l) {
    pre[l] = net.weights[l] * acts[l] + net.biases[l];
    if (l + 1 < layers) {
      acts[l + 1] = pre[l].unaryExpr(
          [&](double z) { return activate(net.activation, z); });
    } else {
      acts[l + 1] = pre[l];  // linear output layer
    }
  }
  const double prediction = acts[layers](0);
  const double residual = y - prediction;
  const double loss = detail::smoothed_pinball(tau, residual, eps);
  if (grad == nullptr) return loss;

  // d(loss)/d(prediction); residual = y - prediction flips the sign.
  const double dpred = -detail::smoothed_pinball_derivative(tau, residual, eps);
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, dpred);
  for (size_t l = layers; l-- > 0;) {
    grad->weights[l].noalias() += delta * acts[l].transpose();
    grad->biases[l] += delta;
    if (l > 0) {
      Eigen::VectorXd back = net.weights[l].transpose() * delta;
      delta = back.binaryExpr(pre[l - 1], [&](double g, double z) {
        return g * activate_derivative(net.activation, z);
      });
    }
  }
  return loss;
}

NnQuantileModel fit_nn_grid(const Dataset& data, const MlpSpec& spec, int m,
                            int threads) {
  if (!data.single_output())
    throw DimensionMismatch("fit_nn_grid needs a single-output dataset");
  check_spec(spec, data.p());
  NnQuantileModel model;
  model.grid = make_grid(m);
  model.spec = spec;
  model.networks.resize(static_cast<size_t>(m - 1));
  model.final_losses.resize(static_cast<size_t>(m - 1), 0.0);

  const Eigen::VectorXd y = data.y();
  const SeededRng root(spec.seed);
  parallel_for(1, m, threads, [&](int j) {
    model.networks[static_cast<size_t>(j - 1)] = train_level(
        data.design, y, spec, model.grid.level(j), root.substream(j),
        &model.final_losses[static_cast<size_t>(j - 1)]);
  });
  return model;
}

Eigen::VectorXd nn_node_values(const NnQuantileModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd q(model.grid.m - 1);
  for (int j = 0; j < model.grid.m - 1; ++j)
    q[j] = model.networks[static_cast<size_t>(j)].forward(x);
  std::stable_sort(q.data(), q.data() + q.size());
  return q;
}

Eigen::VectorXd nn_generate(const NnQuantileModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x, int K,
                            SeededRng& rng) {
  if (K < 1) throw InvalidArgument("nn_generate needs K >= 1");
  const Eigen::VectorXd q = nn_node_values(model, x);
  Eigen::VectorXd out(K);
  for (int k = 0; k < K; ++k)
    out[k] = interpolate_values(q, model.grid, rng.next_uniform());
  return out;
}

}  // namespace qrgmm
