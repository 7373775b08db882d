#include "qrgmm/multioutput.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "qrgmm/errors.hpp"

namespace qrgmm {
namespace {

template <typename Fn>
auto with_stage_tag(int stage, Fn&& fn) -> decltype(fn()) {
  const std::string tag = "stage " + std::to_string(stage) + ": ";
  try {
    return fn();
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(tag + e.what());
  } catch (const RankDeficient& e) {
    throw RankDeficient(tag + e.what());
  } catch (const NonFinite& e) {
    throw NonFinite(tag + e.what());
  } catch (const InvalidEps& e) {
    throw InvalidEps(tag + e.what());
  } catch (const InvalidM& e) {
    throw InvalidM(tag + e.what());
  }
}

}  // namespace

void validate_sequential(const SequentialModel& model) {
  if (model.d < 1) throw InvalidArgument("sequential model needs d >= 1");
  if (static_cast<int>(model.stages.size()) != model.d)
    throw DimensionMismatch("sequential model has " +
                            std::to_string(model.stages.size()) +
                            " stages for d=" + std::to_string(model.d));
  const int base_dim = model.stages.front().basis.input_dim;
  for (int l = 0; l < model.d; ++l) {
    validate_model(model.stages[static_cast<size_t>(l)]);
    const int want = base_dim + l;
    const int got = model.stages[static_cast<size_t>(l)].basis.input_dim;
    if (got != want)
      throw DimensionMismatch("stage " + std::to_string(l + 1) +
                              " basis input_dim is " + std::to_string(got) +
                              ", expected " + std::to_string(want));
  }
}

SequentialModel fit_multi(const Dataset& data,
                          const std::vector<BasisSpec>& bases, int m,
                          const SolverOptions& opts, int threads) {
  const int d = static_cast<int>(data.outputs());
  if (static_cast<int>(bases.size()) != d)
    throw DimensionMismatch("got " + std::to_string(bases.size()) +
                            " bases for " + std::to_string(d) + " outputs");

  SequentialModel model;
  model.d = d;
  model.stages.reserve(static_cast<size_t>(d));
  for (int l = 0; l < d; ++l) {
    model.stages.push_back(with_stage_tag(l + 1, [&] {
      Eigen::MatrixXd design(data.n(), data.p() + l);
      design.leftCols(data.p()) = data.design;
      if (l > 0) design.rightCols(l) = data.response.leftCols(l);
      Dataset stage_data = validate_dataset(std::move(design),
                                            Eigen::VectorXd(data.response.col(l)));
      return fit_grid(stage_data, bases[static_cast<size_t>(l)], m, opts,
                      threads);
    }));
  }
  validate_sequential(model);
  return model;
}

Eigen::MatrixXd generate_multi(const SequentialModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               int K, SeededRng& rng) {
  validate_sequential(model);
  if (K < 1) throw InvalidArgument("generate_multi needs K >= 1");
  const int d = model.d;
  const auto& first = model.stages.front();
  if (x.size() != first.basis.input_dim)
    throw DimensionMismatch("query point has dimension " +
                            std::to_string(x.size()) + ", stage 1 expects " +
                            std::to_string(first.basis.input_dim));

  std::vector<SeededRng> streams;
  streams.reserve(static_cast<size_t>(d));
  for (int l = 0; l < d; ++l) streams.push_back(rng.substream(l));

  // Stage 1 conditions only on x, so its node values are fixed across rows.
  const Eigen::VectorXd q1 =
      first.rearranged ? rearrange(first, x) : node_values(first, x);

  Eigen::MatrixXd out(K, d);
  Eigen::VectorXd input(x.size() + d - 1);
  input.head(x.size()) = x;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < d; ++l) {
      const double u = streams[static_cast<size_t>(l)].next_uniform();
      double value;
      if (l == 0) {
        value = interpolate_values(q1, first.table.grid, u);
      } else {
        const auto& stage = model.stages[static_cast<size_t>(l)];
        const auto in_l = input.head(x.size() + l);
        const Eigen::VectorXd q = stage.rearranged
                                      ? rearrange(stage, in_l)
                                      : node_values(stage, in_l);
        value = interpolate_values(q, stage.table.grid, u);
      }
      out(k, l) = value;
      if (l < d - 1) input[x.size() + l] = value;
    }
  }
  return out;
}

}  // namespace qrgmm
