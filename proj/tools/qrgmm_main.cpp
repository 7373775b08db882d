#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "qrgmm/csv.hpp"
#include "qrgmm/dataset.hpp"
#include "qrgmm/errors.hpp"
#include "qrgmm/experiments.hpp"
#include "qrgmm/metamodel.hpp"
#include "qrgmm/metrics.hpp"
#include "qrgmm/multioutput.hpp"
#include "qrgmm/nn.hpp"
#include "qrgmm/rng.hpp"
#include "qrgmm/serialize.hpp"
#include "qrgmm/testbeds.hpp"

namespace {

using namespace qrgmm;

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(values.size()));
  for (size_t i = 0; i < values.size(); ++i)
    x[static_cast<Eigen::Index>(i)] = values[i];
  return x;
}

struct FitArgs {
  std::string data_path;
  std::string out_path;
  std::string basis = "identity";
  int degree = 3;
  int m = 0;  // 0 = floor(sqrt(n))
  bool add_intercept_col = false;
  bool rearranged = false;
  std::string method = "interior_point";
  double tolerance = 1e-8;
  int max_iterations = 200;
  double smoothing_epsilon = 1e-6;
  int threads = 1;
  bool nn = false;
  std::vector<int> hidden = {32, 32};
  int epochs = 200;
  double step_size = 0.05;
  int batch_size = 64;
  double smoothing_eps_nn = 0.1;
  std::uint64_t seed = 0;
};

SolverOptions solver_options(const FitArgs& args) {
  SolverOptions opts;
  if (args.method == "interior_point")
    opts.method = SolveMethod::interior_point;
  else if (args.method == "smoothed_newton")
    opts.method = SolveMethod::smoothed_newton;
  else
    throw InvalidArgument("unknown solver method: " + args.method);
  opts.tolerance = args.tolerance;
  opts.max_iterations = args.max_iterations;
  opts.smoothing_epsilon = args.smoothing_epsilon;
  return opts;
}

int run_fit(const FitArgs& args) {
  Dataset data = read_dataset_csv(args.data_path);
  if (args.add_intercept_col) data = add_intercept(data);
  const int m = args.m > 0 ? args.m : default_m(data.n());

  if (args.nn) {
    if (!data.single_output())
      throw InvalidArgument("--nn supports a single response column");
    MlpSpec spec = MlpSpec::defaults(static_cast<int>(data.p()));
    spec.widths.clear();
    spec.widths.push_back(static_cast<int>(data.p()));
    for (int h : args.hidden) spec.widths.push_back(h);
    spec.widths.push_back(1);
    spec.seed = args.seed;
    spec.epochs = args.epochs;
    spec.step_size = args.step_size;
    spec.batch_size = args.batch_size;
    spec.smoothing_eps = args.smoothing_eps_nn;
    const NnQuantileModel model = fit_nn_grid(data, spec, m, args.threads);
    save_model(model, args.out_path);
    return 0;
  }

  const SolverOptions opts = solver_options(args);
  if (data.single_output()) {
    const BasisSpec basis =
        args.basis == "polynomial"
            ? BasisSpec::polynomial(static_cast<int>(data.p()), args.degree)
            : BasisSpec::identity(static_cast<int>(data.p()));
    GenerativeMetamodel model = fit_grid(data, basis, m, opts, args.threads);
    model.rearranged = args.rearranged;
    save_model(model, args.out_path);
    return 0;
  }

  std::vector<BasisSpec> bases;
  for (Eigen::Index l = 0; l < data.outputs(); ++l) {
    const int dim = static_cast<int>(data.p() + l);
    bases.push_back(args.basis == "polynomial"
                        ? BasisSpec::polynomial(dim, args.degree)
                        : BasisSpec::identity(dim));
  }
  const SequentialModel model = fit_multi(data, bases, m, opts, args.threads);
  save_model(model, args.out_path);
  return 0;
}

int run_generate(const std::string& model_path, const std::vector<double>& x,
                 int samples, std::uint64_t seed, const std::string& out) {
  if (samples < 1) throw InvalidArgument("--samples must be >= 1");
  const Eigen::VectorXd query = to_vector(x);
  SeededRng rng(seed);
  Eigen::MatrixXd result;
  switch (peek_model_kind(model_path)) {
    case ModelKind::single:
      result = generate(load_model(model_path), query, samples, rng);
      break;
    case ModelKind::multi:
      result = generate_multi(load_multi_model(model_path), query, samples, rng);
      break;
    case ModelKind::nn:
      result = nn_generate(load_nn_model(model_path), query, samples, rng);
      break;
  }
  write_samples_csv(result, out);
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 bool add_intercept_col, std::uint64_t seed,
                 const std::string& out) {
  if (peek_model_kind(model_path) != ModelKind::single)
    throw InvalidArgument("evaluate expects a single-output model");
  const GenerativeMetamodel model = load_model(model_path);
  Dataset data = read_dataset_csv(data_path);
  if (add_intercept_col) data = add_intercept(data);
  if (!data.single_output())
    throw InvalidArgument("evaluate expects a single response column");
  if (data.p() != model.basis.input_dim)
    throw DimensionMismatch("test design has " + std::to_string(data.p()) +
                            " columns, model expects " +
                            std::to_string(model.basis.input_dim));

  SeededRng rng(seed);
  Eigen::VectorXd generated(data.n());
  for (Eigen::Index k = 0; k < data.n(); ++k)
    generated[k] = predict_quantile(model, data.design.row(k).transpose(),
                                    rng.next_uniform());

  MetricReport report;
  report.seed = seed;
  report.n = data.n();
  report.m = model.table.grid.m;
  report.k = data.n();
  const SummaryStats stats = summary_stats(generated);
  report.mean = stats.mean;
  report.sd = stats.sd;
  report.ks = ks_two_sample(generated, data.y());
  report.wasserstein = wasserstein_1d(generated, data.y());

  const std::string text = metric_csv_header() + "\n" + metric_csv_row(report) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream file(out);
    if (!file) throw CorruptFile("cannot open " + out);
    file << text;
  }
  return 0;
}

int run_experiment_verb(const std::string& kind, const std::string& config_path,
                        bool seed_set, std::uint64_t seed, int threads,
                        const std::string& out) {
  ExperimentConfig config = load_config(config_path);
  if (!kind.empty()) config.kind = kind;
  if (seed_set) config.seed = seed;
  if (threads > 0) config.threads = threads;
  validate_config(config);
  const ExperimentResult result = run_experiment(config);
  write_experiment(result, config, out);
  if (result.failed_replications > 0)
    std::cerr << result.failed_replications
              << " replication(s) failed; their rows carry empty cells\n";
  return 0;
}

int run_simulate(const std::string& problem, Eigen::Index n,
                 std::uint64_t seed, const std::string& out) {
  if (n < 1) throw InvalidArgument("--n must be >= 1");
  SeededRng rng(seed);
  const Dataset data = problem == "bivariate"
                           ? sample_bivariate_dataset(n, rng)
                           : sample_dataset(test_problem_by_name(problem), n, rng);
  write_dataset_csv(data, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile-regression generative metamodel toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a metamodel on a CSV dataset and save it as JSON");
  fit->add_option("--data", fit_args.data_path, "training CSV (x1..xp,y1..yd)")
      ->required();
  fit->add_option("--out", fit_args.out_path, "model JSON path")->required();
  fit->add_option("--basis", fit_args.basis, "identity | polynomial")
      ->check(CLI::IsMember({"identity", "polynomial"}));
  fit->add_option("--degree", fit_args.degree, "polynomial degree");
  fit->add_option("--m", fit_args.m, "grid size (default floor(sqrt(n)))");
  fit->add_flag("--add-intercept", fit_args.add_intercept_col,
                "prepend a ones column to the design");
  fit->add_flag("--rearranged", fit_args.rearranged,
                "save with rearranged generation enabled");
  fit->add_option("--method", fit_args.method,
                  "interior_point | smoothed_newton")
      ->check(CLI::IsMember({"interior_point", "smoothed_newton"}));
  fit->add_option("--tolerance", fit_args.tolerance, "solver tolerance");
  fit->add_option("--max-iterations", fit_args.max_iterations);
  fit->add_option("--smoothing-epsilon", fit_args.smoothing_epsilon,
                  "smoothed-newton final epsilon");
  fit->add_option("--threads", fit_args.threads, "quantile levels in parallel");
  fit->add_flag("--nn", fit_args.nn, "fit per-level neural networks instead");
  fit->add_option("--hidden", fit_args.hidden, "hidden layer widths")
      ->delimiter(',');
  fit->add_option("--epochs", fit_args.epochs);
  fit->add_option("--step-size", fit_args.step_size);
  fit->add_option("--batch-size", fit_args.batch_size);
  fit->add_option("--nn-epsilon", fit_args.smoothing_eps_nn,
                  "initial smoothing epsilon for nn training");
  fit->add_option("--seed", fit_args.seed, "nn initialization seed");

  std::string gen_model, gen_out;
  std::vector<double> gen_x;
  int gen_samples = 1000;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand(
      "generate", "Draw samples from a saved model at a query point");
  gen->add_option("--model", gen_model, "model JSON path")->required();
  gen->add_option("--x", gen_x, "query point in model input coordinates")
      ->required()
      ->delimiter(',');
  gen->add_option("--samples", gen_samples, "number of draws");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "output CSV (y1..yd)")->required();

  std::string eval_model, eval_data, eval_out;
  std::uint64_t eval_seed = 0;
  bool eval_intercept = false;
  CLI::App* eval = app.add_subcommand(
      "evaluate",
      "Generate one draw per test row and report mean/sd/KS/Wasserstein");
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", eval_data, "test CSV with true responses")
      ->required();
  eval->add_flag("--add-intercept", eval_intercept,
                 "prepend a ones column to the test design");
  eval->add_option("--seed", eval_seed);
  eval->add_option("--out", eval_out, "metrics CSV (stdout when omitted)");

  std::string exp_kind, exp_config, exp_out = "experiment";
  std::uint64_t exp_seed = 0;
  bool exp_seed_set = false;
  int exp_threads = 0;
  CLI::App* exp = app.add_subcommand(
      "experiment", "Run a configured study and write result tables");
  exp->add_option("kind", exp_kind,
                  "convergence | m_effect | crossing | table1 | "
                  "rearrangement_compare | multi_output (overrides config)");
  exp->add_option("--config", exp_config, "ExperimentConfig JSON")->required();
  exp->add_option("--seed", exp_seed)->each([&](const std::string&) {
    exp_seed_set = true;
  });
  exp->add_option("--threads", exp_threads, "overrides config when > 0");
  exp->add_option("--out", exp_out, "output prefix");

  std::string sim_problem = "tp1", sim_out;
  Eigen::Index sim_n = 1000;
  std::uint64_t sim_seed = 0;
  CLI::App* sim = app.add_subcommand(
      "simulate-testbed", "Sample a synthetic dataset to CSV");
  sim->add_option("--problem", sim_problem, "tp1 | tp2 | bivariate")
      ->check(CLI::IsMember({"tp1", "tp2", "bivariate"}));
  sim->add_option("--n", sim_n, "rows");
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out, "dataset CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*fit) return run_fit(fit_args);
    if (*gen)
      return run_generate(gen_model, gen_x, gen_samples, gen_seed, gen_out);
    if (*eval)
      return run_evaluate(eval_model, eval_data, eval_intercept, eval_seed,
                          eval_out);
    if (*exp)
      return run_experiment_verb(exp_kind, exp_config, exp_seed_set, exp_seed,
                                 exp_threads, exp_out);
    if (*sim) return run_simulate(sim_problem, sim_n, sim_seed, sim_out);
  } catch (const RankDeficient& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const NonFinite& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
