#include "qrgmm/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "qrgmm/errors.hpp"
#include "qrgmm/metamodel.hpp"
#include "qrgmm/metrics.hpp"
#include "qrgmm/multioutput.hpp"
#include "qrgmm/parallel.hpp"
#include "qrgmm/testbeds.hpp"

#ifndef QRGMM_GIT_DESCRIBE
#define QRGMM_GIT_DESCRIBE "unknown"
#endif

namespace qrgmm {
namespace {

using nlohmann::json;

constexpr const char* kKinds[] = {"convergence", "m_effect",
                                  "crossing",    "table1",
                                  "rearrangement_compare", "multi_output"};

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// ---- config <-> json ----

std::string m_rule_kind_to_string(MRule::Kind kind) {
  switch (kind) {
    case MRule::Kind::sqrt_n: return "sqrt_n";
    case MRule::Kind::fixed: return "fixed";
    case MRule::Kind::c_sqrt_n: return "c_sqrt_n";
  }
  return "sqrt_n";
}

MRule::Kind m_rule_kind_from_string(const std::string& s) {
  if (s == "sqrt_n") return MRule::Kind::sqrt_n;
  if (s == "fixed") return MRule::Kind::fixed;
  if (s == "c_sqrt_n") return MRule::Kind::c_sqrt_n;
  throw InvalidArgument("unknown m rule: " + s);
}

void check_known_keys(const json& j, const std::set<std::string>& allowed,
                      const std::string& where) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw InvalidArgument("unknown " + where + " key '" + item.key() + "'");
}

}  // namespace

int MRule::resolve(Eigen::Index n) const {
  switch (kind) {
    case Kind::sqrt_n:
      return default_m(n);
    case Kind::fixed:
      return fixed_m;
    case Kind::c_sqrt_n:
      return std::max<int>(
          2, static_cast<int>(std::llround(c * std::sqrt(static_cast<double>(n)))));
  }
  return default_m(n);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFile("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  if (!j.is_object()) throw CorruptFile(path + ": config must be an object");

  check_known_keys(j,
                   {"kind", "problem", "basis", "n_grid", "m_grid", "c_grid",
                    "m_rule", "replications", "K", "x_star", "seed", "threads",
                    "solver"},
                   "config");

  ExperimentConfig cfg;
  auto get = [&](const char* key) -> const json& { return j.at(key); };
  try {
    cfg.kind = get("kind").get<std::string>();
    if (j.contains("problem")) cfg.problem = get("problem").get<std::string>();
    if (j.contains("basis")) {
      const json& b = get("basis");
      check_known_keys(b, {"kind", "degree"}, "basis");
      if (b.contains("kind")) cfg.basis_kind = b.at("kind").get<std::string>();
      if (b.contains("degree")) cfg.degree = b.at("degree").get<int>();
    }
    if (j.contains("n_grid"))
      for (const auto& n : get("n_grid"))
        cfg.n_grid.push_back(n.get<Eigen::Index>());
    if (j.contains("m_grid"))
      for (const auto& m : get("m_grid")) cfg.m_grid.push_back(m.get<int>());
    if (j.contains("c_grid"))
      for (const auto& c : get("c_grid")) cfg.c_grid.push_back(c.get<double>());
    if (j.contains("m_rule")) {
      const json& r = get("m_rule");
      check_known_keys(r, {"kind", "m", "c"}, "m_rule");
      cfg.m_rule.kind = m_rule_kind_from_string(r.at("kind").get<std::string>());
      if (r.contains("m")) cfg.m_rule.fixed_m = r.at("m").get<int>();
      if (r.contains("c")) cfg.m_rule.c = r.at("c").get<double>();
    }
    if (j.contains("replications"))
      cfg.replications = get("replications").get<int>();
    if (j.contains("K")) cfg.samples = get("K").get<int>();
    if (j.contains("x_star")) {
      const json& xs = get("x_star");
      cfg.x_star.resize(static_cast<Eigen::Index>(xs.size()));
      for (size_t i = 0; i < xs.size(); ++i)
        cfg.x_star[static_cast<Eigen::Index>(i)] = xs[i].get<double>();
    }
    if (j.contains("seed")) cfg.seed = get("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = get("threads").get<int>();
    if (j.contains("solver")) {
      const json& s = get("solver");
      check_known_keys(
          s, {"method", "tolerance", "max_iterations", "smoothing_epsilon"},
          "solver");
      if (s.contains("method")) {
        const std::string method = s.at("method").get<std::string>();
        if (method == "interior_point")
          cfg.solver.method = SolveMethod::interior_point;
        else if (method == "smoothed_newton")
          cfg.solver.method = SolveMethod::smoothed_newton;
        else
          throw InvalidArgument("unknown solver method: " + method);
      }
      if (s.contains("tolerance"))
        cfg.solver.tolerance = s.at("tolerance").get<double>();
      if (s.contains("max_iterations"))
        cfg.solver.max_iterations = s.at("max_iterations").get<int>();
      if (s.contains("smoothing_epsilon"))
        cfg.solver.smoothing_epsilon = s.at("smoothing_epsilon").get<double>();
    }
  } catch (const json::exception& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  validate_config(cfg);
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json xs = json::array();
  for (Eigen::Index i = 0; i < cfg.x_star.size(); ++i)
    xs.push_back(cfg.x_star[i]);
  json j{
      {"kind", cfg.kind},
      {"problem", cfg.problem},
      {"basis", {{"kind", cfg.basis_kind}, {"degree", cfg.degree}}},
      {"n_grid", cfg.n_grid},
      {"m_grid", cfg.m_grid},
      {"c_grid", cfg.c_grid},
      {"m_rule",
       {{"kind", m_rule_kind_to_string(cfg.m_rule.kind)},
        {"m", cfg.m_rule.fixed_m},
        {"c", cfg.m_rule.c}}},
      {"replications", cfg.replications},
      {"K", cfg.samples},
      {"x_star", std::move(xs)},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"solver",
       {{"method", cfg.solver.method == SolveMethod::interior_point
                       ? "interior_point"
                       : "smoothed_newton"},
        {"tolerance", cfg.solver.tolerance},
        {"max_iterations", cfg.solver.max_iterations},
        {"smoothing_epsilon", cfg.solver.smoothing_epsilon}}}};
  return j.dump(1, '\t');
}

void validate_config(const ExperimentConfig& cfg) {
  const auto* end = std::end(kKinds);
  if (std::find(std::begin(kKinds), end, cfg.kind) == end)
    throw InvalidArgument("unknown experiment kind: '" + cfg.kind + "'");
  const bool multi = cfg.kind == "multi_output";
  if (multi) {
    if (cfg.problem != "bivariate")
      throw InvalidArgument("multi_output runs on the bivariate problem");
  } else if (cfg.problem != "tp1" && cfg.problem != "tp2") {
    throw InvalidArgument("problem must be tp1 or tp2 for " + cfg.kind);
  }
  if (cfg.basis_kind != "identity" && cfg.basis_kind != "polynomial")
    throw InvalidArgument("basis kind must be identity or polynomial");
  if (cfg.basis_kind == "polynomial" && cfg.degree < 1)
    throw InvalidArgument("polynomial basis needs degree >= 1");
  if (cfg.n_grid.empty()) throw InvalidArgument("n_grid must not be empty");
  for (const auto n : cfg.n_grid)
    if (n < 1) throw InvalidArgument("n_grid values must be positive");
  if (cfg.replications < 1) throw InvalidArgument("replications must be >= 1");
  if (cfg.samples < 1) throw InvalidArgument("K must be >= 1");
  if (cfg.threads < 1) throw InvalidArgument("threads must be >= 1");
  if (cfg.kind == "m_effect") {
    if (cfg.m_grid.empty()) throw InvalidArgument("m_effect needs m_grid");
    for (int m : cfg.m_grid)
      if (m < 2) throw InvalidArgument("m_grid values must be >= 2");
  }
  if (cfg.kind == "crossing") {
    if (cfg.c_grid.empty()) throw InvalidArgument("crossing needs c_grid");
    for (double c : cfg.c_grid)
      if (!(c > 0.0)) throw InvalidArgument("c_grid values must be positive");
  }
  if (cfg.m_rule.kind == MRule::Kind::fixed && cfg.m_rule.fixed_m < 2)
    throw InvalidArgument("fixed m rule needs m >= 2");
  if (cfg.m_rule.kind == MRule::Kind::c_sqrt_n && !(cfg.m_rule.c > 0.0))
    throw InvalidArgument("c_sqrt_n rule needs c > 0");

  const int want_dim = multi ? 2 : (cfg.problem == "tp1" ? 3 : 2);
  const bool needs_x = cfg.kind != "table1";
  if (needs_x && cfg.x_star.size() != want_dim)
    throw InvalidArgument("x_star needs " + std::to_string(want_dim) +
                          " raw covariates for " + cfg.problem);
  if (!(cfg.solver.tolerance > 0.0))
    throw InvalidArgument("solver tolerance must be > 0");
  if (cfg.solver.max_iterations < 1)
    throw InvalidArgument("solver max_iterations must be >= 1");
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  for (size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (row[c]) out += shortest(*row[c]);
    }
    out += '\n';
  }
  return out;
}

double pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("correlation needs equal-length samples");
  const SummaryStats sa = summary_stats(a);
  const SummaryStats sb = summary_stats(b);
  const double cov = ((a.array() - sa.mean) * (b.array() - sb.mean)).sum() /
                     static_cast<double>(a.size() - 1);
  return cov / (sa.sd * sb.sd);
}

const char* build_describe() { return QRGMM_GIT_DESCRIBE; }

namespace {

// ---- shared replication machinery ----

struct ProblemSetup {
  TestProblem problem;
  BasisSpec basis;
  bool intercept = false;
  Eigen::VectorXd raw_x;    // raw query covariates (may be empty)
  Eigen::VectorXd model_x;  // query point in model-input coordinates
};

ProblemSetup prepare_single(const ExperimentConfig& cfg) {
  ProblemSetup setup;
  setup.problem = test_problem_by_name(cfg.problem);
  if (cfg.basis_kind == "identity") {
    setup.intercept = true;
    setup.basis = BasisSpec::identity(setup.problem.dim + 1);
  } else {
    setup.intercept = false;
    setup.basis = BasisSpec::polynomial(setup.problem.dim, cfg.degree);
  }
  setup.raw_x = cfg.x_star;
  if (cfg.x_star.size() > 0) {
    if (setup.intercept) {
      setup.model_x.resize(cfg.x_star.size() + 1);
      setup.model_x[0] = 1.0;
      setup.model_x.tail(cfg.x_star.size()) = cfg.x_star;
    } else {
      setup.model_x = cfg.x_star;
    }
  }
  return setup;
}

Dataset training_data(const ProblemSetup& setup, Eigen::Index n,
                      SeededRng& rng) {
  Dataset data = sample_dataset(setup.problem, n, rng);
  return setup.intercept ? add_intercept(data) : data;
}

Eigen::VectorXd to_model_input(const ProblemSetup& setup,
                               const Eigen::Ref<const Eigen::VectorXd>& raw) {
  if (!setup.intercept) return raw;
  Eigen::VectorXd x(raw.size() + 1);
  x[0] = 1.0;
  x.tail(raw.size()) = raw;
  return x;
}

// Calls body(cell, rep, rep_rng) for every pair; the rng of a pair depends
// only on (seed, cell, rep), so scheduling cannot change results. body must
// record its own failures instead of throwing.
template <typename Fn>
void for_each_replication(const ExperimentConfig& cfg, int cells, Fn&& body) {
  const SeededRng master(cfg.seed);
  const int R = cfg.replications;
  parallel_for(0, cells * R, cfg.threads, [&](int idx) {
    SeededRng rng = master.substream(static_cast<std::uint64_t>(idx));
    body(idx / R, idx % R, rng);
  });
}

struct CellStats {
  std::optional<double> mean;
  std::optional<double> sd;
  int ok = 0;
};

CellStats cell_stats(const std::vector<std::optional<double>>& slots, int lo,
                     int hi) {
  CellStats s;
  double sum = 0.0;
  for (int i = lo; i < hi; ++i)
    if (slots[static_cast<size_t>(i)]) {
      sum += *slots[static_cast<size_t>(i)];
      ++s.ok;
    }
  if (s.ok == 0) return s;
  const double mean = sum / s.ok;
  s.mean = mean;
  if (s.ok >= 2) {
    double ss = 0.0;
    for (int i = lo; i < hi; ++i)
      if (slots[static_cast<size_t>(i)]) {
        const double d = *slots[static_cast<size_t>(i)] - mean;
        ss += d * d;
      }
    s.sd = std::sqrt(ss / (s.ok - 1));
  }
  return s;
}

int count_failed(const std::vector<std::optional<double>>& slots) {
  int failed = 0;
  for (const auto& s : slots)
    if (!s) ++failed;
  return failed;
}

ExperimentConfig with_kind(const ExperimentConfig& cfg, const char* kind) {
  ExperimentConfig out = cfg;
  out.kind = kind;
  validate_config(out);
  return out;
}

// One KS-against-truth replication shared by convergence and m_effect.
std::optional<double> ks_replication(const ExperimentConfig& cfg,
                                     const ProblemSetup& setup, Eigen::Index n,
                                     int m, SeededRng& rng) {
  SeededRng data_rng = rng.substream(0);
  SeededRng gen_rng = rng.substream(1);
  try {
    const Dataset data = training_data(setup, n, data_rng);
    const GenerativeMetamodel model =
        fit_grid(data, setup.basis, m, cfg.solver, 1);
    const Eigen::VectorXd sample =
        generate(model, setup.model_x, cfg.samples, gen_rng);
    return ks_vs_cdf(sample, [&](double y) {
      return setup.problem.cdf(setup.raw_x, y);
    });
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

ExperimentResult run_convergence(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "convergence");
  const ProblemSetup setup = prepare_single(cfg);
  const int cells = static_cast<int>(cfg.n_grid.size());
  const int R = cfg.replications;
  std::vector<std::optional<double>> ks(static_cast<size_t>(cells * R));

  for_each_replication(cfg, cells, [&](int cell, int rep, SeededRng& rng) {
    const Eigen::Index n = cfg.n_grid[static_cast<size_t>(cell)];
    ks[static_cast<size_t>(cell * R + rep)] =
        ks_replication(cfg, setup, n, cfg.m_rule.resolve(n), rng);
  });

  ExperimentResult result;
  result.summary.columns = {"n", "m", "mean_ks", "sd_ks", "reps_ok",
                            "reps_failed"};
  result.replications.columns = {"n", "m", "rep", "ks"};
  for (int cell = 0; cell < cells; ++cell) {
    const Eigen::Index n = cfg.n_grid[static_cast<size_t>(cell)];
    const int m = cfg.m_rule.resolve(n);
    const CellStats s = cell_stats(ks, cell * R, (cell + 1) * R);
    result.summary.rows.push_back({static_cast<double>(n),
                                   static_cast<double>(m), s.mean, s.sd,
                                   static_cast<double>(s.ok),
                                   static_cast<double>(R - s.ok)});
    if (s.mean)
      result.aggregates["mean_ks_n" + std::to_string(n)] = *s.mean;
    for (int rep = 0; rep < R; ++rep)
      result.replications.rows.push_back(
          {static_cast<double>(n), static_cast<double>(m),
           static_cast<double>(rep), ks[static_cast<size_t>(cell * R + rep)]});
  }
  result.failed_replications = count_failed(ks);
  return result;
}

ExperimentResult run_m_effect(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "m_effect");
  const ProblemSetup setup = prepare_single(cfg);
  const Eigen::Index n = cfg.n_grid.front();
  const int cells = static_cast<int>(cfg.m_grid.size());
  const int R = cfg.replications;
  std::vector<std::optional<double>> ks(static_cast<size_t>(cells * R));

  for_each_replication(cfg, cells, [&](int cell, int rep, SeededRng& rng) {
    ks[static_cast<size_t>(cell * R + rep)] = ks_replication(
        cfg, setup, n, cfg.m_grid[static_cast<size_t>(cell)], rng);
  });

  ExperimentResult result;
  result.summary.columns = {"m", "mean_ks", "sd_ks", "reps_ok", "reps_failed"};
  result.replications.columns = {"m", "rep", "ks"};
  for (int cell = 0; cell < cells; ++cell) {
    const int m = cfg.m_grid[static_cast<size_t>(cell)];
    const CellStats s = cell_stats(ks, cell * R, (cell + 1) * R);
    result.summary.rows.push_back({static_cast<double>(m), s.mean, s.sd,
                                   static_cast<double>(s.ok),
                                   static_cast<double>(R - s.ok)});
    if (s.mean) result.aggregates["mean_ks_m" + std::to_string(m)] = *s.mean;
    for (int rep = 0; rep < R; ++rep)
      result.replications.rows.push_back(
          {static_cast<double>(m), static_cast<double>(rep),
           ks[static_cast<size_t>(cell * R + rep)]});
  }
  result.failed_replications = count_failed(ks);
  return result;
}

ExperimentResult run_crossing(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "crossing");
  const ProblemSetup setup = prepare_single(cfg);
  const int nc = static_cast<int>(cfg.c_grid.size());
  const int cells = static_cast<int>(cfg.n_grid.size()) * nc;
  const int R = cfg.replications;
  std::vector<std::optional<double>> crossing(static_cast<size_t>(cells * R));
  std::vector<std::optional<double>> re_crossing(
      static_cast<size_t>(cells * R));

  auto cell_nm = [&](int cell) {
    const Eigen::Index n = cfg.n_grid[static_cast<size_t>(cell / nc)];
    const double c = cfg.c_grid[static_cast<size_t>(cell % nc)];
    const int m = std::max<int>(
        2, static_cast<int>(std::llround(c * std::sqrt(static_cast<double>(n)))));
    return std::pair<Eigen::Index, int>(n, m);
  };

  for_each_replication(cfg, cells, [&](int cell, int rep, SeededRng& rng) {
    const auto [n, m] = cell_nm(cell);
    SeededRng data_rng = rng.substream(0);
    try {
      const Dataset data = training_data(setup, n, data_rng);
      const GenerativeMetamodel model =
          fit_grid(data, setup.basis, m, cfg.solver, 1);
      const size_t idx = static_cast<size_t>(cell * R + rep);
      crossing[idx] = crossing_frequency(model, setup.model_x);
      // The rearranged node sequence is sorted, so its crossing count is
      // zero by construction; computed honestly rather than assumed.
      const Eigen::VectorXd sorted = rearrange(model, setup.model_x);
      Eigen::VectorXd resorted = sorted;
      std::stable_sort(resorted.data(), resorted.data() + resorted.size());
      Eigen::Index mismatches = 0;
      for (Eigen::Index i = 0; i < sorted.size(); ++i)
        if (sorted[i] != resorted[i]) ++mismatches;
      re_crossing[idx] =
          static_cast<double>(mismatches) / static_cast<double>(sorted.size());
    } catch (const Error&) {
    }
  });

  ExperimentResult result;
  result.summary.columns = {"n",       "c",       "m",
                            "mean_crossing", "sd_crossing", "mean_rearranged",
                            "reps_ok", "reps_failed"};
  result.replications.columns = {"n", "c", "m", "rep", "crossing",
                                 "crossing_rearranged"};
  for (int cell = 0; cell < cells; ++cell) {
    const auto [n, m] = cell_nm(cell);
    const double c = cfg.c_grid[static_cast<size_t>(cell % nc)];
    const CellStats s = cell_stats(crossing, cell * R, (cell + 1) * R);
    const CellStats sr = cell_stats(re_crossing, cell * R, (cell + 1) * R);
    result.summary.rows.push_back(
        {static_cast<double>(n), c, static_cast<double>(m), s.mean, s.sd,
         sr.mean, static_cast<double>(s.ok), static_cast<double>(R - s.ok)});
    if (s.mean)
      result.aggregates["mean_crossing_n" + std::to_string(n) + "_c" +
                        shortest(c)] = *s.mean;
    if (sr.mean)
      result.aggregates["mean_rearranged_n" + std::to_string(n) + "_c" +
                        shortest(c)] = *sr.mean;
    for (int rep = 0; rep < R; ++rep) {
      const size_t idx = static_cast<size_t>(cell * R + rep);
      result.replications.rows.push_back(
          {static_cast<double>(n), c, static_cast<double>(m),
           static_cast<double>(rep), crossing[idx], re_crossing[idx]});
    }
  }
  result.failed_replications = count_failed(crossing);
  return result;
}

ExperimentResult run_table1(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "table1");
  const ProblemSetup setup = prepare_single(cfg);
  const int cells = static_cast<int>(cfg.n_grid.size());
  const int R = cfg.replications;
  const size_t slots = static_cast<size_t>(cells * R);
  std::vector<std::optional<double>> mean(slots), sd(slots), ks(slots),
      wd(slots);

  for_each_replication(cfg, cells, [&](int cell, int rep, SeededRng& rng) {
    const Eigen::Index n = cfg.n_grid[static_cast<size_t>(cell)];
    const int m = cfg.m_rule.resolve(n);
    SeededRng data_rng = rng.substream(0);
    SeededRng gen_rng = rng.substream(1);
    SeededRng test_rng = rng.substream(2);
    try {
      const Dataset train = training_data(setup, n, data_rng);
      const GenerativeMetamodel model =
          fit_grid(train, setup.basis, m, cfg.solver, 1);
      // Fresh covariate/response pairs; one generated draw per test point.
      const Dataset test = sample_dataset(setup.problem, cfg.samples, test_rng);
      Eigen::VectorXd generated(cfg.samples);
      Eigen::VectorXd input(setup.intercept ? test.p() + 1 : test.p());
      if (setup.intercept) input[0] = 1.0;
      for (Eigen::Index k = 0; k < cfg.samples; ++k) {
        input.tail(test.p()) = test.design.row(k).transpose();
        generated[k] =
            predict_quantile(model, input, gen_rng.next_uniform());
      }
      const size_t idx = static_cast<size_t>(cell * R + rep);
      const SummaryStats stats = summary_stats(generated);
      mean[idx] = stats.mean;
      sd[idx] = stats.sd;
      ks[idx] = ks_two_sample(generated, test.y());
      wd[idx] = wasserstein_1d(generated, test.y());
    } catch (const Error&) {
    }
  });

  ExperimentResult result;
  result.summary.columns = {"n",  "m",     "mean",  "mean_sd", "sd",
                            "sd_sd", "ks", "ks_sd", "wasserstein",
                            "wasserstein_sd", "reps_ok", "reps_failed"};
  result.replications.columns = {"n",  "m",  "rep",        "mean",
                                 "sd", "ks", "wasserstein"};
  for (int cell = 0; cell < cells; ++cell) {
    const Eigen::Index n = cfg.n_grid[static_cast<size_t>(cell)];
    const int m = cfg.m_rule.resolve(n);
    const CellStats sm = cell_stats(mean, cell * R, (cell + 1) * R);
    const CellStats ss = cell_stats(sd, cell * R, (cell + 1) * R);
    const CellStats sk = cell_stats(ks, cell * R, (cell + 1) * R);
    const CellStats sw = cell_stats(wd, cell * R, (cell + 1) * R);
    result.summary.rows.push_back(
        {static_cast<double>(n), static_cast<double>(m), sm.mean, sm.sd,
         ss.mean, ss.sd, sk.mean, sk.sd, sw.mean, sw.sd,
         static_cast<double>(sm.ok), static_cast<double>(R - sm.ok)});
    if (cell == 0) {
      if (sm.mean) result.aggregates["mean"] = *sm.mean;
      if (sm.sd) result.aggregates["mean_rep_sd"] = *sm.sd;
      if (ss.mean) result.aggregates["sd"] = *ss.mean;
      if (sk.mean) result.aggregates["ks"] = *sk.mean;
      if (sw.mean) result.aggregates["wasserstein"] = *sw.mean;
    }
    for (int rep = 0; rep < R; ++rep) {
      const size_t idx = static_cast<size_t>(cell * R + rep);
      result.replications.rows.push_back(
          {static_cast<double>(n), static_cast<double>(m),
           static_cast<double>(rep), mean[idx], sd[idx], ks[idx], wd[idx]});
    }
  }
  result.failed_replications = count_failed(mean);
  return result;
}

ExperimentResult run_rearrangement_compare(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "rearrangement_compare");
  const ProblemSetup setup = prepare_single(cfg);
  const Eigen::Index n = cfg.n_grid.front();
  const int m = cfg.m_rule.resolve(n);
  const int R = cfg.replications;
  const size_t slots = static_cast<size_t>(R);
  std::vector<std::optional<double>> mean_plain(slots), mean_re(slots),
      sd_plain(slots), sd_re(slots);
  double time_plain = 0.0, time_re = 0.0;

  // Replications run serially so the wall-clock section is not polluted by
  // sibling threads; the fits themselves may still use cfg.threads.
  const SeededRng master(cfg.seed);
  for (int rep = 0; rep < R; ++rep) {
    SeededRng rng = master.substream(static_cast<std::uint64_t>(rep));
    SeededRng data_rng = rng.substream(0);
    SeededRng gen_rng = rng.substream(1);
    SeededRng test_rng = rng.substream(2);
    try {
      const Dataset train = training_data(setup, n, data_rng);
      GenerativeMetamodel model =
          fit_grid(train, setup.basis, m, cfg.solver, cfg.threads);
      GenerativeMetamodel model_r = model;
      model_r.rearranged = true;

      // Paired test-set draws: same covariates, same uniform for both
      // variants.
      const Dataset test = sample_dataset(setup.problem, cfg.samples, test_rng);
      Eigen::VectorXd plain(cfg.samples), re(cfg.samples);
      Eigen::VectorXd input(setup.intercept ? test.p() + 1 : test.p());
      if (setup.intercept) input[0] = 1.0;
      for (Eigen::Index k = 0; k < cfg.samples; ++k) {
        input.tail(test.p()) = test.design.row(k).transpose();
        const double u = gen_rng.next_uniform();
        plain[k] = predict_quantile(model, input, u);
        re[k] = predict_quantile(model_r, input, u);
      }
      const SummaryStats sp = summary_stats(plain);
      const SummaryStats sr = summary_stats(re);
      mean_plain[static_cast<size_t>(rep)] = sp.mean;
      sd_plain[static_cast<size_t>(rep)] = sp.sd;
      mean_re[static_cast<size_t>(rep)] = sr.mean;
      sd_re[static_cast<size_t>(rep)] = sr.sd;

      // Wall time of bulk generation at the fixed query point, identical
      // uniform streams, best of three.
      using clock = std::chrono::steady_clock;
      double best_plain = 1e300, best_re = 1e300;
      for (int pass = 0; pass < 3; ++pass) {
        SeededRng ga = rng.substream(3);
        const auto t0 = clock::now();
        generate(model, setup.model_x, cfg.samples, ga);
        const auto t1 = clock::now();
        SeededRng gb = rng.substream(3);
        const auto t2 = clock::now();
        generate(model_r, setup.model_x, cfg.samples, gb);
        const auto t3 = clock::now();
        best_plain = std::min(
            best_plain, std::chrono::duration<double>(t1 - t0).count());
        best_re = std::min(best_re,
                           std::chrono::duration<double>(t3 - t2).count());
      }
      time_plain += best_plain;
      time_re += best_re;
    } catch (const Error&) {
    }
  }

  ExperimentResult result;
  result.summary.columns = {"n",        "m",         "mean_plain",
                            "mean_rearranged", "sd_plain", "sd_rearranged",
                            "reps_ok",  "reps_failed"};
  result.replications.columns = {"n",          "m",        "rep",
                                 "mean_plain", "mean_rearranged",
                                 "sd_plain",   "sd_rearranged"};
  const CellStats sp = cell_stats(mean_plain, 0, R);
  const CellStats sr = cell_stats(mean_re, 0, R);
  const CellStats dp = cell_stats(sd_plain, 0, R);
  const CellStats dr = cell_stats(sd_re, 0, R);
  result.summary.rows.push_back({static_cast<double>(n),
                                 static_cast<double>(m), sp.mean, sr.mean,
                                 dp.mean, dr.mean, static_cast<double>(sp.ok),
                                 static_cast<double>(R - sp.ok)});
  for (int rep = 0; rep < R; ++rep) {
    const size_t idx = static_cast<size_t>(rep);
    result.replications.rows.push_back(
        {static_cast<double>(n), static_cast<double>(m),
         static_cast<double>(rep), mean_plain[idx], mean_re[idx],
         sd_plain[idx], sd_re[idx]});
  }
  if (sp.mean) result.aggregates["mean_plain"] = *sp.mean;
  if (sr.mean) result.aggregates["mean_rearranged"] = *sr.mean;
  if (time_plain > 0.0) {
    result.aggregates["time_plain_s"] = time_plain;
    result.aggregates["time_rearranged_s"] = time_re;
    result.aggregates["time_ratio"] = time_re / time_plain;
  }
  result.failed_replications = count_failed(mean_plain);
  return result;
}

ExperimentResult run_multi_output(const ExperimentConfig& raw_cfg) {
  const ExperimentConfig cfg = with_kind(raw_cfg, "multi_output");
  const Eigen::Index n = cfg.n_grid.front();
  const int m = cfg.m_rule.resolve(n);
  const int R = cfg.replications;
  const size_t slots = static_cast<size_t>(R);
  std::vector<std::optional<double>> corr(slots), ks1(slots), ks2(slots);

  const std::vector<BasisSpec> bases = {BasisSpec::identity(3),
                                        BasisSpec::identity(4)};
  Eigen::VectorXd model_x(3);
  model_x << 1.0, cfg.x_star[0], cfg.x_star[1];

  for_each_replication(cfg, 1, [&](int, int rep, SeededRng& rng) {
    SeededRng data_rng = rng.substream(0);
    SeededRng gen_rng = rng.substream(1);
    SeededRng test_rng = rng.substream(2);
    try {
      const Dataset data =
          add_intercept(sample_bivariate_dataset(n, data_rng));
      const SequentialModel model = fit_multi(data, bases, m, cfg.solver, 1);
      const Eigen::MatrixXd out =
          generate_multi(model, model_x, cfg.samples, gen_rng);
      const Eigen::MatrixXd oracle =
          sample_bivariate_conditional(cfg.x_star, cfg.samples, test_rng);
      const size_t idx = static_cast<size_t>(rep);
      corr[idx] = pearson_correlation(out.col(0), out.col(1));
      ks1[idx] = ks_two_sample(out.col(0), oracle.col(0));
      ks2[idx] = ks_two_sample(out.col(1), oracle.col(1));
    } catch (const Error&) {
    }
  });

  ExperimentResult result;
  result.summary.columns = {"n",     "m",        "corr",    "corr_sd",
                            "ks_y1", "ks_y1_sd", "ks_y2",   "ks_y2_sd",
                            "reps_ok", "reps_failed"};
  result.replications.columns = {"n", "m", "rep", "corr", "ks_y1", "ks_y2"};
  const CellStats sc = cell_stats(corr, 0, R);
  const CellStats s1 = cell_stats(ks1, 0, R);
  const CellStats s2 = cell_stats(ks2, 0, R);
  result.summary.rows.push_back(
      {static_cast<double>(n), static_cast<double>(m), sc.mean, sc.sd, s1.mean,
       s1.sd, s2.mean, s2.sd, static_cast<double>(sc.ok),
       static_cast<double>(R - sc.ok)});
  for (int rep = 0; rep < R; ++rep) {
    const size_t idx = static_cast<size_t>(rep);
    result.replications.rows.push_back({static_cast<double>(n),
                                        static_cast<double>(m),
                                        static_cast<double>(rep), corr[idx],
                                        ks1[idx], ks2[idx]});
  }
  if (sc.mean) result.aggregates["corr"] = *sc.mean;
  if (s1.mean) result.aggregates["ks_y1"] = *s1.mean;
  if (s2.mean) result.aggregates["ks_y2"] = *s2.mean;
  result.failed_replications = count_failed(corr);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.kind == "convergence") return run_convergence(cfg);
  if (cfg.kind == "m_effect") return run_m_effect(cfg);
  if (cfg.kind == "crossing") return run_crossing(cfg);
  if (cfg.kind == "table1") return run_table1(cfg);
  if (cfg.kind == "rearrangement_compare")
    return run_rearrangement_compare(cfg);
  return run_multi_output(cfg);
}

void write_experiment(const ExperimentResult& result,
                      const ExperimentConfig& config,
                      const std::string& out_prefix) {
  {
    std::ofstream out(out_prefix + ".csv");
    if (!out) throw CorruptFile("cannot open " + out_prefix + ".csv");
    out << to_csv(result.summary);
  }
  {
    std::ofstream out(out_prefix + "_replications.csv");
    if (!out)
      throw CorruptFile("cannot open " + out_prefix + "_replications.csv");
    out << to_csv(result.replications);
  }
  json sidecar{{"config", json::parse(config_to_json(config))},
               {"build", build_describe()},
               {"failed_replications", result.failed_replications},
               {"aggregates", result.aggregates}};
  std::ofstream out(out_prefix + ".json");
  if (!out) throw CorruptFile("cannot open " + out_prefix + ".json");
  out << sidecar.dump(1, '\t') << '\n';
}

}  // namespace qrgmm
