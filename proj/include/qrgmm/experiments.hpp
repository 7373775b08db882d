#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrgmm/solver.hpp"

namespace qrgmm {

// How the grid size is chosen from the training size.
struct MRule {
  enum class Kind { sqrt_n, fixed, c_sqrt_n };
  Kind kind = Kind::sqrt_n;
  int fixed_m = 0;
  double c = 1.0;

  int resolve(Eigen::Index n) const;
};

struct ExperimentConfig {
  std::string kind;  // convergence | m_effect | crossing | table1 |
                     // rearrangement_compare | multi_output
  std::string problem = "tp1";  // tp1 | tp2 | bivariate
  std::string basis_kind = "identity";  // identity bases get an intercept
                                        // column prepended automatically
  int degree = 3;                       // polynomial basis only
  std::vector<Eigen::Index> n_grid;
  std::vector<int> m_grid;     // m_effect sweep
  std::vector<double> c_grid;  // crossing sweep (m = c sqrt(n))
  MRule m_rule;
  int replications = 10;
  int samples = 100000;     // K
  Eigen::VectorXd x_star;   // raw covariates of the query point
  std::uint64_t seed = 0;
  int threads = 1;
  SolverOptions solver;
};

// Parse/emit the JSON config format (also used as the sidecar echo).
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

// Rectangular numeric table; empty cells mark metrics lost to a failed
// replication.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
};

std::string to_csv(const ResultTable& table);

struct ExperimentResult {
  ResultTable summary;       // one row per experiment cell
  ResultTable replications;  // one row per (cell, replication)
  int failed_replications = 0;
  // Headline numbers for programmatic checks; includes any wall-clock
  // figures, which never enter the CSV tables.
  std::map<std::string, double> aggregates;
};

// Each runner is deterministic given (config, config.seed): result tables
// rerun byte-identical regardless of thread count. Failed replications are
// counted and their rows kept with empty metric cells, never dropped.
ExperimentResult run_convergence(const ExperimentConfig& config);
ExperimentResult run_m_effect(const ExperimentConfig& config);
ExperimentResult run_crossing(const ExperimentConfig& config);
ExperimentResult run_table1(const ExperimentConfig& config);
ExperimentResult run_rearrangement_compare(const ExperimentConfig& config);
ExperimentResult run_multi_output(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

// Writes <out_prefix>.csv (summary), <out_prefix>_replications.csv, and
// <out_prefix>.json (config echo, build stamp, failure count, aggregates —
// the one file allowed to differ between reruns, via its timing section).
void write_experiment(const ExperimentResult& result,
                      const ExperimentConfig& config,
                      const std::string& out_prefix);

// Pearson correlation with the same n-1 normalization as summary_stats.
double pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b);

// Build stamp compiled into the library (git describe at configure time).
const char* build_describe();

}  // namespace qrgmm
