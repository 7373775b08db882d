#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace qrgmm {

// Exact sup-distance between the two empirical CDFs, by one sorted-merge
// sweep; duplicates are collapsed so ties are handled without tolerances.
double ks_two_sample(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b);

// One-sample KS: max over order statistics y_(i) of
// max(i/K - cdf(y_(i)), cdf(y_(i)) - (i-1)/K).
double ks_vs_cdf(const Eigen::Ref<const Eigen::VectorXd>& sample,
                 const std::function<double(double)>& cdf);

// 1-D Wasserstein distance: the integral over u in (0,1) of
// |F_a^{-1}(u) - F_b^{-1}(u)|, evaluated exactly for the two empirical step
// quantile functions by sweeping their merged breakpoints. For equal sizes
// this reduces to the mean absolute difference of sorted samples.
double wasserstein_1d(const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b);

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // denominator n-1
};

double sample_mean(const Eigen::Ref<const Eigen::VectorXd>& sample);
SummaryStats summary_stats(const Eigen::Ref<const Eigen::VectorXd>& sample);

// One replication's worth of fidelity numbers; fields are set only when the
// corresponding metric was requested.
struct MetricReport {
  std::uint64_t seed = 0;
  Eigen::Index n = 0;
  int m = 0;
  Eigen::Index k = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> ks;
  std::optional<double> wasserstein;
};

// CSV rendering: fixed column order seed,n,m,K,mean,sd,ks,wasserstein;
// absent metrics render as empty cells. Values use shortest round-trippable
// decimals.
std::string metric_csv_header();
std::string metric_csv_row(const MetricReport& report);

}  // namespace qrgmm
