#include "qrgmm/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

#include "qrgmm/errors.hpp"

namespace qrgmm {
namespace {

std::vector<double> sorted_copy(const Eigen::Ref<const Eigen::VectorXd>& v,
                                const char* who) {
  if (v.size() == 0) throw EmptySample(std::string(who) + ": empty sample");
  if (!v.allFinite())
    throw NonFinite(std::string(who) + ": sample has non-finite values");
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

double ks_two_sample(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  const std::vector<double> sa = sorted_copy(a, "ks_two_sample");
  const std::vector<double> sb = sorted_copy(b, "ks_two_sample");
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (i == sa.size()) v = sb[j];
    else if (j == sb.size()) v = sa[i];
    else v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / na -
                                     static_cast<double>(j) / nb));
  }
  return worst;
}

double ks_vs_cdf(const Eigen::Ref<const Eigen::VectorXd>& sample,
                 const std::function<double(double)>& cdf) {
  const std::vector<double> s = sorted_copy(sample, "ks_vs_cdf");
  const double k = static_cast<double>(s.size());
  double worst = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    const double hi = static_cast<double>(i + 1) / k - f;
    const double lo = f - static_cast<double>(i) / k;
    worst = std::max({worst, hi, lo});
  }
  return worst;
}

double wasserstein_1d(const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b) {
  const std::vector<double> sa = sorted_copy(a, "wasserstein_1d");
  const std::vector<double> sb = sorted_copy(b, "wasserstein_1d");
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  size_t i = 0, j = 0;
  double u_prev = 0.0;
  double total = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double ua = static_cast<double>(i + 1) / na;
    const double ub = static_cast<double>(j + 1) / nb;
    const double u_next = std::min(ua, ub);
    total += (u_next - u_prev) * std::abs(sa[i] - sb[j]);
    if (ua == u_next) ++i;
    if (ub == u_next) ++j;
    u_prev = u_next;
  }
  return total;
}

double sample_mean(const Eigen::Ref<const Eigen::VectorXd>& sample) {
  if (sample.size() == 0) throw EmptySample("sample_mean: empty sample");
  if (!sample.allFinite())
    throw NonFinite("sample_mean: sample has non-finite values");
  return sample.mean();
}

SummaryStats summary_stats(const Eigen::Ref<const Eigen::VectorXd>& sample) {
  const double mean = sample_mean(sample);
  if (sample.size() < 2)
    throw SingletonSd("summary_stats: sd needs at least two points");
  const double ss = (sample.array() - mean).square().sum();
  SummaryStats stats;
  stats.mean = mean;
  stats.sd = std::sqrt(ss / static_cast<double>(sample.size() - 1));
  return stats;
}

std::string metric_csv_header() { return "seed,n,m,K,mean,sd,ks,wasserstein"; }

std::string metric_csv_row(const MetricReport& r) {
  std::string row = std::to_string(r.seed) + "," + std::to_string(r.n) + "," +
                    std::to_string(r.m) + "," + std::to_string(r.k);
  for (const auto& field : {r.mean, r.sd, r.ks, r.wasserstein}) {
    row += ",";
    if (field) row += shortest(*field);
  }
  return row;
}

}  // namespace qrgmm
