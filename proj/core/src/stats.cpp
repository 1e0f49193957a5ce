#include "rolab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rolab/rng.hpp"

namespace rolab {
namespace stats {

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqm(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("iqm: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t trim = v.size() / 4;
  double s = 0.0;
  for (std::size_t i = trim; i < v.size() - trim; ++i) s += v[i];
  return s / static_cast<double>(v.size() - 2 * trim);
}

double normalize_score(double raw, double ref_random, double ref_expert) {
  if (ref_expert == ref_random)
    throw std::invalid_argument("normalize_score: identical reference scores");
  return 100.0 * (raw - ref_random) / (ref_expert - ref_random);
}

long long percent_change(double attacked, double clean) {
  return std::llround(100.0 * (attacked / clean - 1.0));
}

namespace {
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}
}  // namespace

std::pair<double, double> bootstrap_ci(
    const std::vector<std::vector<double>>& strata, const Statistic& statistic,
    int resamples, double level, std::uint64_t seed) {
  if (strata.empty()) throw std::invalid_argument("bootstrap_ci: no strata");
  std::size_t total = 0;
  for (const auto& g : strata) {
    if (g.empty()) throw std::invalid_argument("bootstrap_ci: empty stratum");
    total += g.size();
  }
  if (resamples < 1) throw std::invalid_argument("bootstrap_ci: resamples < 1");

  Rng rng(seed);
  std::vector<double> pooled(total);
  std::vector<double> stats_out(static_cast<std::size_t>(resamples));
  for (int rep = 0; rep < resamples; ++rep) {
    std::size_t k = 0;
    for (const auto& g : strata)
      for (std::size_t i = 0; i < g.size(); ++i)
        pooled[k++] = g[rng.uniform_index(g.size())];
    stats_out[static_cast<std::size_t>(rep)] = statistic(pooled);
  }
  std::sort(stats_out.begin(), stats_out.end());
  const double alpha = 1.0 - level;
  return {quantile_sorted(stats_out, alpha / 2.0),
          quantile_sorted(stats_out, 1.0 - alpha / 2.0)};
}

}  // namespace stats
}  // namespace rolab
