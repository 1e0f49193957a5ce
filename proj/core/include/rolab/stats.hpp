#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace rolab {
namespace stats {

double mean(std::span<const double> values);

// Even counts take the midpoint of the central pair.
double median(std::span<const double> values);

// Interquartile mean: sort, drop floor(n/4) smallest and floor(n/4)
// largest, average the rest. Robust to outliers with few runs.
double iqm(std::span<const double> values);

// 100 * (raw - ref_random) / (ref_expert - ref_random).
// Hard error when the references coincide.
double normalize_score(double raw, double ref_random, double ref_expert);

// round(100 * (attacked/clean - 1)) to the nearest integer, ties away
// from zero.
long long percent_change(double attacked, double clean);

using Statistic = std::function<double(std::span<const double>)>;

// Stratified percentile bootstrap. Protocol (pinned so an independent
// re-implementation can match it exactly):
//   rng = mt19937_64(seed)
//   repeat `resamples` times:
//     for each stratum, in the order given:
//       draw |stratum| values with replacement, index = rng() % |stratum|
//     statistic on the pooled resample
//   sort the resample statistics; interval = [q(alpha/2), q(1-alpha/2)]
//   with linearly interpolated quantiles, h = (n-1)p.
// Every stratum must be non-empty.
std::pair<double, double> bootstrap_ci(
    const std::vector<std::vector<double>>& strata, const Statistic& statistic,
    int resamples = 2000, double level = 0.95, std::uint64_t seed = 0);

}  // namespace stats
}  // namespace rolab
