#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rolab/stats.hpp"

namespace rolab {

inline const std::vector<std::string> kAttackKinds = {
    "none", "random", "critic", "actor", "robust_critic"};

// One evaluation run: a (task, tier, method, attack, seed) cell with its
// per-episode returns and the normalized score of the episode mean.
struct RunScores {
  std::string task;
  std::string tier;
  std::string method;
  std::string attack;
  std::uint64_t seed = 0;
  std::vector<double> returns;
  double normalized_score = 0.0;
  std::string checkpoint_hash;
};

// Run database: JSON-lines, one RunScores per line. Appends are keyed and
// de-duplicated by (checkpoint_hash, attack, seed); re-running an eval with
// identical flags leaves the file unchanged.
std::vector<RunScores> load_run_db(const std::filesystem::path& file);
std::size_t append_run_db(const std::filesystem::path& file,
                          const std::vector<RunScores>& runs);

struct AggregateOptions {
  std::vector<std::string> group_by{"method", "attack"};  // of task|tier|method|attack
  std::string metric = "iqm";  // iqm | mean | median, used for pct-change + CI ordering
  int resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct GroupStats {
  std::vector<std::pair<std::string, std::string>> key;  // (field, value)
  int n = 0;
  double iqm = 0.0, mean = 0.0, median = 0.0;
  std::pair<double, double> ci_iqm, ci_mean, ci_median;
  bool has_pct_change = false;
  long long pct_change_vs_clean = 0;  // vs the sibling group with attack=none
};

struct AggregateReport {
  std::string metric;
  std::vector<std::string> group_by;
  std::vector<GroupStats> groups;
};

// Groups normalized scores by the requested fields and computes IQM, mean
// and median with stratified bootstrap CIs. Strata are tasks (and tiers,
// when not grouped on) so cross-task aggregation resamples within task, the
// overall aggregation within (task, tier). Results are independent of input
// order. Throws on empty input or unknown group field.
AggregateReport aggregate(const std::vector<RunScores>& runs,
                          const AggregateOptions& options);

// Per-(task, method) table over the five attack columns; cells are
// mean +- std of normalized scores over seeds.
std::string render_attack_table(const std::vector<RunScores>& runs);
void write_attack_table_csv(const std::filesystem::path& file,
                            const std::vector<RunScores>& runs);

std::string render_aggregate_table(const AggregateReport& report);
void write_aggregate_csv(const std::filesystem::path& file,
                         const AggregateReport& report);

// Reference-table fixture: one row per (task, method) with (mean, std)
// cells per attack column.
struct FixtureRow {
  std::string task, method;
  std::map<std::string, std::pair<double, double>> cells;  // attack -> (mean, std)
};
std::vector<FixtureRow> load_fixture_table(const std::filesystem::path& file);

}  // namespace rolab
