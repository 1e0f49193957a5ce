#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "rolab/report.hpp"
#include "rolab/stats.hpp"

using namespace rolab;

namespace {

const std::filesystem::path kFixtures = ROLAB_FIXTURE_DIR;

RunScores make_run(const std::string& task, const std::string& tier,
                   const std::string& method, const std::string& attack,
                   std::uint64_t seed, double score) {
  RunScores r;
  r.task = task;
  r.tier = tier;
  r.method = method;
  r.attack = attack;
  r.seed = seed;
  r.returns = {score};
  r.normalized_score = score;
  r.checkpoint_hash = method + "-" + tier + "-" + task + "-" + std::to_string(seed);
  return r;
}

}  // namespace

TEST_CASE("appendix fixtures: MEAN rows reproduced to +-0.01") {
  const std::vector<std::string> files = {"expert.csv", "medium_expert.csv",
                                          "medium_replay.csv"};
  const std::vector<std::string> attacks = {"clean", "random", "critic",
                                            "actor", "robust_critic"};
  for (const auto& f : files) {
    auto rows = load_fixture_table(kFixtures / f);
    REQUIRE(rows.size() == 12);
    std::vector<std::string> methods = {"TD3BC", "TD3BC+CriticDefense",
                                        "TD3BC+ActorDefense"};
    for (const auto& method : methods) {
      const FixtureRow* mean_row = nullptr;
      std::vector<const FixtureRow*> task_rows;
      for (const auto& row : rows) {
        if (row.method != method) continue;
        if (row.task == "MEAN")
          mean_row = &row;
        else
          task_rows.push_back(&row);
      }
      REQUIRE(mean_row != nullptr);
      REQUIRE(task_rows.size() == 3);
      for (const auto& attack : attacks) {
        std::vector<double> means, stds;
        for (const auto* row : task_rows) {
          means.push_back(row->cells.at(attack).first);
          stds.push_back(row->cells.at(attack).second);
        }
        CHECK(std::abs(stats::mean(means) - mean_row->cells.at(attack).first) <=
              0.01);
        CHECK(std::abs(stats::mean(stds) - mean_row->cells.at(attack).second) <=
              0.01);
      }
    }
  }
}

TEST_CASE("percent fixtures: every parenthetical reproduced exactly") {
  auto rows = load_fixture_table(kFixtures / "walker_iqm_attacks.csv");
  REQUIRE(rows.size() == 3);
  int checked = 0;
  for (const auto& row : rows) {
    const double clean = row.cells.at("clean").first;
    for (const std::string attack :
         {"random", "critic", "actor", "robust_critic"}) {
      const double value = row.cells.at(attack).first;
      const long long want =
          static_cast<long long>(row.cells.at(attack + "_pct").first);
      CHECK(stats::percent_change(value, clean) == want);
      ++checked;
    }
  }
  CHECK(checked == 12);
}

TEST_CASE("aggregate reproduces the fixture MEAN rows via the mean metric") {
  auto rows = load_fixture_table(kFixtures / "expert.csv");
  std::vector<RunScores> runs;
  for (const auto& row : rows) {
    if (row.task == "MEAN") continue;
    for (const auto& [attack, cell] : row.cells)
      runs.push_back(make_run(row.task, "expert", row.method, attack, 0, cell.first));
  }
  AggregateOptions opt;
  opt.group_by = {"method", "attack"};
  opt.metric = "mean";
  opt.resamples = 200;
  auto report = aggregate(runs, opt);
  for (const auto& g : report.groups) {
    std::string method, attack;
    for (const auto& [f, v] : g.key) {
      if (f == "method") method = v;
      if (f == "attack") attack = v;
    }
    for (const auto& row : rows) {
      if (row.task == "MEAN" && row.method == method)
        CHECK(std::abs(g.mean - row.cells.at(attack).first) <= 0.01);
    }
  }
}

TEST_CASE("aggregate: single run collapses to the score with zero-width CI") {
  std::vector<RunScores> runs{make_run("pointmass", "expert", "TD3BC", "none", 0, 42.5)};
  AggregateOptions opt;
  opt.resamples = 100;
  auto report = aggregate(runs, opt);
  REQUIRE(report.groups.size() == 1);
  const auto& g = report.groups.front();
  CHECK(g.n == 1);
  CHECK(g.iqm == 42.5);
  CHECK(g.mean == 42.5);
  CHECK(g.median == 42.5);
  CHECK(g.ci_iqm == std::pair<double, double>{42.5, 42.5});
}

TEST_CASE("aggregate: invariant under run permutation") {
  std::mt19937_64 rng(5);
  std::vector<RunScores> runs;
  for (const std::string task : {"pointmass", "pendulum"})
    for (const std::string attack : {"none", "critic"})
      for (std::uint64_t seed = 0; seed < 5; ++seed)
        runs.push_back(make_run(task, "expert", "TD3BC", attack, seed,
                                static_cast<double>((seed * 13 + attack.size() * 7 +
                                                     task.size()) %
                                                    100)));
  std::vector<RunScores> shuffled = runs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  AggregateOptions opt;
  opt.group_by = {"method", "attack"};
  opt.resamples = 500;
  auto a = aggregate(runs, opt);
  auto b = aggregate(shuffled, opt);
  REQUIRE(a.groups.size() == b.groups.size());
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    CHECK(a.groups[i].iqm == b.groups[i].iqm);
    CHECK(a.groups[i].ci_iqm == b.groups[i].ci_iqm);
    CHECK(a.groups[i].ci_median == b.groups[i].ci_median);
  }
}

TEST_CASE("aggregate: percent change against the clean sibling") {
  std::vector<RunScores> runs;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    runs.push_back(make_run("pointmass", "expert", "TD3BC", "none", seed, 80.0));
    runs.push_back(make_run("pointmass", "expert", "TD3BC", "critic", seed, 40.0));
  }
  AggregateOptions opt;
  opt.group_by = {"method", "attack"};
  opt.resamples = 100;
  auto report = aggregate(runs, opt);
  bool found = false;
  for (const auto& g : report.groups) {
    for (const auto& [f, v] : g.key)
      if (f == "attack" && v == "critic") {
        CHECK(g.has_pct_change);
        CHECK(g.pct_change_vs_clean == -50);
        found = true;
      }
  }
  CHECK(found);
}

TEST_CASE("run db: append is keyed and de-duplicated") {
  const auto dir = std::filesystem::temp_directory_path() / "rolab_rundb_test";
  std::filesystem::create_directories(dir);
  const auto db = dir / "runs.jsonl";
  std::filesystem::remove(db);

  std::vector<RunScores> batch{make_run("pointmass", "expert", "TD3BC", "none", 0, 10.0),
                               make_run("pointmass", "expert", "TD3BC", "none", 1, 11.0)};
  CHECK(append_run_db(db, batch) == 2);
  CHECK(append_run_db(db, batch) == 0);  // idempotent re-append
  auto extra = make_run("pointmass", "expert", "TD3BC", "critic", 0, 5.0);
  CHECK(append_run_db(db, {batch[0], extra}) == 1);
  auto all = load_run_db(db);
  CHECK(all.size() == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("attack table renders all five columns") {
  std::vector<RunScores> runs;
  for (const auto& attack : kAttackKinds)
    for (std::uint64_t seed = 0; seed < 3; ++seed)
      runs.push_back(make_run("pointmass", "expert", "TD3BC", attack, seed,
                              50.0 + static_cast<double>(seed)));
  const std::string table = render_attack_table(runs);
  for (const std::string col : {"Clean", "Random", "Critic", "Actor", "RobustCritic"})
    CHECK(table.find(col) != std::string::npos);
  CHECK(table.find("51.00+0.82") != std::string::npos);
}
