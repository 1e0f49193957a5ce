#include "rolab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rolab/errors.hpp"

namespace rolab {

namespace {

using nlohmann::json;

json run_to_json(const RunScores& r) {
  json j;
  j["task"] = r.task;
  j["tier"] = r.tier;
  j["method"] = r.method;
  j["attack"] = r.attack;
  j["seed"] = r.seed;
  j["returns"] = r.returns;
  j["normalized_score"] = r.normalized_score;
  j["checkpoint_hash"] = r.checkpoint_hash;
  return j;
}

RunScores run_from_json(const json& j) {
  RunScores r;
  r.task = j.at("task").get<std::string>();
  r.tier = j.at("tier").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.attack = j.at("attack").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.returns = j.at("returns").get<std::vector<double>>();
  r.normalized_score = j.at("normalized_score").get<double>();
  r.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
  return r;
}

std::string dedup_key(const RunScores& r) {
  return r.checkpoint_hash + "|" + r.attack + "|" + std::to_string(r.seed);
}

std::string field_of(const RunScores& r, const std::string& field) {
  if (field == "task") return r.task;
  if (field == "tier") return r.tier;
  if (field == "method") return r.method;
  if (field == "attack") return r.attack;
  throw std::invalid_argument("aggregate: unknown group field " + field);
}

bool run_order(const RunScores& a, const RunScores& b) {
  return std::tie(a.task, a.tier, a.method, a.attack, a.seed, a.checkpoint_hash) <
         std::tie(b.task, b.tier, b.method, b.attack, b.seed, b.checkpoint_hash);
}

double cell_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double cell_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = cell_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::vector<RunScores> load_run_db(const std::filesystem::path& file) {
  std::vector<RunScores> out;
  std::ifstream in(file);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(run_from_json(json::parse(line)));
  }
  return out;
}

std::size_t append_run_db(const std::filesystem::path& file,
                          const std::vector<RunScores>& runs) {
  std::set<std::string> existing;
  for (const auto& r : load_run_db(file)) existing.insert(dedup_key(r));
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::app);
  if (!out) throw std::runtime_error("append_run_db: cannot open " + file.string());
  std::size_t appended = 0;
  for (const auto& r : runs) {
    const std::string key = dedup_key(r);
    if (existing.count(key)) continue;
    existing.insert(key);
    out << run_to_json(r).dump() << "\n";
    ++appended;
  }
  return appended;
}

AggregateReport aggregate(const std::vector<RunScores>& runs,
                          const AggregateOptions& options) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  for (const auto& f : options.group_by) (void)field_of(runs.front(), f);

  std::vector<RunScores> sorted = runs;
  std::sort(sorted.begin(), sorted.end(), run_order);

  const bool task_grouped =
      std::count(options.group_by.begin(), options.group_by.end(), "task") > 0;
  const bool tier_grouped =
      std::count(options.group_by.begin(), options.group_by.end(), "tier") > 0;

  // group key -> stratum label -> scores
  std::map<std::string, std::map<std::string, std::vector<double>>> strata;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> keys;
  for (const auto& r : sorted) {
    std::string gk;
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& f : options.group_by) {
      kv.emplace_back(f, field_of(r, f));
      gk += f + "=" + field_of(r, f) + ";";
    }
    std::string stratum;
    if (!task_grouped) stratum += r.task;
    stratum += "|";
    if (!tier_grouped) stratum += r.tier;
    strata[gk][stratum].push_back(r.normalized_score);
    keys[gk] = std::move(kv);
  }

  stats::Statistic pick;
  if (options.metric == "iqm")
    pick = [](std::span<const double> v) { return stats::iqm(v); };
  else if (options.metric == "mean")
    pick = [](std::span<const double> v) { return stats::mean(v); };
  else if (options.metric == "median")
    pick = [](std::span<const double> v) { return stats::median(v); };
  else
    throw std::invalid_argument("aggregate: unknown metric " + options.metric);

  AggregateReport report;
  report.metric = options.metric;
  report.group_by = options.group_by;

  std::map<std::string, double> metric_by_group;
  for (const auto& [gk, groups] : strata) {
    GroupStats g;
    g.key = keys[gk];
    std::vector<std::vector<double>> stratum_vecs;
    std::vector<double> pooled;
    for (const auto& [label, scores] : groups) {
      stratum_vecs.push_back(scores);
      pooled.insert(pooled.end(), scores.begin(), scores.end());
    }
    g.n = static_cast<int>(pooled.size());
    g.iqm = stats::iqm(pooled);
    g.mean = stats::mean(pooled);
    g.median = stats::median(pooled);
    g.ci_iqm = stats::bootstrap_ci(
        stratum_vecs, [](std::span<const double> v) { return stats::iqm(v); },
        options.resamples, options.level, options.seed);
    g.ci_mean = stats::bootstrap_ci(
        stratum_vecs, [](std::span<const double> v) { return stats::mean(v); },
        options.resamples, options.level, options.seed);
    g.ci_median = stats::bootstrap_ci(
        stratum_vecs,
        [](std::span<const double> v) { return stats::median(v); },
        options.resamples, options.level, options.seed);

    auto check_ci = [&](const std::pair<double, double>& ci, double point) {
      if (!(ci.first <= point && point <= ci.second))
        throw std::runtime_error("aggregate: CI does not bracket the estimate");
    };
    check_ci(g.ci_iqm, g.iqm);
    check_ci(g.ci_mean, g.mean);
    check_ci(g.ci_median, g.median);

    double point = g.iqm;
    if (options.metric == "mean") point = g.mean;
    if (options.metric == "median") point = g.median;
    metric_by_group[gk] = point;
    report.groups.push_back(std::move(g));
  }

  // percent change vs the sibling group whose attack is "none"
  for (auto& g : report.groups) {
    std::string gk_clean;
    bool has_attack = false;
    bool is_clean = false;
    for (const auto& [f, v] : g.key) {
      std::string vv = v;
      if (f == "attack") {
        has_attack = true;
        is_clean = (v == "none");
        vv = "none";
      }
      gk_clean += f + "=" + vv + ";";
    }
    if (!has_attack || is_clean) continue;
    auto it = metric_by_group.find(gk_clean);
    if (it == metric_by_group.end() || it->second == 0.0) continue;
    double point = g.iqm;
    if (options.metric == "mean") point = g.mean;
    if (options.metric == "median") point = g.median;
    g.has_pct_change = true;
    g.pct_change_vs_clean = stats::percent_change(point, it->second);
  }
  return report;
}

namespace {

struct TableRow {
  std::string task, method;
  std::map<std::string, std::vector<double>> scores;  // attack -> per-seed
};

std::vector<TableRow> collect_rows(const std::vector<RunScores>& runs) {
  std::vector<RunScores> sorted = runs;
  std::sort(sorted.begin(), sorted.end(), run_order);
  std::vector<TableRow> rows;
  std::map<std::string, std::size_t> index;
  for (const auto& r : sorted) {
    const std::string key = r.task + "|" + r.tier + "|" + r.method;
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = rows.size();
      TableRow row;
      row.task = r.tier.empty() ? r.task : r.task + " (" + r.tier + ")";
      row.method = r.method;
      rows.push_back(std::move(row));
      it = index.find(key);
    }
    rows[it->second].scores[r.attack].push_back(r.normalized_score);
  }
  return rows;
}

const std::vector<std::pair<std::string, std::string>> kColumns = {
    {"none", "Clean"},
    {"random", "Random"},
    {"critic", "Critic"},
    {"actor", "Actor"},
    {"robust_critic", "RobustCritic"}};

}  // namespace

std::string render_attack_table(const std::vector<RunScores>& runs) {
  auto rows = collect_rows(runs);
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-28s %-28s", "Task", "Method");
  out << buf;
  for (const auto& [_, title] : kColumns) {
    std::snprintf(buf, sizeof(buf), " %16s", title.c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-28s %-28s", row.task.c_str(),
                  row.method.c_str());
    out << buf;
    for (const auto& [attack, _] : kColumns) {
      auto it = row.scores.find(attack);
      if (it == row.scores.end()) {
        std::snprintf(buf, sizeof(buf), " %16s", "-");
      } else {
        char cell[48];
        std::snprintf(cell, sizeof(cell), "%.2f+%.2f", cell_mean(it->second),
                      cell_std(it->second));
        std::snprintf(buf, sizeof(buf), " %16s", cell);
      }
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

void write_attack_table_csv(const std::filesystem::path& file,
                            const std::vector<RunScores>& runs) {
  auto rows = collect_rows(runs);
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("write_attack_table_csv: cannot open " + file.string());
  out << "task,method";
  for (const auto& [attack, _] : kColumns)
    out << "," << attack << "_mean," << attack << "_std";
  out << "\n";
  for (const auto& row : rows) {
    out << row.task << "," << row.method;
    for (const auto& [attack, _] : kColumns) {
      auto it = row.scores.find(attack);
      if (it == row.scores.end()) {
        out << ",,";
      } else {
        char cell[64];
        std::snprintf(cell, sizeof(cell), ",%.6f,%.6f", cell_mean(it->second),
                      cell_std(it->second));
        out << cell;
      }
    }
    out << "\n";
  }
}

std::string render_aggregate_table(const AggregateReport& report) {
  std::ostringstream out;
  out << "metric: " << report.metric << "\n";
  char buf[512];
  for (const auto& g : report.groups) {
    std::string key;
    for (const auto& [f, v] : g.key) key += f + "=" + v + " ";
    double point = g.iqm;
    std::pair<double, double> ci = g.ci_iqm;
    if (report.metric == "mean") point = g.mean, ci = g.ci_mean;
    if (report.metric == "median") point = g.median, ci = g.ci_median;
    std::snprintf(buf, sizeof(buf), "%-52s n=%-4d %8.2f  [%8.2f, %8.2f]",
                  key.c_str(), g.n, point, ci.first, ci.second);
    out << buf;
    if (g.has_pct_change) {
      std::snprintf(buf, sizeof(buf), "  (%+lld%%)",
                    static_cast<long long>(g.pct_change_vs_clean));
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

void write_aggregate_csv(const std::filesystem::path& file,
                         const AggregateReport& report) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("write_aggregate_csv: cannot open " + file.string());
  for (const auto& f : report.group_by) out << f << ",";
  out << "n,iqm,iqm_lo,iqm_hi,mean,mean_lo,mean_hi,median,median_lo,median_hi,"
         "pct_change_vs_clean\n";
  for (const auto& g : report.groups) {
    for (const auto& [_, v] : g.key) out << v << ",";
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", g.n, g.iqm,
                  g.ci_iqm.first, g.ci_iqm.second, g.mean, g.ci_mean.first,
                  g.ci_mean.second, g.median, g.ci_median.first,
                  g.ci_median.second);
    out << buf << ",";
    if (g.has_pct_change) out << g.pct_change_vs_clean;
    out << "\n";
  }
}

std::vector<FixtureRow> load_fixture_table(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingArtifactError("fixture not found: " + file.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_fixture_table: empty file");
  std::vector<std::string> headers;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) headers.push_back(cell);
  }
  std::vector<FixtureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    FixtureRow row;
    std::map<std::string, double> raw;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= headers.size())
        throw std::runtime_error("load_fixture_table: extra column");
      const std::string& h = headers[col++];
      if (h == "task")
        row.task = cell;
      else if (h == "method")
        row.method = cell;
      else
        raw[h] = std::stod(cell);
    }
    auto ends_with = [](const std::string& s, const std::string& suffix) {
      return s.size() >= suffix.size() &&
             s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    for (const auto& [h, v] : raw) {
      if (ends_with(h, "_mean"))
        row.cells[h.substr(0, h.size() - 5)].first = v;
      else if (ends_with(h, "_std"))
        row.cells[h.substr(0, h.size() - 4)].second = v;
      else
        row.cells[h] = {v, 0.0};  // plain value column (e.g. percent fixtures)
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rolab
