// rolab: offline RL robustness laboratory.
//
// Subcommands cover the full experiment pipeline: dataset generation,
// TD3+BC training (optionally with a defense regularizer), robust-Q
// preparation for the strongest attack, attack-suite evaluation, and
// aggregate reporting.
//
// Exit codes: 0 success, 2 usage/config error, 3 missing artifact,
// 4 numerical failure during training.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rolab/checkpoint.hpp"
#include "rolab/config.hpp"
#include "rolab/dataset.hpp"
#include "rolab/errors.hpp"
#include "rolab/evaluate.hpp"
#include "rolab/report.hpp"
#include "rolab/robust_q.hpp"
#include "rolab/stats.hpp"
#include "rolab/trainer.hpp"
#include "rolab/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rolab;

namespace {

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << bytes;
}

json format_versions() {
  return json{{"checkpoint", kCheckpointFormatVersion},
              {"dataset", kDatasetFormatVersion},
              {"rundb", kRunDbFormatVersion}};
}

void write_manifest(const fs::path& file, const std::string& command,
                    const std::string& config_hash, const json& artifacts,
                    const std::vector<std::uint64_t>& seeds) {
  json m;
  m["experiment_id"] = command + "-" + config_hash;
  m["command"] = command;
  m["config_hash"] = config_hash;
  m["artifacts"] = artifacts;
  m["tool_version"] = kToolVersion;
  m["format_versions"] = format_versions();
  m["seeds"] = seeds;
  write_file(file, m.dump(2) + "\n");
}

// --checkpoint accepts either the agent directory itself or a train output
// directory containing agent/.
fs::path resolve_agent_dir(const fs::path& given) {
  if (fs::exists(given / "agent.json")) return given;
  if (fs::exists(given / "agent" / "agent.json")) return given / "agent";
  throw MissingArtifactError("no agent checkpoint under " + given.string());
}

MlpNet load_robust_q(const fs::path& dir, const std::string& victim_hash) {
  if (!fs::exists(dir / "robust_q1.json"))
    throw MissingArtifactError("no robust-Q checkpoint under " + dir.string() +
                               "; run `rolab prepare-robust-q` first");
  std::ifstream meta_in(dir / "robustq.json");
  if (meta_in) {
    json meta = json::parse(meta_in);
    const std::string trained_for = meta.value("victim_checkpoint_hash", "");
    if (!victim_hash.empty() && !trained_for.empty() && trained_for != victim_hash)
      throw MissingArtifactError(
          "robust-Q at " + dir.string() + " was trained against a different "
          "victim checkpoint; re-run `rolab prepare-robust-q`");
  }
  return load_net(dir / "robust_q1");
}

struct TrainJobResult {
  fs::path agent_dir;
  std::string hash;
};

TrainJobResult run_train_job(const ExperimentConfig& cfg, const Dataset& dataset,
                             const fs::path& out_dir) {
  Trainer trainer(cfg.train, dataset);
  std::vector<LogRecord> log = trainer.run();
  const fs::path agent_dir = out_dir / "agent";
  save_agent(trainer.agent(), agent_dir);
  write_training_log(out_dir / "log.jsonl", log);
  return {agent_dir, agent_checkpoint_hash(agent_dir)};
}

int cmd_gen_data(const std::string& env_name, const std::string& tier,
                 std::size_t size, std::uint64_t seed, const fs::path& out) {
  EnvSpec spec = EnvSpec::by_name(env_name);
  Dataset ds = generate_dataset(spec, tier, size, seed);
  save_dataset(ds, out);
  std::printf("wrote %zu transitions to %s\n", ds.size(), out.string().c_str());
  std::printf("ref_random_score  = %.4f\n", ds.ref_random_score);
  std::printf("ref_expert_score  = %.4f\n", ds.ref_expert_score);
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& out) {
  const std::string config_bytes = read_file(config_path);
  ExperimentConfig cfg = parse_experiment_config(config_bytes);
  Dataset dataset = load_dataset(cfg.dataset_path);
  if (dataset.env.name_str() != cfg.env_name)
    throw ConfigError("config env '" + cfg.env_name + "' does not match dataset env '" +
                      dataset.env.name_str() + "'");

  fs::create_directories(out);
  write_file(out / "config.toml", config_bytes);
  TrainJobResult job = run_train_job(cfg, dataset, out);

  json artifacts;
  artifacts["dataset"] = cfg.dataset_path;
  artifacts["checkpoint"] = job.agent_dir.string();
  artifacts["training_log"] = (out / "log.jsonl").string();
  artifacts["config_copy"] = (out / "config.toml").string();
  write_manifest(out / "manifest.json", "train", fnv_hex(config_bytes), artifacts,
                 {cfg.train.seed});
  std::printf("trained %s for %d iterations (seed %llu)\n",
              cfg.train.method_label().c_str(), cfg.train.iterations,
              static_cast<unsigned long long>(cfg.train.seed));
  std::printf("checkpoint: %s (hash %s)\n", job.agent_dir.string().c_str(),
              job.hash.c_str());
  return 0;
}

int cmd_prepare_robust_q(const fs::path& checkpoint, const std::string& env_name,
                         std::size_t budget, const fs::path& out, int iters,
                         double lambda, double eps, double step_size, int steps,
                         std::uint64_t seed) {
  const fs::path agent_dir = resolve_agent_dir(checkpoint);
  Agent victim = load_agent(agent_dir);
  if (!env_name.empty() && env_name != victim.env.name_str())
    throw ConfigError("--env " + env_name + " does not match the checkpoint env " +
                      victim.env.name_str());
  const std::string victim_hash = agent_checkpoint_hash(agent_dir);

  auto transitions =
      collect_examination_buffer(victim.env, victim.policy(), budget, seed);
  Dataset buffer =
      dataset_from_transitions(victim.env, "examination", transitions, seed);
  save_dataset(buffer, out / "buffer");

  RobustQConfig cfg;
  cfg.iterations = iters;
  cfg.lambda = lambda;
  cfg.gamma = 0.99;
  cfg.action_budget = {eps, step_size, steps};
  cfg.hidden_dims.assign(victim.critic1.layer_dims.begin() + 1,
                         victim.critic1.layer_dims.end() - 1);
  cfg.seed = seed;
  RobustQResult rq = train_robust_q(victim.actor, victim.norm, buffer, cfg);
  save_net(rq.q1, out / "robust_q1", "robust_q");
  save_net(rq.q2, out / "robust_q2", "robust_q_twin");

  json meta;
  meta["victim_checkpoint"] = agent_dir.string();
  meta["victim_checkpoint_hash"] = victim_hash;
  meta["budget_transitions"] = budget;
  meta["iterations"] = iters;
  meta["lambda"] = lambda;
  meta["epsilon"] = eps;
  meta["seed"] = seed;
  meta["initial_loss"] = rq.initial_loss;
  meta["final_loss"] = rq.final_loss;
  meta["tool_version"] = kToolVersion;
  write_file(out / "robustq.json", meta.dump(2) + "\n");

  json artifacts;
  artifacts["buffer"] = (out / "buffer").string();
  artifacts["robust_q1"] = (out / "robust_q1.bin").string();
  artifacts["robust_q2"] = (out / "robust_q2.bin").string();
  write_manifest(out / "manifest.json", "prepare-robust-q",
                 fnv_hex(victim_hash + std::to_string(budget) + std::to_string(seed)),
                 artifacts, {seed});
  std::printf("examination buffer: %zu transitions\n", transitions.size());
  std::printf("robust-Q loss %.4f -> %.4f\n", rq.initial_loss, rq.final_loss);
  std::printf("robust-Q checkpoint: %s\n", (out / "robust_q1.bin").string().c_str());
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const std::string& attacks_csv,
             double eps, double step_size, int steps, int episodes, int seeds,
             const fs::path& robust_q_dir, const fs::path& out, int jobs) {
  const fs::path agent_dir = resolve_agent_dir(checkpoint);
  Agent agent = load_agent(agent_dir);
  const std::string hash = agent_checkpoint_hash(agent_dir);

  EvalOptions opt;
  opt.attacks = parse_attack_list(attacks_csv);
  opt.budget = {eps, step_size, steps};
  opt.episodes = episodes;
  opt.seeds = seeds;
  opt.jobs = jobs;

  MlpNet robust_q;
  const MlpNet* robust_q_ptr = nullptr;
  const bool wants_robust =
      std::count(opt.attacks.begin(), opt.attacks.end(), AttackKind::RobustCritic) > 0;
  if (wants_robust) {
    robust_q = load_robust_q(robust_q_dir.empty() ? checkpoint / "robustq" : robust_q_dir,
                             hash);
    robust_q_ptr = &robust_q;
  }

  auto runs = evaluate(agent, robust_q_ptr, opt, hash);
  const std::size_t appended = append_run_db(out, runs);
  std::printf("%zu runs evaluated, %zu appended to %s\n", runs.size(), appended,
              out.string().c_str());
  for (const auto& r : runs)
    std::printf("  %-14s seed %llu  normalized %.2f\n", r.attack.c_str(),
                static_cast<unsigned long long>(r.seed), r.normalized_score);
  return 0;
}

int cmd_report(const fs::path& runs_path, const fs::path& out,
               const std::string& group_by_csv, const std::string& metric,
               int resamples, std::uint64_t seed) {
  auto runs = load_run_db(runs_path);
  if (runs.empty())
    throw MissingArtifactError("run database is empty or missing: " +
                               runs_path.string());

  AggregateOptions opt;
  opt.group_by.clear();
  std::stringstream ss(group_by_csv);
  std::string field;
  while (std::getline(ss, field, ','))
    if (!field.empty()) opt.group_by.push_back(field);
  opt.metric = metric;
  opt.resamples = resamples;
  opt.seed = seed;
  AggregateReport report = aggregate(runs, opt);

  fs::create_directories(out);
  write_attack_table_csv(out / "per_task.csv", runs);
  write_aggregate_csv(out / "aggregate.csv", report);
  const std::string table = render_attack_table(runs);
  const std::string agg = render_aggregate_table(report);
  write_file(out / "table.txt", table + "\n" + agg);
  std::fputs(table.c_str(), stdout);
  std::fputs(agg.c_str(), stdout);
  return 0;
}

int cmd_sweep(const fs::path& config_path, const std::string& grid_csv,
              const fs::path& out, int seeds, int jobs) {
  const std::string config_bytes = read_file(config_path);
  ExperimentConfig base = parse_experiment_config(config_bytes);
  if (base.train.defense.kind == DefenseSpec::Kind::None)
    throw ConfigError("sweep: config must select a defense kind to sweep lambda over");
  Dataset dataset = load_dataset(base.dataset_path);

  std::vector<double> grid;
  {
    std::stringstream ss(grid_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) grid.push_back(std::stod(item));
    if (grid.empty()) throw ConfigError("sweep: empty lambda grid");
  }

  struct SweepJob {
    double lambda;
    std::uint64_t seed;
    fs::path dir;
  };
  std::vector<SweepJob> jobs_list;
  for (double lambda : grid)
    for (int s = 0; s < seeds; ++s) {
      char dirname[64];
      std::snprintf(dirname, sizeof(dirname), "lambda_%g/seed_%d", lambda, s);
      jobs_list.push_back({lambda, base.train.seed + static_cast<std::uint64_t>(s),
                           out / dirname});
    }

  fs::create_directories(out);
  write_file(out / "config.toml", config_bytes);

  std::atomic<std::size_t> next{0};
  std::vector<std::vector<RunScores>> results(jobs_list.size());
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs_list.size()) return;
      const SweepJob& job = jobs_list[i];
      ExperimentConfig cfg = base;
      cfg.train.defense.lambda = job.lambda;
      cfg.train.seed = job.seed;
      TrainJobResult trained = run_train_job(cfg, dataset, job.dir);

      Agent agent = load_agent(trained.agent_dir);
      MlpNet robust_q;
      const MlpNet* robust_ptr = nullptr;
      const bool wants_robust =
          std::count(cfg.attack_eval.attacks.begin(), cfg.attack_eval.attacks.end(),
                     AttackKind::RobustCritic) > 0;
      if (wants_robust) {
        auto transitions = collect_examination_buffer(agent.env, agent.policy(),
                                                      10000, job.seed);
        Dataset buffer = dataset_from_transitions(agent.env, "examination",
                                                  transitions, job.seed);
        RobustQConfig rq_cfg;
        rq_cfg.seed = job.seed;
        rq_cfg.hidden_dims.assign(agent.critic1.layer_dims.begin() + 1,
                                  agent.critic1.layer_dims.end() - 1);
        RobustQResult rq = train_robust_q(agent.actor, agent.norm, buffer, rq_cfg);
        save_net(rq.q1, job.dir / "robust_q1", "robust_q");
        robust_q = std::move(rq.q1);
        robust_ptr = &robust_q;
      }
      EvalOptions eval_opt = cfg.attack_eval;
      eval_opt.seeds = 1;  // one eval stream per training seed
      eval_opt.seed_base = job.seed;
      auto runs = evaluate(agent, robust_ptr, eval_opt, trained.hash);
      for (auto& r : runs) {
        char label[96];
        std::snprintf(label, sizeof(label), "%s(l=%g)", agent.method.c_str(),
                      job.lambda);
        r.method = label;
        r.seed = job.seed;
      }
      results[i] = std::move(runs);
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<RunScores> all;
  for (auto& rs : results) all.insert(all.end(), rs.begin(), rs.end());
  append_run_db(out / "runs.jsonl", all);

  // best lambda by IQM over the attacked (non-clean) runs
  std::ofstream summary(out / "sweep_summary.csv", std::ios::trunc);
  summary << "lambda,n_runs,iqm_attacked,iqm_clean\n";
  double best_lambda = grid.front();
  double best_iqm = -1e300;
  for (double lambda : grid) {
    std::vector<double> attacked, clean;
    char label_prefix[96];
    std::snprintf(label_prefix, sizeof(label_prefix), "(l=%g)", lambda);
    for (const auto& r : all) {
      if (r.method.find(label_prefix) == std::string::npos) continue;
      (r.attack == "none" ? clean : attacked).push_back(r.normalized_score);
    }
    const double iqm_attacked = attacked.empty() ? 0.0 : stats::iqm(attacked);
    const double iqm_clean = clean.empty() ? 0.0 : stats::iqm(clean);
    summary << lambda << "," << attacked.size() + clean.size() << ","
            << iqm_attacked << "," << iqm_clean << "\n";
    if (!attacked.empty() && iqm_attacked > best_iqm) {
      best_iqm = iqm_attacked;
      best_lambda = lambda;
    }
  }
  std::printf("sweep complete; best lambda by attacked IQM: %g (iqm %.2f)\n",
              best_lambda, best_iqm);

  json artifacts;
  artifacts["run_db"] = (out / "runs.jsonl").string();
  artifacts["summary"] = (out / "sweep_summary.csv").string();
  artifacts["config_copy"] = (out / "config.toml").string();
  std::vector<std::uint64_t> seed_list;
  for (int s = 0; s < seeds; ++s)
    seed_list.push_back(base.train.seed + static_cast<std::uint64_t>(s));
  write_manifest(out / "manifest.json", "sweep", fnv_hex(config_bytes), artifacts,
                 seed_list);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rolab: observation-robust offline RL laboratory"};
  app.require_subcommand(1);
  std::ostringstream version;
  version << "rolab " << kToolVersion << " (checkpoint format "
          << kCheckpointFormatVersion << ", dataset format " << kDatasetFormatVersion
          << ", rundb format " << kRunDbFormatVersion << ")";
  app.set_version_flag("--version", version.str());

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  std::string gen_env = "pointmass", gen_tier = "expert";
  std::size_t gen_size = 50000;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--env", gen_env, "pointmass | pendulum");
  gen->add_option("--tier", gen_tier, "expert | medium-expert | medium-replay");
  gen->add_option("--size", gen_size, "transition count");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train TD3+BC from a config file");
  std::string train_config, train_out;
  train->add_option("--config", train_config, "TOML experiment config")->required();
  train->add_option("--out", train_out, "output directory")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train one job per lambda in the grid");
  std::string sweep_config, sweep_out, sweep_grid = "0.1,0.5,1,5,10";
  int sweep_seeds = 1, sweep_jobs = 1;
  sweep->add_option("--config", sweep_config, "TOML experiment config")->required();
  sweep->add_option("--lambda-grid", sweep_grid, "comma-separated lambda values");
  sweep->add_option("--seeds", sweep_seeds, "training seeds per lambda");
  sweep->add_option("--jobs", sweep_jobs, "parallel jobs");
  sweep->add_option("--out", sweep_out, "output directory")->required();

  // prepare-robust-q
  auto* prep = app.add_subcommand("prepare-robust-q",
                                  "Collect an examination buffer and train the "
                                  "attacker-side robust Q");
  std::string prep_ckpt, prep_env, prep_out;
  std::size_t prep_budget = 10000;
  int prep_iters = 20000, prep_steps = 5;
  double prep_lambda = 1.0, prep_eps = 0.05, prep_step = 0.01;
  std::uint64_t prep_seed = 0;
  prep->add_option("--checkpoint", prep_ckpt, "trained agent directory")->required();
  prep->add_option("--env", prep_env, "environment (defaults to the checkpoint's)");
  prep->add_option("--budget", prep_budget, "examination transitions");
  prep->add_option("--iters", prep_iters, "robust-Q gradient steps");
  prep->add_option("--lambda", prep_lambda, "action-smoothness weight");
  prep->add_option("--eps", prep_eps, "action-ball radius");
  prep->add_option("--step-size", prep_step, "PGD step size");
  prep->add_option("--steps", prep_steps, "PGD steps");
  prep->add_option("--seed", prep_seed, "collection/training seed");
  prep->add_option("--out", prep_out, "output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint under attacks");
  std::string eval_ckpt, eval_attacks = "none,random,critic,actor,robust_critic";
  std::string eval_rq, eval_out;
  double eval_eps = 0.05, eval_step = 0.01;
  int eval_steps = 5, eval_episodes = 10, eval_seeds = 5, eval_jobs = 1;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "trained agent directory")->required();
  eval_cmd->add_option("--attacks", eval_attacks, "comma-separated attack kinds");
  eval_cmd->add_option("--eps", eval_eps, "perturbation radius (normalized units)");
  eval_cmd->add_option("--step-size", eval_step, "PGD step size");
  eval_cmd->add_option("--steps", eval_steps, "PGD steps");
  eval_cmd->add_option("--episodes", eval_episodes, "episodes per seed");
  eval_cmd->add_option("--seeds", eval_seeds, "evaluation seeds");
  eval_cmd->add_option("--robust-q", eval_rq, "robust-Q directory");
  eval_cmd->add_option("--jobs", eval_jobs, "parallel jobs");
  eval_cmd->add_option("--out", eval_out, "run database (JSON-lines)")->required();

  // report
  auto* rep = app.add_subcommand("report", "Aggregate a run database into tables");
  std::string rep_runs, rep_out, rep_group = "method,attack", rep_metric = "iqm";
  int rep_boot = 2000;
  std::uint64_t rep_seed = 0;
  rep->add_option("--runs", rep_runs, "run database path")->required();
  rep->add_option("--group-by", rep_group, "comma-separated group fields");
  rep->add_option("--metric", rep_metric, "iqm | mean | median");
  rep->add_option("--bootstrap", rep_boot, "bootstrap resamples");
  rep->add_option("--seed", rep_seed, "bootstrap seed");
  rep->add_option("--out", rep_out, "report output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_env, gen_tier, gen_size, gen_seed, gen_out);
    if (*train) return cmd_train(train_config, train_out);
    if (*sweep)
      return cmd_sweep(sweep_config, sweep_grid, sweep_out, sweep_seeds, sweep_jobs);
    if (*prep)
      return cmd_prepare_robust_q(prep_ckpt, prep_env, prep_budget, prep_out,
                                  prep_iters, prep_lambda, prep_eps, prep_step,
                                  prep_steps, prep_seed);
    if (*eval_cmd)
      return cmd_eval(eval_ckpt, eval_attacks, eval_eps, eval_step, eval_steps,
                      eval_episodes, eval_seeds, eval_rq, eval_out, eval_jobs);
    if (*rep)
      return cmd_report(rep_runs, rep_out, rep_group, rep_metric, rep_boot, rep_seed);
  } catch (const NumericalFailureError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const MissingArtifactError& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
