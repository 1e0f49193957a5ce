#include "rolab/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rolab/checkpoint.hpp"
#include "rolab/errors.hpp"
#include "rolab/graph.hpp"
#include "rolab/version.hpp"

namespace rolab {

namespace {

double clampd(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

Tensor gather_rows(const Tensor& src, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), src.cols());
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < src.cols(); ++c)
      out(r, c) = src(idx[static_cast<std::size_t>(r)], c);
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), a.cols() + b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (int c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

void soft_update(MlpNet& target, const MlpNet& live, double tau) {
  auto tp = target.params();
  auto lp = live.params();
  for (std::size_t i = 0; i < tp.size(); ++i) {
    auto& t = tp[i]->raw();
    const auto& l = lp[i]->raw();
    for (std::size_t j = 0; j < t.size(); ++j)
      t[j] = tau * l[j] + (1.0 - tau) * t[j];
  }
}

std::vector<Tensor> collect_grads(Graph& g, const NetBinding& p) {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    out.push_back(g.grad(p.w[l]));
    out.push_back(g.grad(p.b[l]));
  }
  return out;
}

}  // namespace

std::string to_string(DefenseSpec::Kind k) {
  switch (k) {
    case DefenseSpec::Kind::None: return "none";
    case DefenseSpec::Kind::Critic: return "critic_defense";
    case DefenseSpec::Kind::Actor: return "actor_defense";
  }
  return "none";
}

DefenseSpec::Kind defense_kind_from_string(const std::string& s) {
  if (s == "none") return DefenseSpec::Kind::None;
  if (s == "critic" || s == "critic_defense") return DefenseSpec::Kind::Critic;
  if (s == "actor" || s == "actor_defense") return DefenseSpec::Kind::Actor;
  throw std::invalid_argument("unknown defense kind: " + s);
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("config: iterations < 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size < 1");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("config: gamma outside (0,1)");
  if (policy_period < 1) throw std::invalid_argument("config: period < 1");
  if (hidden_dim < 1 || num_hidden < 0)
    throw std::invalid_argument("config: bad network size");
  if (defense.lambda < 0.0) throw std::invalid_argument("config: lambda < 0");
  if (defense.active()) defense.budget.validate();
}

std::string TrainConfig::method_label() const {
  switch (defense.kind) {
    case DefenseSpec::Kind::None: return "TD3BC";
    case DefenseSpec::Kind::Critic: return "TD3BC+CriticDefense";
    case DefenseSpec::Kind::Actor: return "TD3BC+ActorDefense";
  }
  return "TD3BC";
}

PolicyFn Agent::policy() const {
  const MlpNet* net = &actor;
  const Normalizer* n = &norm;
  return [net, n](const Tensor& obs) {
    Tensor a = net->forward(n->apply(obs));
    for (auto& v : a.raw()) v = clampd(v, -1.0, 1.0);
    return a;
  };
}

Trainer::Trainer(TrainConfig config, const Dataset& dataset)
    : config_(std::move(config)),
      dataset_(dataset),
      opt_actor_({}, config_.actor_lr),
      opt_c1_({}, config_.critic_lr),
      opt_c2_({}, config_.critic_lr),
      rng_(config_.seed) {
  config_.validate();
  if (dataset_.size() == 0) throw std::invalid_argument("Trainer: empty dataset");

  s_norm_ = dataset_.normalizer().apply(dataset_.s);
  s2_norm_ = dataset_.normalizer().apply(dataset_.s_next);

  const int sd = dataset_.env.state_dim;
  const int ad = dataset_.env.action_dim;
  std::vector<int> actor_dims{sd};
  std::vector<int> critic_dims{sd + ad};
  for (int i = 0; i < config_.num_hidden; ++i) {
    actor_dims.push_back(config_.hidden_dim);
    critic_dims.push_back(config_.hidden_dim);
  }
  actor_dims.push_back(ad);
  critic_dims.push_back(1);

  agent_.actor = MlpNet::make(actor_dims, OutputActivation::Tanh, rng_);
  agent_.critic1 = MlpNet::make(critic_dims, OutputActivation::None, rng_);
  agent_.critic2 = MlpNet::make(critic_dims, OutputActivation::None, rng_);
  agent_.target_actor = agent_.actor;
  agent_.target_critic1 = agent_.critic1;
  agent_.target_critic2 = agent_.critic2;
  agent_.norm = dataset_.normalizer();
  agent_.env = dataset_.env;
  agent_.tier = dataset_.tier;
  agent_.method = config_.method_label();
  agent_.seed = config_.seed;
  agent_.ref_random_score = dataset_.ref_random_score;
  agent_.ref_expert_score = dataset_.ref_expert_score;
  agent_.defense = config_.defense;

  opt_actor_ = Adam(agent_.actor.params(), config_.actor_lr);
  opt_c1_ = Adam(agent_.critic1.params(), config_.critic_lr);
  opt_c2_ = Adam(agent_.critic2.params(), config_.critic_lr);
}

Batch Trainer::sample_batch() {
  Batch b;
  b.indices.resize(static_cast<std::size_t>(config_.batch_size));
  for (auto& i : b.indices)
    i = static_cast<int>(rng_.uniform_index(dataset_.size()));
  b.s = gather_rows(s_norm_, b.indices);
  b.a = gather_rows(dataset_.a, b.indices);
  b.r = gather_rows(dataset_.r, b.indices);
  b.s2 = gather_rows(s2_norm_, b.indices);
  b.done = gather_rows(dataset_.done, b.indices);
  return b;
}

Tensor Trainer::make_defense_states(const Batch& batch, AttackKind generator) {
  switch (generator) {
    case AttackKind::Random:
      return attack_random(batch.s, config_.defense.budget, rng_);
    case AttackKind::Critic:
      return attack_critic(batch.s, agent_.actor, agent_.critic1,
                           config_.defense.budget);
    case AttackKind::Actor:
      return attack_actor(batch.s, agent_.actor, config_.defense.budget);
    case AttackKind::RobustCritic:
      throw std::invalid_argument(
          "robust_critic cannot generate training-time perturbations");
    case AttackKind::None:
      return batch.s;
  }
  return batch.s;
}

CriticLosses Trainer::policy_evaluation(const Batch& batch) {
  if (batch.s.rows() == 0) throw std::invalid_argument("policy_evaluation: empty batch");
  const int B = batch.s.rows();

  // TD target with target-policy smoothing, computed outside the tape.
  Tensor a2 = agent_.target_actor.forward(batch.s2);
  for (auto& v : a2.raw()) {
    const double noise = clampd(rng_.gaussian(0.0, config_.policy_noise),
                                -config_.noise_clip, config_.noise_clip);
    v = clampd(v + noise, -1.0, 1.0);
  }
  const Tensor x2 = concat_cols(batch.s2, a2);
  const Tensor q1t = agent_.target_critic1.forward(x2);
  const Tensor q2t = agent_.target_critic2.forward(x2);
  Tensor y(B, 1);
  for (int r = 0; r < B; ++r)
    y(r, 0) = batch.r(r, 0) + config_.gamma * (1.0 - batch.done(r, 0)) *
                                  std::min(q1t(r, 0), q2t(r, 0));

  const bool defended =
      config_.defense.kind == DefenseSpec::Kind::Critic && config_.defense.active();
  Tensor s_tilde;
  if (defended) s_tilde = make_defense_states(batch, config_.defense.generator);

  Graph g;
  NetBinding p1 = bind_params(g, agent_.critic1, true);
  NetBinding p2 = bind_params(g, agent_.critic2, true);
  Val x = g.leaf(concat_cols(batch.s, batch.a), false);
  Val y_leaf = g.leaf(y, false);
  Val q1 = apply_net(g, p1, agent_.critic1, x);
  Val q2 = apply_net(g, p2, agent_.critic2, x);
  Val td = g.add(g.mean_all(g.square(g.sub(q1, y_leaf))),
                 g.mean_all(g.square(g.sub(q2, y_leaf))));

  CriticLosses losses;
  losses.td = g.value(td)(0);
  Val total = td;
  if (defended) {
    Val xt = g.leaf(concat_cols(s_tilde, batch.a), false);
    Val q1t_v = apply_net(g, p1, agent_.critic1, xt);
    Val q2t_v = apply_net(g, p2, agent_.critic2, xt);
    Val dterm = g.add(g.mean_all(g.square(g.sub(q1t_v, q1))),
                      g.mean_all(g.square(g.sub(q2t_v, q2))));
    losses.defense_term = g.value(dterm)(0);
    total = g.add(td, g.scale(dterm, config_.defense.lambda));
  }
  losses.total = g.value(total)(0);

  g.backward(total);
  opt_c1_.step(collect_grads(g, p1));
  opt_c2_.step(collect_grads(g, p2));
  last_critic_losses_ = losses;
  return losses;
}

ActorLosses Trainer::policy_improvement(const Batch& batch) {
  if (batch.s.rows() == 0) throw std::invalid_argument("policy_improvement: empty batch");

  const bool defended =
      config_.defense.kind == DefenseSpec::Kind::Actor && config_.defense.active();
  Tensor s_tilde;
  if (defended) s_tilde = make_defense_states(batch, config_.defense.generator);

  Graph g;
  NetBinding pa = bind_params(g, agent_.actor, true);
  NetBinding pc = bind_params(g, agent_.critic1, false);
  Val s_leaf = g.leaf(batch.s, false);
  Val pi = apply_net(g, pa, agent_.actor, s_leaf);
  Val q = apply_net(g, pc, agent_.critic1, g.concat_cols(s_leaf, pi));

  // TD3+BC normalization, detached: lambda_bc = alpha / mean|Q1(s, pi(s))|.
  double mean_abs_q = 0.0;
  for (double v : g.value(q).raw()) mean_abs_q += std::abs(v);
  mean_abs_q /= batch.s.rows();
  const double lambda_bc = config_.bc_alpha / std::max(mean_abs_q, 1e-8);

  Val q_term = g.scale(g.mean_all(q), -lambda_bc);
  Val bc = g.mean_all(g.square(g.sub(pi, g.leaf(batch.a, false))));
  Val total = g.add(q_term, bc);

  ActorLosses losses;
  losses.q_term = g.value(q_term)(0);
  losses.bc_term = g.value(bc)(0);
  if (defended) {
    Val pi_tilde = apply_net(g, pa, agent_.actor, g.leaf(s_tilde, false));
    Val dterm = g.mean_all(g.square(g.sub(pi_tilde, pi)));
    losses.defense_term = g.value(dterm)(0);
    total = g.add(total, g.scale(dterm, config_.defense.lambda));
  }
  losses.total = g.value(total)(0);

  g.backward(total);
  opt_actor_.step(collect_grads(g, pa));
  ++actor_updates_;
  last_actor_losses_ = losses;
  return losses;
}

void Trainer::soft_update_targets() {
  soft_update(agent_.target_actor, agent_.actor, config_.tau);
  soft_update(agent_.target_critic1, agent_.critic1, config_.tau);
  soft_update(agent_.target_critic2, agent_.critic2, config_.tau);
}

std::vector<LogRecord> Trainer::run() {
  std::vector<LogRecord> log;
  for (iter_ = 1; iter_ <= config_.iterations; ++iter_) {
    Batch batch = sample_batch();
    CriticLosses ce = policy_evaluation(batch);
    ActorLosses ae = last_actor_losses_;
    if (iter_ % config_.policy_period == 0) {
      ae = policy_improvement(batch);
      soft_update_targets();
    }

    if (!std::isfinite(ce.total) || !std::isfinite(ae.total)) {
      std::ostringstream dump;
      dump << "training diverged: non-finite loss at iteration " << iter_
           << "\n  critic td=" << ce.td << " defense=" << ce.defense_term
           << "\n  actor q=" << ae.q_term << " bc=" << ae.bc_term
           << " defense=" << ae.defense_term << "\n  batch indices:";
      for (int i : batch.indices) dump << ' ' << i;
      throw NumericalFailureError(dump.str());
    }

    if (iter_ % config_.log_interval == 0 || iter_ == config_.iterations) {
      LogRecord rec;
      rec.iter = iter_;
      rec.critic_loss = ce.total;
      rec.actor_loss = ae.total;
      rec.defense_term = config_.defense.kind == DefenseSpec::Kind::Actor
                             ? ae.defense_term
                             : ce.defense_term;
      rec.has_eval = config_.eval_episodes > 0;
      if (rec.has_eval) {
        double total = 0.0;
        PolicyFn pol = agent_.policy();
        for (int ep = 0; ep < config_.eval_episodes; ++ep) {
          const std::uint64_t s = Rng::derive(
              config_.seed, 0xE0000000ull + static_cast<std::uint64_t>(iter_) * 8 +
                                static_cast<std::uint64_t>(ep));
          total += rollout(dataset_.env, pol, s).episode_return;
        }
        rec.clean_eval_return = total / config_.eval_episodes;
      }
      log.push_back(rec);
    }
  }
  return log;
}

std::vector<LogRecord> write_training_log(const std::filesystem::path& file,
                                          const std::vector<LogRecord>& log) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("write_training_log: cannot open " + file.string());
  for (const auto& rec : log) {
    nlohmann::json j;
    j["iter"] = rec.iter;
    j["critic_loss"] = rec.critic_loss;
    j["actor_loss"] = rec.actor_loss;
    j["defense_term"] = rec.defense_term;
    if (rec.has_eval)
      j["clean_eval_return"] = rec.clean_eval_return;
    else
      j["clean_eval_return"] = nullptr;
    out << j.dump() << "\n";
  }
  return log;
}

namespace {

nlohmann::json defense_to_json(const DefenseSpec& d) {
  nlohmann::json j;
  j["kind"] = to_string(d.kind);
  j["lambda"] = d.lambda;
  j["generator"] = to_string(d.generator);
  j["epsilon"] = d.budget.epsilon;
  j["step_size"] = d.budget.step_size;
  j["num_steps"] = d.budget.num_steps;
  return j;
}

DefenseSpec defense_from_json(const nlohmann::json& j) {
  DefenseSpec d;
  d.kind = defense_kind_from_string(j.at("kind").get<std::string>());
  d.lambda = j.at("lambda").get<double>();
  d.generator = attack_kind_from_string(j.at("generator").get<std::string>());
  d.budget.epsilon = j.at("epsilon").get<double>();
  d.budget.step_size = j.at("step_size").get<double>();
  d.budget.num_steps = j.at("num_steps").get<int>();
  return d;
}

const char* kNetStems[6] = {"actor",        "critic1",        "critic2",
                            "target_actor", "target_critic1", "target_critic2"};

}  // namespace

void save_agent(const Agent& agent, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_net(agent.actor, dir / "actor", "actor");
  save_net(agent.critic1, dir / "critic1", "critic1");
  save_net(agent.critic2, dir / "critic2", "critic2");
  save_net(agent.target_actor, dir / "target_actor", "target_actor");
  save_net(agent.target_critic1, dir / "target_critic1", "target_critic1");
  save_net(agent.target_critic2, dir / "target_critic2", "target_critic2");

  nlohmann::json j;
  j["env"] = agent.env.name_str();
  j["horizon"] = agent.env.horizon;
  j["tier"] = agent.tier;
  j["method"] = agent.method;
  j["seed"] = agent.seed;
  j["state_mean"] = agent.norm.mean.raw();
  j["state_std"] = agent.norm.std.raw();
  j["ref_random_score"] = agent.ref_random_score;
  j["ref_expert_score"] = agent.ref_expert_score;
  j["defense"] = defense_to_json(agent.defense);
  j["tool_version"] = kToolVersion;
  j["checkpoint_format"] = kCheckpointFormatVersion;
  std::ofstream out(dir / "agent.json", std::ios::trunc);
  if (!out) throw std::runtime_error("save_agent: cannot write agent.json");
  out << j.dump(2) << "\n";
}

Agent load_agent(const std::filesystem::path& dir) {
  std::ifstream in(dir / "agent.json");
  if (!in)
    throw MissingArtifactError("agent metadata not found: " +
                               (dir / "agent.json").string());
  nlohmann::json j = nlohmann::json::parse(in);

  Agent agent;
  agent.env = EnvSpec::by_name(j.at("env").get<std::string>());
  agent.env.horizon = j.at("horizon").get<int>();
  agent.tier = j.at("tier").get<std::string>();
  agent.method = j.at("method").get<std::string>();
  agent.seed = j.at("seed").get<std::uint64_t>();
  agent.norm.mean = Tensor::row(j.at("state_mean").get<std::vector<double>>());
  agent.norm.std = Tensor::row(j.at("state_std").get<std::vector<double>>());
  agent.ref_random_score = j.at("ref_random_score").get<double>();
  agent.ref_expert_score = j.at("ref_expert_score").get<double>();
  agent.defense = defense_from_json(j.at("defense"));

  agent.actor = load_net(dir / "actor");
  agent.critic1 = load_net(dir / "critic1");
  agent.critic2 = load_net(dir / "critic2");
  agent.target_actor = load_net(dir / "target_actor");
  agent.target_critic1 = load_net(dir / "target_critic1");
  agent.target_critic2 = load_net(dir / "target_critic2");
  return agent;
}

std::string agent_checkpoint_hash(const std::filesystem::path& dir) {
  std::string combined;
  for (const char* stem : kNetStems)
    combined += file_hash_hex(dir / (std::string(stem) + ".bin"));
  // hash of the concatenated per-file hashes
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : combined) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

}  // namespace rolab
