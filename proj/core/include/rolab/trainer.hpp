#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rolab/adam.hpp"
#include "rolab/attack.hpp"
#include "rolab/dataset.hpp"
#include "rolab/net.hpp"

namespace rolab {

// Observation-smoothness regularizer added to one of the two TD3+BC
// objectives. `generator` is the attack that crafts s_tilde during training;
// the critic defense pairs with the critic attack and the actor defense with
// the actor attack by default.
struct DefenseSpec {
  enum class Kind { None, Critic, Actor };
  Kind kind = Kind::None;
  double lambda = 1.0;
  AttackKind generator = AttackKind::Critic;
  PerturbationBudget budget;

  bool active() const { return kind != Kind::None && lambda > 0.0; }
};

std::string to_string(DefenseSpec::Kind k);
DefenseSpec::Kind defense_kind_from_string(const std::string& s);

struct TrainConfig {
  int iterations = 50000;
  int batch_size = 256;
  double gamma = 0.99;
  double tau = 0.005;
  int policy_period = 2;  // actor + target updates every N critic updates
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double bc_alpha = 2.5;
  double policy_noise = 0.2;
  double noise_clip = 0.5;
  int hidden_dim = 64;
  int num_hidden = 2;
  std::uint64_t seed = 0;
  int log_interval = 1000;
  int eval_episodes = 3;
  DefenseSpec defense;

  void validate() const;
  std::string method_label() const;
};

// A trained policy bundle: live and target networks, the state normalizer it
// was trained under, and the metadata evaluation needs.
struct Agent {
  MlpNet actor, critic1, critic2;
  MlpNet target_actor, target_critic1, target_critic2;
  Normalizer norm;
  EnvSpec env;
  std::string tier;
  std::string method;
  std::uint64_t seed = 0;
  double ref_random_score = 0.0;
  double ref_expert_score = 0.0;
  DefenseSpec defense;

  // Greedy deterministic policy over raw observations (normalizes, then
  // clips the tanh output — already in [-1,1] — for safety).
  PolicyFn policy() const;
};

struct LogRecord {
  long iter = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double defense_term = 0.0;
  double clean_eval_return = 0.0;
  bool has_eval = false;
};

struct Batch {
  Tensor s, a, r, s2, done;  // s, s2 normalized
  std::vector<int> indices;
};

struct CriticLosses {
  double td = 0.0, defense_term = 0.0, total = 0.0;
};
struct ActorLosses {
  double q_term = 0.0, bc_term = 0.0, defense_term = 0.0, total = 0.0;
};

// TD3+BC with optional defense regularizers, one iteration of Algorithm-1
// style policy evaluation / policy improvement per step. One instance owns
// the mutable agent state; evaluation callbacks see frozen copies.
class Trainer {
 public:
  Trainer(TrainConfig config, const Dataset& dataset);

  Batch sample_batch();

  // Clipped double-Q TD update on both critics, plus the critic-defense
  // term when configured. Gradients reach the critics only.
  CriticLosses policy_evaluation(const Batch& batch);

  // TD3+BC actor objective -lambda_bc*Q1(s, pi(s)) + ||pi(s)-a||^2, with the
  // BC scale detached, plus the actor-defense term when configured.
  // Gradients reach the actor only.
  ActorLosses policy_improvement(const Batch& batch);

  void soft_update_targets();

  // Full loop: sample -> policy_evaluation -> (every policy_period)
  // policy_improvement + target updates, logging every log_interval with a
  // small clean evaluation. Aborts with NumericalFailureError carrying the
  // iteration, batch indices and loss components if a loss goes non-finite.
  std::vector<LogRecord> run();

  const Agent& agent() const { return agent_; }
  Agent& agent() { return agent_; }
  long iteration() const { return iter_; }
  long actor_updates() const { return actor_updates_; }

 private:
  Tensor make_defense_states(const Batch& batch, AttackKind generator);

  TrainConfig config_;
  const Dataset& dataset_;
  Tensor s_norm_, s2_norm_;
  Agent agent_;
  Adam opt_actor_, opt_c1_, opt_c2_;
  Rng rng_;
  long iter_ = 0;
  long actor_updates_ = 0;
  ActorLosses last_actor_losses_;
  CriticLosses last_critic_losses_;
};

std::vector<LogRecord> write_training_log(const std::filesystem::path& file,
                                          const std::vector<LogRecord>& log);

// Agent bundle on disk: six network checkpoints plus agent.json metadata.
void save_agent(const Agent& agent, const std::filesystem::path& dir);
Agent load_agent(const std::filesystem::path& dir);
// Combined content hash of the six network payloads.
std::string agent_checkpoint_hash(const std::filesystem::path& dir);

}  // namespace rolab
