#include "rolab/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <thread>

#include "rolab/errors.hpp"
#include "rolab/stats.hpp"

namespace rolab {

namespace {

RunScores run_one(const Agent& agent, const MlpNet* robust_q, AttackKind kind,
                  const PerturbationBudget& budget, int episodes,
                  std::uint64_t seed_index, std::uint64_t seed_base,
                  const std::string& checkpoint_hash) {
  AttackSpec spec{kind, budget};
  const std::uint64_t noise_seed =
      Rng::derive(seed_base, 0xA7000000ull + seed_index * 131 +
                                 static_cast<std::uint64_t>(kind));
  auto attack = std::make_shared<ObservationAttack>(ObservationAttack::make(
      spec, &agent.actor, &agent.critic1, robust_q, noise_seed));

  const Normalizer norm = agent.norm;
  ObsFilter filter = [attack, norm](const Tensor& raw) {
    return (*attack)(norm.apply(raw));
  };
  // the policy sees the (already normalized, possibly perturbed) filter output
  const MlpNet* actor = &agent.actor;
  PolicyFn policy = [actor](const Tensor& obs) {
    Tensor a = actor->forward(obs);
    for (auto& v : a.raw()) v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    return a;
  };

  RunScores out;
  out.task = agent.env.name_str();
  out.tier = agent.tier;
  out.method = agent.method;
  out.attack = to_string(kind);
  out.seed = seed_index;
  out.checkpoint_hash = checkpoint_hash;
  for (int ep = 0; ep < episodes; ++ep) {
    // start states are paired across attack kinds: (seed, episode) only
    const std::uint64_t ep_seed =
        Rng::derive(seed_base, 0x40000000ull + seed_index * 100000 +
                                   static_cast<std::uint64_t>(ep));
    out.returns.push_back(
        rollout(agent.env, policy, ep_seed, &filter).episode_return);
  }
  out.normalized_score = stats::normalize_score(
      stats::mean(out.returns), agent.ref_random_score, agent.ref_expert_score);
  return out;
}

}  // namespace

std::vector<RunScores> evaluate(const Agent& agent, const MlpNet* robust_q,
                                const EvalOptions& options,
                                const std::string& checkpoint_hash) {
  options.budget.validate();
  if (options.episodes < 1) throw std::invalid_argument("evaluate: episodes < 1");
  if (options.seeds < 1) throw std::invalid_argument("evaluate: seeds < 1");
  for (AttackKind kind : options.attacks) {
    if (kind == AttackKind::RobustCritic && robust_q == nullptr)
      throw MissingArtifactError(
          "robust_critic attack needs a robust-Q checkpoint; run "
          "`rolab prepare-robust-q` against this agent first");
  }

  struct Job {
    AttackKind kind;
    int seed;
  };
  std::vector<Job> jobs;
  for (AttackKind kind : options.attacks)
    for (int s = 0; s < options.seeds; ++s) jobs.push_back({kind, s});

  std::vector<RunScores> results(jobs.size());
  const int workers =
      std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      results[i] = run_one(agent, robust_q, jobs[i].kind, options.budget,
                           options.episodes,
                           static_cast<std::uint64_t>(jobs[i].seed),
                           options.seed_base, checkpoint_hash);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        results[i] = run_one(agent, robust_q, jobs[i].kind, options.budget,
                             options.episodes,
                             static_cast<std::uint64_t>(jobs[i].seed),
                             options.seed_base, checkpoint_hash);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

double actor_sensitivity(const MlpNet& actor, const Tensor& s_norm,
                         const PerturbationBudget& budget) {
  const Tensor s_tilde = attack_actor(s_norm, actor, budget);
  const Tensor pi = actor.forward(s_norm);
  const Tensor pi_t = actor.forward(s_tilde);
  double total = 0.0;
  for (int r = 0; r < s_norm.rows(); ++r) {
    double d2 = 0.0;
    for (int c = 0; c < pi.cols(); ++c) {
      const double d = pi_t(r, c) - pi(r, c);
      d2 += d * d;
    }
    total += d2;
  }
  return total / s_norm.rows();
}

double critic_sensitivity(const MlpNet& actor, const MlpNet& critic,
                          const Tensor& s_norm, const PerturbationBudget& budget) {
  const Tensor a = actor.forward(s_norm);
  const Tensor s_tilde = attack_critic(s_norm, actor, critic, budget);
  auto q_at = [&](const Tensor& states) {
    Tensor x(states.rows(), states.cols() + a.cols());
    for (int r = 0; r < states.rows(); ++r) {
      for (int c = 0; c < states.cols(); ++c) x(r, c) = states(r, c);
      for (int c = 0; c < a.cols(); ++c) x(r, states.cols() + c) = a(r, c);
    }
    return critic.forward(x);
  };
  const Tensor q = q_at(s_norm);
  const Tensor qt = q_at(s_tilde);
  double total = 0.0;
  for (int r = 0; r < s_norm.rows(); ++r) {
    const double d = qt(r, 0) - q(r, 0);
    total += d * d;
  }
  return total / s_norm.rows();
}

}  // namespace rolab
