#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rolab/attack.hpp"
#include "rolab/report.hpp"
#include "rolab/trainer.hpp"

namespace rolab {

struct EvalOptions {
  std::vector<AttackKind> attacks{AttackKind::None};
  PerturbationBudget budget;
  int episodes = 10;
  int seeds = 5;
  std::uint64_t seed_base = 0;
  int jobs = 1;
};

// Rolls the agent under each (attack, seed) pair and scores it. Episode
// initial states depend only on (seed, episode), so every attack kind sees
// the same start states; attacks perturb the policy's normalized
// observation and never the simulator state. Results come back in
// (attack, seed) order regardless of the worker count.
//
// robust_q may be null unless the robust_critic attack is requested, in
// which case a MissingArtifactError explains how to produce one.
std::vector<RunScores> evaluate(const Agent& agent, const MlpNet* robust_q,
                                const EvalOptions& options,
                                const std::string& checkpoint_hash);

// Mean over rows of ||pi(s_tilde) - pi(s)||^2 with s_tilde crafted by the
// actor attack against this same actor. States are normalized.
double actor_sensitivity(const MlpNet& actor, const Tensor& s_norm,
                         const PerturbationBudget& budget);

// Mean over rows of (Q(s_tilde, a) - Q(s, a))^2 with a = pi(s) and s_tilde
// from the critic attack against this (actor, critic) pair.
double critic_sensitivity(const MlpNet& actor, const MlpNet& critic,
                          const Tensor& s_norm, const PerturbationBudget& budget);

}  // namespace rolab
