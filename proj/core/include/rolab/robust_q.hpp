#pragma once

#include <cstdint>
#include <vector>

#include "rolab/attack.hpp"
#include "rolab/dataset.hpp"
#include "rolab/env.hpp"
#include "rolab/net.hpp"

namespace rolab {

// Training setup for the attacker-side Q function behind the robust critic
// attack. Twin critics with target copies, TD targets bootstrapped through
// the victim policy's own next action, plus an action-smoothness penalty
// whose inner max over B(a, eps) is approximated by PGD over actions.
struct RobustQConfig {
  int iterations = 20000;
  int batch_size = 256;
  double lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double lambda = 1.0;
  std::vector<int> hidden_dims{64, 64};
  PerturbationBudget action_budget;  // eps 0.05, step 0.01, 5 steps
  std::uint64_t seed = 0;
};

struct RobustQResult {
  MlpNet q1, q2;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_smoothness_term = 0.0;
  int nonfinite_grad_events = 0;
};

// Rolls the victim policy (clean observations) in the test environment until
// exactly `budget` transitions are collected; the last episode is truncated.
std::vector<Transition> collect_examination_buffer(const EnvSpec& spec,
                                                   const PolicyFn& victim,
                                                   std::size_t budget,
                                                   std::uint64_t seed);

// Minimizes the TD error plus lambda times the action-smoothness penalty
// over the examination buffer. States are normalized with the victim's
// normalizer so the learned Q lives in the same input space as the attacks.
// Throws if the buffer holds fewer transitions than one batch.
RobustQResult train_robust_q(const MlpNet& victim_actor, const Normalizer& norm,
                             const Dataset& buffer, const RobustQConfig& config);

// Mean over the given batch of max_{a_hat in B(a, eps)} (Q(s,a_hat)-Q(s,a))^2,
// the quantity the lambda term controls. Used for measurements and tests.
double action_smoothness_term(const MlpNet& q, const Tensor& s_norm,
                              const Tensor& a, const PerturbationBudget& budget);

}  // namespace rolab
