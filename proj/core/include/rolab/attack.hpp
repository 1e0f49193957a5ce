#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "rolab/net.hpp"
#include "rolab/rng.hpp"
#include "rolab/tensor.hpp"

namespace rolab {

// l-infinity ball B(s, epsilon) with fixed-size sign-gradient steps.
// epsilon and step size live in normalized-state units.
struct PerturbationBudget {
  double epsilon = 0.05;
  double step_size = 0.01;
  int num_steps = 5;

  void validate() const;
};

enum class AttackKind { None, Random, Critic, RobustCritic, Actor };

std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  PerturbationBudget budget;
};

enum class OptimSense { Maximize, Minimize };

struct PgdStats {
  int nonfinite_grad_events = 0;
};

// Batched objective: values (B, 1) and gradients (B, dim) at the queried
// points. Rows are independent.
struct BatchEval {
  Tensor values;
  Tensor grads;
};
using BatchObjective = std::function<BatchEval(const Tensor&)>;

// Projected gradient ascent/descent over B(center, epsilon), one row at a
// time. Sign steps of fixed size, no random start; the center is always a
// candidate and the best visited point per row is returned, so the result
// is never worse than the clean point under `sense`. Rows whose gradient
// goes non-finite are frozen at their best-so-far and counted in `stats`.
//
// `init` optionally overrides the first iterate (still projected into the
// ball); `steps_override` >= 0 replaces budget.num_steps.
Tensor pgd_optimize_batch(const BatchObjective& objective, const Tensor& center,
                          const PerturbationBudget& budget, OptimSense sense,
                          PgdStats* stats = nullptr, const Tensor* init = nullptr,
                          int steps_override = -1);

// Single-state form over an explicit value/gradient pair.
struct ScalarObjective {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> grad;
};
Tensor pgd_optimize(const ScalarObjective& objective, const Tensor& s,
                    const PerturbationBudget& budget, OptimSense sense,
                    PgdStats* stats = nullptr);

// Raw noise draw used by the random attack: one N(0, epsilon) sample per
// coordinate, before any projection.
Tensor random_perturbation(int rows, int cols, double epsilon, Rng& rng);

// s + N(0, epsilon) projected onto B(s, epsilon).
Tensor attack_random(const Tensor& s, const PerturbationBudget& budget, Rng& rng);

// argmin over B(s, eps) of critic(s, actor(s_tilde)): push the observation
// where the induced action looks worst to the critic. The first critic
// argument stays clean.
Tensor attack_critic(const Tensor& s, const MlpNet& actor, const MlpNet& critic,
                     const PerturbationBudget& budget, PgdStats* stats = nullptr);

// Same objective evaluated under a separately trained robust Q function.
Tensor attack_robust_critic(const Tensor& s, const MlpNet& actor,
                            const MlpNet& robust_q, const PerturbationBudget& budget,
                            PgdStats* stats = nullptr);

// argmax over B(s, eps) of ||actor(s) - actor(s_tilde)||^2 (the divergence
// between clean and perturbed policy outputs for a unit-covariance Gaussian
// head). The clean point is a stationary point of this objective, so the
// first PGD step follows the top right-singular direction of the actor
// Jacobian (power iteration, deterministic sign convention) before ordinary
// sign steps take over.
Tensor attack_actor(const Tensor& s, const MlpNet& actor,
                    const PerturbationBudget& budget, PgdStats* stats = nullptr);

// Objective builders shared with the training-time defense generators.
BatchObjective critic_attack_objective(const MlpNet& actor, const MlpNet& critic,
                                       const Tensor& s_clean);
BatchObjective actor_attack_objective(const MlpNet& actor, const Tensor& s_clean);

// Evaluation-time observation attack. Holds frozen network copies so it can
// be used from several evaluation threads; each instance owns its noise
// stream. Operates on normalized observations, one row at a time.
class ObservationAttack {
 public:
  static ObservationAttack make(const AttackSpec& spec,
                                const MlpNet* actor,
                                const MlpNet* critic,
                                const MlpNet* robust_q,
                                std::uint64_t noise_seed);

  Tensor operator()(const Tensor& s_norm);

  AttackKind kind() const { return spec_.kind; }
  int nonfinite_grad_events() const { return stats_.nonfinite_grad_events; }

 private:
  AttackSpec spec_;
  std::optional<MlpNet> actor_, critic_, robust_q_;
  Rng rng_{0};
  PgdStats stats_;
};

}  // namespace rolab
