#include "rolab/attack.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rolab/graph.hpp"

namespace rolab {

namespace {

double clampd(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double signd(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

bool row_finite(const Tensor& t, int r) {
  for (int c = 0; c < t.cols(); ++c)
    if (!std::isfinite(t(r, c))) return false;
  return true;
}

}  // namespace

void PerturbationBudget::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("budget: epsilon < 0");
  if (step_size <= 0.0) throw std::invalid_argument("budget: step_size <= 0");
  if (num_steps < 1) throw std::invalid_argument("budget: num_steps < 1");
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Random: return "random";
    case AttackKind::Critic: return "critic";
    case AttackKind::RobustCritic: return "robust_critic";
    case AttackKind::Actor: return "actor";
  }
  return "none";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::None;
  if (s == "random") return AttackKind::Random;
  if (s == "critic") return AttackKind::Critic;
  if (s == "robust_critic") return AttackKind::RobustCritic;
  if (s == "actor") return AttackKind::Actor;
  throw std::invalid_argument("unknown attack kind: " + s);
}

Tensor pgd_optimize_batch(const BatchObjective& objective, const Tensor& center,
                          const PerturbationBudget& budget, OptimSense sense,
                          PgdStats* stats, const Tensor* init, int steps_override) {
  budget.validate();
  if (budget.epsilon == 0.0) return center;

  const int B = center.rows(), d = center.cols();
  const double eps = budget.epsilon;
  auto better = [sense](double a, double b) {
    return sense == OptimSense::Maximize ? a > b : a < b;
  };

  Tensor best = center;
  BatchEval at_center = objective(center);
  std::vector<double> best_vals(static_cast<std::size_t>(B));
  for (int r = 0; r < B; ++r) best_vals[static_cast<std::size_t>(r)] = at_center.values(r, 0);

  Tensor cur = center;
  if (init) {
    cur = *init;
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < d; ++c)
        cur(r, c) = clampd(cur(r, c), center(r, c) - eps, center(r, c) + eps);
  }

  std::vector<bool> frozen(static_cast<std::size_t>(B), false);
  const int steps = steps_override >= 0 ? steps_override : budget.num_steps;
  const double dir = sense == OptimSense::Maximize ? 1.0 : -1.0;

  for (int k = 0; k < steps; ++k) {
    const bool reuse_center_eval = (k == 0 && !init);
    BatchEval e = reuse_center_eval ? at_center : objective(cur);
    for (int r = 0; r < B; ++r) {
      if (frozen[static_cast<std::size_t>(r)]) continue;
      const double v = e.values(r, 0);
      if (std::isfinite(v) && better(v, best_vals[static_cast<std::size_t>(r)])) {
        best_vals[static_cast<std::size_t>(r)] = v;
        for (int c = 0; c < d; ++c) best(r, c) = cur(r, c);
      }
      if (!row_finite(e.grads, r)) {
        if (stats) ++stats->nonfinite_grad_events;
        frozen[static_cast<std::size_t>(r)] = true;
        continue;
      }
      for (int c = 0; c < d; ++c) {
        const double moved = cur(r, c) + dir * budget.step_size * signd(e.grads(r, c));
        cur(r, c) = clampd(moved, center(r, c) - eps, center(r, c) + eps);
      }
    }
  }

  // the final iterate is also a candidate
  BatchEval tail = objective(cur);
  for (int r = 0; r < B; ++r) {
    if (frozen[static_cast<std::size_t>(r)]) continue;
    const double v = tail.values(r, 0);
    if (std::isfinite(v) && better(v, best_vals[static_cast<std::size_t>(r)])) {
      best_vals[static_cast<std::size_t>(r)] = v;
      for (int c = 0; c < d; ++c) best(r, c) = cur(r, c);
    }
  }
  return best;
}

Tensor pgd_optimize(const ScalarObjective& objective, const Tensor& s,
                    const PerturbationBudget& budget, OptimSense sense,
                    PgdStats* stats) {
  BatchObjective batch = [&objective](const Tensor& pts) {
    BatchEval e;
    e.values = Tensor(1, 1);
    e.values(0, 0) = objective.value(pts);
    e.grads = objective.grad(pts);
    return e;
  };
  return pgd_optimize_batch(batch, s, budget, sense, stats);
}

Tensor random_perturbation(int rows, int cols, double epsilon, Rng& rng) {
  Tensor n(rows, cols);
  for (auto& v : n.raw()) v = rng.gaussian(0.0, epsilon);
  return n;
}

Tensor attack_random(const Tensor& s, const PerturbationBudget& budget, Rng& rng) {
  budget.validate();
  if (budget.epsilon == 0.0) return s;
  Tensor noise = random_perturbation(s.rows(), s.cols(), budget.epsilon, rng);
  Tensor out = s;
  for (int r = 0; r < s.rows(); ++r)
    for (int c = 0; c < s.cols(); ++c)
      out(r, c) += clampd(noise(r, c), -budget.epsilon, budget.epsilon);
  return out;
}

BatchObjective critic_attack_objective(const MlpNet& actor, const MlpNet& critic,
                                       const Tensor& s_clean) {
  return [&actor, &critic, s_clean](const Tensor& s_tilde) {
    Graph g;
    NetBinding pa = bind_params(g, actor, false);
    NetBinding pc = bind_params(g, critic, false);
    Val st = g.leaf(s_tilde, true);
    Val pi = apply_net(g, pa, actor, st);
    Val x = g.concat_cols(g.leaf(s_clean, false), pi);
    Val q = apply_net(g, pc, critic, x);
    g.backward(g.sum(q));
    return BatchEval{g.value(q), g.grad(st)};
  };
}

BatchObjective actor_attack_objective(const MlpNet& actor, const Tensor& s_clean) {
  Tensor pi_clean = actor.forward(s_clean);
  return [&actor, pi_clean](const Tensor& s_tilde) {
    Graph g;
    NetBinding pa = bind_params(g, actor, false);
    Val st = g.leaf(s_tilde, true);
    Val diff = g.sub(apply_net(g, pa, actor, st), g.leaf(pi_clean, false));
    Val obj = g.row_sum(g.square(diff));
    g.backward(g.sum(obj));
    return BatchEval{g.value(obj), g.grad(st)};
  };
}

Tensor attack_critic(const Tensor& s, const MlpNet& actor, const MlpNet& critic,
                     const PerturbationBudget& budget, PgdStats* stats) {
  if (critic.layer_dims.empty() || actor.layer_dims.empty())
    throw std::invalid_argument("attack_critic: networks not loaded");
  return pgd_optimize_batch(critic_attack_objective(actor, critic, s), s, budget,
                            OptimSense::Minimize, stats);
}

Tensor attack_robust_critic(const Tensor& s, const MlpNet& actor,
                            const MlpNet& robust_q, const PerturbationBudget& budget,
                            PgdStats* stats) {
  return attack_critic(s, actor, robust_q, budget, stats);
}

namespace {

// Per-row actor Jacobians: jac[j](r, i) = d actor_j / d s_i at row r.
std::vector<Tensor> actor_jacobian(const MlpNet& actor, const Tensor& s) {
  const int m = actor.output_dim();
  std::vector<Tensor> jac;
  jac.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    Graph g;
    NetBinding pa = bind_params(g, actor, false);
    Val st = g.leaf(s, true);
    Val pi = apply_net(g, pa, actor, st);
    Val col = g.slice_cols(pi, j, 1);
    g.backward(g.sum(col));
    jac.push_back(g.grad(st));
  }
  return jac;
}

// Dominant right-singular direction of each row's Jacobian via power
// iteration on J^T J, started from the all-ones direction. Sign fixed so
// the first non-zero component is positive.
Tensor dominant_input_direction(const std::vector<Tensor>& jac, int B, int d) {
  Tensor v(B, d);
  for (auto& x : v.raw()) x = 1.0 / std::sqrt(static_cast<double>(d));
  const int m = static_cast<int>(jac.size());
  for (int iter = 0; iter < 12; ++iter) {
    Tensor next(B, d);
    for (int r = 0; r < B; ++r) {
      for (int j = 0; j < m; ++j) {
        double w = 0.0;
        for (int c = 0; c < d; ++c) w += jac[static_cast<std::size_t>(j)](r, c) * v(r, c);
        for (int c = 0; c < d; ++c)
          next(r, c) += jac[static_cast<std::size_t>(j)](r, c) * w;
      }
    }
    for (int r = 0; r < B; ++r) {
      double norm = 0.0;
      for (int c = 0; c < d; ++c) norm += next(r, c) * next(r, c);
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        for (int c = 0; c < d; ++c)
          next(r, c) = 1.0 / std::sqrt(static_cast<double>(d));
      } else {
        for (int c = 0; c < d; ++c) next(r, c) /= norm;
      }
    }
    v = std::move(next);
  }
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < d; ++c) {
      if (v(r, c) != 0.0) {
        if (v(r, c) < 0.0)
          for (int k = 0; k < d; ++k) v(r, k) = -v(r, k);
        break;
      }
    }
  }
  return v;
}

}  // namespace

Tensor attack_actor(const Tensor& s, const MlpNet& actor,
                    const PerturbationBudget& budget, PgdStats* stats) {
  budget.validate();
  if (budget.epsilon == 0.0) return s;

  const int B = s.rows(), d = s.cols();
  auto jac = actor_jacobian(actor, s);
  Tensor v = dominant_input_direction(jac, B, d);
  Tensor first = s;
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < d; ++c)
      first(r, c) += budget.step_size * signd(v(r, c));

  return pgd_optimize_batch(actor_attack_objective(actor, s), s, budget,
                            OptimSense::Maximize, stats, &first,
                            budget.num_steps - 1);
}

ObservationAttack ObservationAttack::make(const AttackSpec& spec,
                                          const MlpNet* actor,
                                          const MlpNet* critic,
                                          const MlpNet* robust_q,
                                          std::uint64_t noise_seed) {
  spec.budget.validate();
  ObservationAttack a;
  a.spec_ = spec;
  a.rng_ = Rng(noise_seed);
  switch (spec.kind) {
    case AttackKind::None:
      break;
    case AttackKind::Random:
      break;
    case AttackKind::Critic:
      if (!actor || !critic)
        throw std::invalid_argument("critic attack requires actor and critic");
      a.actor_ = *actor;
      a.critic_ = *critic;
      break;
    case AttackKind::RobustCritic:
      if (!actor || !robust_q)
        throw std::invalid_argument("robust_critic attack requires actor and robust-Q");
      a.actor_ = *actor;
      a.robust_q_ = *robust_q;
      break;
    case AttackKind::Actor:
      if (!actor) throw std::invalid_argument("actor attack requires the actor");
      a.actor_ = *actor;
      break;
  }
  return a;
}

Tensor ObservationAttack::operator()(const Tensor& s_norm) {
  switch (spec_.kind) {
    case AttackKind::None:
      return s_norm;
    case AttackKind::Random:
      return attack_random(s_norm, spec_.budget, rng_);
    case AttackKind::Critic:
      return attack_critic(s_norm, *actor_, *critic_, spec_.budget, &stats_);
    case AttackKind::RobustCritic:
      return attack_robust_critic(s_norm, *actor_, *robust_q_, spec_.budget, &stats_);
    case AttackKind::Actor:
      return attack_actor(s_norm, *actor_, spec_.budget, &stats_);
  }
  return s_norm;
}

}  // namespace rolab
