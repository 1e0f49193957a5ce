#include <doctest.h>

#include <cmath>
#include <vector>

#include "rolab/attack.hpp"
#include "rolab/net.hpp"
#include "rolab/rng.hpp"

using namespace rolab;

namespace {

double linf(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
  return m;
}

// 2-d quadratic f(x) = x^T A x + b^T x with analytic gradient.
struct Quadratic {
  double a11, a12, a22, b1, b2;
  double value(double x, double y) const {
    return a11 * x * x + 2.0 * a12 * x * y + a22 * y * y + b1 * x + b2 * y;
  }
  ScalarObjective objective() const {
    return {
        [*this](const Tensor& p) { return value(p(0, 0), p(0, 1)); },
        [*this](const Tensor& p) {
          Tensor g(1, 2);
          g(0, 0) = 2.0 * a11 * p(0, 0) + 2.0 * a12 * p(0, 1) + b1;
          g(0, 1) = 2.0 * a22 * p(0, 1) + 2.0 * a12 * p(0, 0) + b2;
          return g;
        }};
  }
  // largest gradient magnitude over the ball's corners
  double grad_bound(const Tensor& c, double eps) const {
    double m = 0.0;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1}) {
        const double x = c(0, 0) + sx * eps, y = c(0, 1) + sy * eps;
        m = std::max(m, std::abs(2.0 * a11 * x + 2.0 * a12 * y + b1));
        m = std::max(m, std::abs(2.0 * a22 * y + 2.0 * a12 * x + b2));
      }
    return m;
  }
};

struct GridBest {
  double best_max, best_min;
};

GridBest grid_search(const Quadratic& q, const Tensor& c, double eps, int pts) {
  GridBest out{-1e300, 1e300};
  for (int i = 0; i < pts; ++i)
    for (int j = 0; j < pts; ++j) {
      const double x = c(0, 0) - eps + 2.0 * eps * i / (pts - 1);
      const double y = c(0, 1) - eps + 2.0 * eps * j / (pts - 1);
      const double v = q.value(x, y);
      out.best_max = std::max(out.best_max, v);
      out.best_min = std::min(out.best_min, v);
    }
  return out;
}

MlpNet tiny_actor_1d(double w, double b) {
  Rng rng(0);
  MlpNet net = MlpNet::make({1, 1}, OutputActivation::Tanh, rng);
  net.weights[0](0, 0) = w;
  net.biases[0](0, 0) = b;
  return net;
}

// critic(s, a) = w_s*s + w_a*a + c, exactly linear
MlpNet tiny_critic_1d(double ws, double wa, double c) {
  Rng rng(0);
  MlpNet net = MlpNet::make({2, 1}, OutputActivation::None, rng);
  net.weights[0](0, 0) = ws;
  net.weights[0](0, 1) = wa;
  net.biases[0](0, 0) = c;
  return net;
}

}  // namespace

TEST_CASE("pgd: zero epsilon returns the clean point for any objective") {
  PerturbationBudget budget;
  budget.epsilon = 0.0;
  Quadratic q{3.0, -1.0, 2.0, 0.5, -0.25};
  Tensor s = Tensor::row({0.3, -0.8});
  Tensor out = pgd_optimize(q.objective(), s, budget, OptimSense::Maximize);
  CHECK(out == s);
}

TEST_CASE("pgd: linear objective reaches the sign corner") {
  PerturbationBudget budget;  // eps 0.05, step 0.01, 5 steps
  Tensor s = Tensor::row({0.2, -0.4, 1.0});
  const std::vector<double> w{0.7, -1.3, 0.0001};
  ScalarObjective obj{
      [&w](const Tensor& p) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += w[static_cast<std::size_t>(i)] * p(0, i);
        return v;
      },
      [&w](const Tensor& p) {
        (void)p;
        return Tensor::row({w[0], w[1], w[2]});
      }};
  Tensor out = pgd_optimize(obj, s, budget, OptimSense::Maximize);
  CHECK(out(0, 0) == doctest::Approx(s(0, 0) + 0.05).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(s(0, 1) - 0.05).epsilon(1e-12));
  CHECK(out(0, 2) == doctest::Approx(s(0, 2) + 0.05).epsilon(1e-12));
}

TEST_CASE("pgd: matches a 41x41 grid oracle on random 2-d quadratics") {
  Rng rng(314);
  PerturbationBudget budget;
  const double eps = budget.epsilon;
  for (int trial = 0; trial < 25; ++trial) {
    Quadratic q{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Tensor s = Tensor::row({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    GridBest grid = grid_search(q, s, eps, 41);
    const double spacing = 2.0 * eps / 40.0;
    const double tol = q.grad_bound(s, eps) * spacing * 2.0 + 1e-12;

    Tensor up = pgd_optimize(q.objective(), s, budget, OptimSense::Maximize);
    CHECK(linf(up, s) <= eps + 1e-12);
    CHECK(q.value(up(0, 0), up(0, 1)) >= grid.best_max - tol);

    Tensor dn = pgd_optimize(q.objective(), s, budget, OptimSense::Minimize);
    CHECK(linf(dn, s) <= eps + 1e-12);
    CHECK(q.value(dn(0, 0), dn(0, 1)) <= grid.best_min + tol);
  }
}

TEST_CASE("pgd: non-finite gradient freezes at best-so-far and warns") {
  PerturbationBudget budget;
  int calls = 0;
  ScalarObjective obj{
      [&calls](const Tensor& p) {
        (void)p;
        return static_cast<double>(calls);
      },
      [&calls](const Tensor& p) {
        ++calls;
        Tensor g(1, 2);
        g(0, 0) = calls > 2 ? std::nan("") : 1.0;
        g(0, 1) = 1.0;
        return g;
      }};
  PgdStats stats;
  Tensor s = Tensor::row({0.0, 0.0});
  Tensor out = pgd_optimize(obj, s, budget, OptimSense::Maximize, &stats);
  CHECK(stats.nonfinite_grad_events == 1);
  CHECK(linf(out, s) <= budget.epsilon + 1e-12);
}

TEST_CASE("attack_random: epsilon 0 is the identity") {
  PerturbationBudget budget;
  budget.epsilon = 0.0;
  Rng rng(1);
  Tensor s = Tensor::row({1.0, -2.0});
  CHECK(attack_random(s, budget, rng) == s);
}

TEST_CASE("attack_random: reproducible under a fixed seed") {
  PerturbationBudget budget;
  Tensor s = Tensor::row({0.1, 0.2, 0.3});
  Rng a(99), b(99);
  CHECK(attack_random(s, budget, a) == attack_random(s, budget, b));
}

TEST_CASE("attack_random: pre-projection noise std is epsilon within 2%") {
  const double eps = 0.05;
  Rng rng(12345);
  const int draws = 100000;
  Tensor noise = random_perturbation(draws, 2, eps, rng);
  for (int c = 0; c < 2; ++c) {
    double m = 0.0;
    for (int r = 0; r < draws; ++r) m += noise(r, c);
    m /= draws;
    double var = 0.0;
    for (int r = 0; r < draws; ++r) {
      const double d = noise(r, c) - m;
      var += d * d;
    }
    var /= draws;
    CHECK(std::sqrt(var) == doctest::Approx(eps).epsilon(0.02));
  }
}

TEST_CASE("attack_critic: epsilon 0 induces no action change") {
  Rng rng(8);
  MlpNet actor = MlpNet::make({2, 8, 1}, OutputActivation::Tanh, rng);
  MlpNet critic = MlpNet::make({3, 8, 1}, OutputActivation::None, rng);
  PerturbationBudget budget;
  budget.epsilon = 0.0;
  Tensor s = Tensor::row({0.4, -0.9});
  Tensor st = attack_critic(s, actor, critic, budget);
  CHECK(st == s);
}

TEST_CASE("attack_critic: never better for the victim than the clean point") {
  Rng rng(21);
  PerturbationBudget budget;
  for (int trial = 0; trial < 20; ++trial) {
    MlpNet actor = MlpNet::make({3, 12, 2}, OutputActivation::Tanh, rng);
    MlpNet critic = MlpNet::make({5, 12, 1}, OutputActivation::None, rng);
    Tensor s(1, 3);
    for (auto& v : s.raw()) v = rng.uniform(-1, 1);
    Tensor st = attack_critic(s, actor, critic, budget);
    CHECK(linf(st, s) <= budget.epsilon + 1e-12);

    auto q_of = [&](const Tensor& obs) {
      Tensor pi = actor.forward(obs);
      Tensor x(1, 5);
      for (int c = 0; c < 3; ++c) x(0, c) = s(0, c);
      for (int c = 0; c < 2; ++c) x(0, 3 + c) = pi(0, c);
      return critic.forward(x)(0, 0);
    };
    CHECK(q_of(st) <= q_of(s) + 1e-12);
  }
}

TEST_CASE("attack_critic: tiny 1-d nets match an exhaustive grid search") {
  MlpNet actor = tiny_actor_1d(2.0, 0.1);
  MlpNet critic = tiny_critic_1d(0.3, 1.7, -0.2);
  PerturbationBudget budget;
  Tensor s = Tensor::row({0.15});

  Tensor st = attack_critic(s, actor, critic, budget);
  auto q_of = [&](double obs) {
    const double a = std::tanh(2.0 * obs + 0.1);
    return 0.3 * s(0, 0) + 1.7 * a - 0.2;
  };
  double grid_best = 1e300;
  const int pts = 2001;
  for (int i = 0; i < pts; ++i) {
    const double x = s(0, 0) - budget.epsilon +
                     2.0 * budget.epsilon * i / (pts - 1);
    grid_best = std::min(grid_best, q_of(x));
  }
  // Q is monotone in the 1-d perturbation, so PGD must reach the ball edge.
  CHECK(q_of(st(0, 0)) <= grid_best + 1e-6);
  CHECK(linf(st, s) <= budget.epsilon + 1e-12);
}

TEST_CASE("attack_robust_critic: same contract as attack_critic") {
  MlpNet actor = tiny_actor_1d(1.5, -0.2);
  MlpNet robust_q = tiny_critic_1d(-0.4, 2.1, 0.0);
  PerturbationBudget budget;
  Tensor s = Tensor::row({-0.3});

  SUBCASE("epsilon 0") {
    PerturbationBudget zero = budget;
    zero.epsilon = 0.0;
    CHECK(attack_robust_critic(s, actor, robust_q, zero) == s);
  }
  SUBCASE("grid oracle") {
    Tensor st = attack_robust_critic(s, actor, robust_q, budget);
    auto q_of = [&](double obs) {
      const double a = std::tanh(1.5 * obs - 0.2);
      return -0.4 * s(0, 0) + 2.1 * a;
    };
    double grid_best = 1e300;
    for (int i = 0; i < 2001; ++i) {
      const double x = s(0, 0) - budget.epsilon + 2.0 * budget.epsilon * i / 2000;
      grid_best = std::min(grid_best, q_of(x));
    }
    CHECK(q_of(st(0, 0)) <= grid_best + 1e-6);
  }
}

TEST_CASE("attack_actor: epsilon 0 keeps the clean point with objective 0") {
  Rng rng(10);
  MlpNet actor = MlpNet::make({2, 8, 2}, OutputActivation::Tanh, rng);
  PerturbationBudget budget;
  budget.epsilon = 0.0;
  Tensor s = Tensor::row({0.5, 0.5});
  CHECK(attack_actor(s, actor, budget) == s);
}

TEST_CASE("attack_actor: objective at the result is >= the clean value 0") {
  Rng rng(33);
  PerturbationBudget budget;
  for (int trial = 0; trial < 20; ++trial) {
    MlpNet actor = MlpNet::make({3, 10, 2}, OutputActivation::Tanh, rng);
    Tensor s(1, 3);
    for (auto& v : s.raw()) v = rng.uniform(-1, 1);
    Tensor st = attack_actor(s, actor, budget);
    CHECK(linf(st, s) <= budget.epsilon + 1e-12);
    Tensor pc = actor.forward(s);
    Tensor pt = actor.forward(st);
    double obj = 0.0;
    for (std::size_t i = 0; i < pc.numel(); ++i) {
      const double d = pc.raw()[i] - pt.raw()[i];
      obj += d * d;
    }
    CHECK(obj >= 0.0);
    // the spectral first step makes strict progress for non-degenerate actors
    CHECK(obj > 0.0);
  }
}

TEST_CASE("attack_actor: linear actor matches analytic corner search") {
  // pi(s) = W s with W = [[1.0, 0.2], [-0.3, 0.8]]; the objective
  // ||W(s - s_tilde)||^2 is convex, so the box maximum sits at a corner.
  Rng rng(0);
  MlpNet actor = MlpNet::make({2, 2}, OutputActivation::None, rng);
  actor.weights[0](0, 0) = 1.0;
  actor.weights[0](0, 1) = 0.2;
  actor.weights[0](1, 0) = -0.3;
  actor.weights[0](1, 1) = 0.8;
  actor.biases[0](0, 0) = 0.0;
  actor.biases[0](0, 1) = 0.0;

  PerturbationBudget budget;
  Tensor s = Tensor::row({0.3, -0.6});
  Tensor st = attack_actor(s, actor, budget);

  auto obj_at = [&](double dx, double dy) {
    const double d0 = 1.0 * dx + 0.2 * dy;
    const double d1 = -0.3 * dx + 0.8 * dy;
    return d0 * d0 + d1 * d1;
  };
  double corner_best = 0.0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      corner_best = std::max(corner_best,
                             obj_at(sx * budget.epsilon, sy * budget.epsilon));
  // grid refinement confirms the corner is the true maximum
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const double dx = -budget.epsilon + 2.0 * budget.epsilon * i / 40;
      const double dy = -budget.epsilon + 2.0 * budget.epsilon * j / 40;
      CHECK(obj_at(dx, dy) <= corner_best + 1e-12);
    }

  const double got = obj_at(st(0, 0) - s(0, 0), st(0, 1) - s(0, 1));
  CHECK(got == doctest::Approx(corner_best).epsilon(1e-9));
}

TEST_CASE("ball containment fuzz across all attack kinds") {
  Rng rng(555);
  for (int trial = 0; trial < 60; ++trial) {
    const int sd = 2 + rng.uniform_int(3);
    const int ad = 1 + rng.uniform_int(2);
    MlpNet actor = MlpNet::make({sd, 8, ad}, OutputActivation::Tanh, rng);
    MlpNet critic = MlpNet::make({sd + ad, 8, 1}, OutputActivation::None, rng);
    PerturbationBudget budget;
    budget.epsilon = rng.uniform(0.0, 0.2);
    Tensor s(1, sd);
    for (auto& v : s.raw()) v = rng.uniform(-2, 2);

    CHECK(linf(attack_random(s, budget, rng), s) <= budget.epsilon + 1e-12);
    CHECK(linf(attack_critic(s, actor, critic, budget), s) <= budget.epsilon + 1e-12);
    CHECK(linf(attack_robust_critic(s, actor, critic, budget), s) <=
          budget.epsilon + 1e-12);
    CHECK(linf(attack_actor(s, actor, budget), s) <= budget.epsilon + 1e-12);
  }
}

TEST_CASE("attacks are pure given inputs and seed") {
  Rng rng(3);
  MlpNet actor = MlpNet::make({3, 8, 2}, OutputActivation::Tanh, rng);
  MlpNet critic = MlpNet::make({5, 8, 1}, OutputActivation::None, rng);
  PerturbationBudget budget;
  Tensor s = Tensor::row({0.1, -0.1, 0.6});

  CHECK(attack_critic(s, actor, critic, budget) ==
        attack_critic(s, actor, critic, budget));
  CHECK(attack_actor(s, actor, budget) == attack_actor(s, actor, budget));

  AttackSpec spec;
  spec.kind = AttackKind::Random;
  auto a1 = ObservationAttack::make(spec, nullptr, nullptr, nullptr, 17);
  auto a2 = ObservationAttack::make(spec, nullptr, nullptr, nullptr, 17);
  CHECK(a1(s) == a2(s));
}

TEST_CASE("ObservationAttack: missing networks are hard errors") {
  AttackSpec spec;
  spec.kind = AttackKind::Critic;
  CHECK_THROWS_AS(ObservationAttack::make(spec, nullptr, nullptr, nullptr, 0),
                  std::invalid_argument);
  spec.kind = AttackKind::RobustCritic;
  Rng rng(1);
  MlpNet actor = MlpNet::make({2, 4, 1}, OutputActivation::Tanh, rng);
  CHECK_THROWS_AS(ObservationAttack::make(spec, &actor, nullptr, nullptr, 0),
                  std::invalid_argument);
}
