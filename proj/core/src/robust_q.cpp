#include "rolab/robust_q.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rolab/adam.hpp"
#include "rolab/graph.hpp"

namespace rolab {

namespace {

// PGD objective for the inner max: (Q(s, a_hat) - Q(s, a))^2 over actions.
BatchObjective smoothness_objective(const MlpNet& q, const Tensor& s_norm,
                                    const Tensor& q_base) {
  return [&q, s_norm, q_base](const Tensor& a_hat) {
    Graph g;
    NetBinding pq = bind_params(g, q, false);
    Val ah = g.leaf(a_hat, true);
    Val x = g.concat_cols(g.leaf(s_norm, false), ah);
    Val diff = g.sub(apply_net(g, pq, q, x), g.leaf(q_base, false));
    Val obj = g.square(diff);
    g.backward(g.sum(obj));
    return BatchEval{g.value(obj), g.grad(ah)};
  };
}

// The squared difference has an exactly-zero gradient at a_hat = a, so the
// first step follows sign(dQ/da) before ordinary sign steps take over.
Tensor smoothness_max_actions(const MlpNet& q, const Tensor& s_norm,
                              const Tensor& a, const Tensor& q_base,
                              const PerturbationBudget& budget,
                              PgdStats* stats = nullptr) {
  Tensor first = a;
  {
    Graph g;
    NetBinding pq = bind_params(g, q, false);
    Val ah = g.leaf(a, true);
    Val x = g.concat_cols(g.leaf(s_norm, false), ah);
    g.backward(g.sum(apply_net(g, pq, q, x)));
    Tensor dq = g.grad(ah);
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c)
        first(r, c) += budget.step_size *
                       (dq(r, c) > 0.0 ? 1.0 : (dq(r, c) < 0.0 ? -1.0 : 0.0));
  }
  return pgd_optimize_batch(smoothness_objective(q, s_norm, q_base), a, budget,
                            OptimSense::Maximize, stats, &first,
                            budget.num_steps - 1);
}

Tensor gather_rows(const Tensor& src, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), src.cols());
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < src.cols(); ++c)
      out(r, c) = src(idx[static_cast<std::size_t>(r)], c);
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

}  // namespace

std::vector<Transition> collect_examination_buffer(const EnvSpec& spec,
                                                   const PolicyFn& victim,
                                                   std::size_t budget,
                                                   std::uint64_t seed) {
  if (budget < 1)
    throw std::invalid_argument("collect_examination_buffer: budget < 1");
  std::vector<Transition> buffer;
  buffer.reserve(budget);
  std::uint64_t ep = 0;
  while (buffer.size() < budget) {
    auto res = rollout(spec, victim, Rng::derive(seed, 31000 + ep));
    for (auto& tr : res.trajectory) {
      tr.done = false;  // horizon cuts are timeouts, not terminals
      buffer.push_back(std::move(tr));
      if (buffer.size() == budget) break;
    }
    ++ep;
  }
  return buffer;
}

double action_smoothness_term(const MlpNet& q, const Tensor& s_norm,
                              const Tensor& a, const PerturbationBudget& budget) {
  Tensor sa = Tensor(s_norm.rows(), s_norm.cols() + a.cols());
  for (int r = 0; r < sa.rows(); ++r) {
    for (int c = 0; c < s_norm.cols(); ++c) sa(r, c) = s_norm(r, c);
    for (int c = 0; c < a.cols(); ++c) sa(r, s_norm.cols() + c) = a(r, c);
  }
  const Tensor q_base = q.forward(sa);
  auto obj = smoothness_objective(q, s_norm, q_base);
  Tensor a_hat = smoothness_max_actions(q, s_norm, a, q_base, budget);
  BatchEval at_best = obj(a_hat);
  double total = 0.0;
  for (int r = 0; r < at_best.values.rows(); ++r) total += at_best.values(r, 0);
  return total / at_best.values.rows();
}

RobustQResult train_robust_q(const MlpNet& victim_actor, const Normalizer& norm,
                             const Dataset& buffer, const RobustQConfig& config) {
  const int n = static_cast<int>(buffer.size());
  if (n < config.batch_size)
    throw std::invalid_argument(
        "train_robust_q: examination buffer smaller than one batch");
  config.action_budget.validate();

  const int sd = buffer.env.state_dim, ad = buffer.env.action_dim;
  std::vector<int> dims;
  dims.push_back(sd + ad);
  for (int h : config.hidden_dims) dims.push_back(h);
  dims.push_back(1);

  Rng rng(config.seed);
  RobustQResult out;
  out.q1 = MlpNet::make(dims, OutputActivation::None, rng);
  out.q2 = MlpNet::make(dims, OutputActivation::None, rng);
  MlpNet t1 = out.q1, t2 = out.q2;
  Adam opt1(out.q1.params(), config.lr);
  Adam opt2(out.q2.params(), config.lr);

  const Tensor s_all = norm.apply(buffer.s);
  const Tensor s2_all = norm.apply(buffer.s_next);

  PgdStats pgd_stats;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    std::vector<int> idx(static_cast<std::size_t>(config.batch_size));
    for (auto& i : idx) i = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    const Tensor s = gather_rows(s_all, idx);
    const Tensor a = gather_rows(buffer.a, idx);
    const Tensor r = gather_rows(buffer.r, idx);
    const Tensor s2 = gather_rows(s2_all, idx);
    const Tensor done = gather_rows(buffer.done, idx);

    // TD target through the victim policy's next action, clipped double-Q.
    const Tensor a2 = victim_actor.forward(s2);
    Tensor x2(config.batch_size, sd + ad);
    for (int row = 0; row < config.batch_size; ++row) {
      for (int c = 0; c < sd; ++c) x2(row, c) = s2(row, c);
      for (int c = 0; c < ad; ++c) x2(row, sd + c) = a2(row, c);
    }
    const Tensor q1t = t1.forward(x2);
    const Tensor q2t = t2.forward(x2);
    Tensor y(config.batch_size, 1);
    for (int row = 0; row < config.batch_size; ++row)
      y(row, 0) = r(row, 0) + config.gamma * (1.0 - done(row, 0)) *
                                  std::min(q1t(row, 0), q2t(row, 0));

    // Inner max over the action ball, per critic.
    Tensor sa(config.batch_size, sd + ad);
    for (int row = 0; row < config.batch_size; ++row) {
      for (int c = 0; c < sd; ++c) sa(row, c) = s(row, c);
      for (int c = 0; c < ad; ++c) sa(row, sd + c) = a(row, c);
    }
    Tensor a_hat1, a_hat2;
    if (config.lambda > 0.0) {
      const Tensor q1_base = out.q1.forward(sa);
      const Tensor q2_base = out.q2.forward(sa);
      a_hat1 = smoothness_max_actions(out.q1, s, a, q1_base,
                                      config.action_budget, &pgd_stats);
      a_hat2 = smoothness_max_actions(out.q2, s, a, q2_base,
                                      config.action_budget, &pgd_stats);
    }

    Graph g;
    NetBinding p1 = bind_params(g, out.q1, true);
    NetBinding p2 = bind_params(g, out.q2, true);
    Val sa_leaf = g.leaf(sa, false);
    Val y_leaf = g.leaf(y, false);
    Val q1 = apply_net(g, p1, out.q1, sa_leaf);
    Val q2 = apply_net(g, p2, out.q2, sa_leaf);
    Val td = g.add(g.mean_all(g.square(g.sub(q1, y_leaf))),
                   g.mean_all(g.square(g.sub(q2, y_leaf))));
    Val loss = td;
    double smooth_value = 0.0;
    if (config.lambda > 0.0) {
      Val s_leaf = g.leaf(s, false);
      Val x1 = g.concat_cols(s_leaf, g.leaf(a_hat1, false));
      Val x2v = g.concat_cols(s_leaf, g.leaf(a_hat2, false));
      Val sm1 = g.mean_all(g.square(g.sub(apply_net(g, p1, out.q1, x1), q1)));
      Val sm2 = g.mean_all(g.square(g.sub(apply_net(g, p2, out.q2, x2v), q2)));
      Val sm = g.add(sm1, sm2);
      smooth_value = g.value(sm)(0);
      loss = g.add(td, g.scale(sm, config.lambda));
    }
    const double loss_value = g.value(loss)(0);
    if (!std::isfinite(loss_value))
      throw std::runtime_error("train_robust_q: non-finite loss at iteration " +
                               std::to_string(iter));
    if (iter == 1) out.initial_loss = loss_value;
    if (iter == config.iterations) {
      out.final_loss = loss_value;
      out.final_smoothness_term = smooth_value;
    }

    g.backward(loss);
    std::vector<Tensor> g1, g2;
    for (std::size_t l = 0; l < p1.w.size(); ++l) {
      g1.push_back(g.grad(p1.w[l]));
      g1.push_back(g.grad(p1.b[l]));
      g2.push_back(g.grad(p2.w[l]));
      g2.push_back(g.grad(p2.b[l]));
    }
    opt1.step(g1);
    opt2.step(g2);
    soft_update(t1, out.q1, config.tau);
    soft_update(t2, out.q2, config.tau);
  }
  out.nonfinite_grad_events = pgd_stats.nonfinite_grad_events;
  return out;
}

}  // namespace rolab
