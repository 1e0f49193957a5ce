#include <benchmark/benchmark.h>

#include "rolab/attack.hpp"
#include "rolab/dataset.hpp"
#include "rolab/env.hpp"
#include "rolab/graph.hpp"
#include "rolab/net.hpp"
#include "rolab/rng.hpp"
#include "rolab/stats.hpp"
#include "rolab/trainer.hpp"

namespace {

using namespace rolab;

void BM_ForwardBatch256(benchmark::State& state) {
  Rng rng(1);
  MlpNet net = MlpNet::make({4, 64, 64, 2}, OutputActivation::Tanh, rng);
  Tensor x(256, 4);
  for (auto& v : x.raw()) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x));
  }
}
BENCHMARK(BM_ForwardBatch256);

void BM_GraphBackwardBatch256(benchmark::State& state) {
  Rng rng(2);
  MlpNet net = MlpNet::make({6, 64, 64, 1}, OutputActivation::None, rng);
  Tensor x(256, 6);
  for (auto& v : x.raw()) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    Graph g;
    NetBinding p = bind_params(g, net, true);
    Val y = apply_net(g, p, net, g.leaf(x, false));
    Val obj = g.mean_all(g.square(y));
    g.backward(obj);
    benchmark::DoNotOptimize(g.grad(p.w[1]));
  }
}
BENCHMARK(BM_GraphBackwardBatch256);

void BM_CriticAttackBatch256(benchmark::State& state) {
  Rng rng(3);
  MlpNet actor = MlpNet::make({4, 64, 64, 2}, OutputActivation::Tanh, rng);
  MlpNet critic = MlpNet::make({6, 64, 64, 1}, OutputActivation::None, rng);
  Tensor s(256, 4);
  for (auto& v : s.raw()) v = rng.uniform(-1.0, 1.0);
  PerturbationBudget budget;
  for (auto _ : state) {
    benchmark::DoNotOptimize(attack_critic(s, actor, critic, budget));
  }
}
BENCHMARK(BM_CriticAttackBatch256);

void BM_TrainIteration(benchmark::State& state) {
  EnvSpec spec = EnvSpec::pointmass();
  Dataset ds = generate_dataset(spec, "expert", 4096, 1);
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.log_interval = 1000000;
  cfg.eval_episodes = 0;
  Trainer tr(cfg, ds);
  for (auto _ : state) {
    Batch b = tr.sample_batch();
    tr.policy_evaluation(b);
    tr.policy_improvement(b);
    tr.soft_update_targets();
  }
}
BENCHMARK(BM_TrainIteration);

void BM_RolloutPointmass(benchmark::State& state) {
  EnvSpec spec = EnvSpec::pointmass();
  PolicyFn pol = expert_controller(spec);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(spec, pol, seed++).episode_return);
  }
}
BENCHMARK(BM_RolloutPointmass);

void BM_BootstrapCi2000(benchmark::State& state) {
  Rng rng(5);
  std::vector<std::vector<double>> strata(3);
  for (auto& g : strata)
    for (int i = 0; i < 10; ++i) g.push_back(rng.uniform(0.0, 100.0));
  auto stat = [](std::span<const double> v) { return stats::iqm(v); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::bootstrap_ci(strata, stat, 2000, 0.95, 1));
  }
}
BENCHMARK(BM_BootstrapCi2000);

}  // namespace

BENCHMARK_MAIN();
