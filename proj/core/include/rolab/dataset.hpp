#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rolab/env.hpp"
#include "rolab/tensor.hpp"

namespace rolab {

// Per-dimension affine state normalization, (s - mean) / std.
// std is floored at 1e-6 when estimated from data.
struct Normalizer {
  Tensor mean, std;  // (1, state_dim)
  Tensor apply(const Tensor& states) const;
  bool empty() const { return mean.numel() == 0; }
};

// Column store of offline transitions plus the metadata needed to normalize
// states and D4RL-style scores.
struct Dataset {
  EnvSpec env;
  std::string tier;  // expert | medium-expert | medium-replay | examination
  Tensor s, a, s_next;  // (N, dim)
  Tensor r, done;       // (N, 1)
  Tensor state_mean, state_std;  // (1, state_dim)
  double ref_random_score = 0.0;
  double ref_expert_score = 0.0;
  std::uint64_t seed = 0;
  std::string generator_version;

  // Which generator produced each transition (0 expert, 1 medium,
  // 2 noise-scheduled). Populated at generation time only; not persisted.
  std::vector<std::uint8_t> source_tags;

  std::size_t size() const { return static_cast<std::size_t>(s.rows()); }
  Normalizer normalizer() const { return {state_mean, state_std}; }
};

extern const std::vector<std::string> kQualityTiers;

// Generates an offline dataset by rolling scripted behavior policies:
//   expert        tuned controller, no noise
//   medium        detuned controller + Gaussian action noise (sigma 0.3)
//   medium-expert 50% expert transitions followed by 50% medium
//   medium-replay detuned controller with noise interpolating 1.0 -> 0.3
//                 over the course of collection
// Reference scores come from 100 rollouts each of the uniform-random policy
// and the expert controller. Throws on unknown tier or size < 1.
Dataset generate_dataset(const EnvSpec& spec, const std::string& tier,
                         std::size_t size, std::uint64_t seed);

// Recomputes mean/std (population, floored at 1e-6) over the s column.
void compute_state_stats(Dataset& ds);

// data.csv with header s0..s{n-1},a0..a{m-1},r,sn0..sn{n-1},done at full
// decimal precision, plus the meta.json sidecar.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Builds a dataset in memory from raw trajectories (used for the
// examination buffer).
Dataset dataset_from_transitions(const EnvSpec& env, const std::string& tier,
                                 const std::vector<Transition>& transitions,
                                 std::uint64_t seed);

}  // namespace rolab
