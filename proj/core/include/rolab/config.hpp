#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rolab/evaluate.hpp"
#include "rolab/trainer.hpp"

namespace rolab {

// Experiment configuration file: TOML with sections [env], [dataset],
// [train], [defense], [attack_eval]. Every key has a default except
// env.name and dataset.path; unknown sections or keys are hard errors.
//
//   [env]         name
//   [dataset]     path
//   [train]       iterations batch_size gamma tau policy_period actor_lr
//                 critic_lr bc_alpha policy_noise noise_clip hidden_dim
//                 num_hidden seed log_interval eval_episodes
//   [defense]     kind lambda generator epsilon step_size steps
//   [attack_eval] attacks epsilon step_size steps episodes seeds
//
// `attacks` is a comma-separated list of
// none|random|critic|actor|robust_critic.
struct ExperimentConfig {
  std::string env_name;
  std::string dataset_path;
  TrainConfig train;
  EvalOptions attack_eval;
};

ExperimentConfig parse_experiment_config(const std::string& toml_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

std::vector<AttackKind> parse_attack_list(const std::string& csv);

}  // namespace rolab
