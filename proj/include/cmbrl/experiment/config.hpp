// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration. Files use INI syntax:
//
//   ; comment
//   [section]
//   key = value
//
// Sections: env, train, model, qlearning. Unknown sections or keys, and
// values that do not parse, are configuration errors. Keys left out keep
// their defaults.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmbrl/agents/ppo.hpp"
#include "cmbrl/baselines/baselines.hpp"
#include "cmbrl/causal/world_model.hpp"

namespace cmbrl::experiment {

enum class Method { CausalMbrl, TabularQ, Predefined };

std::string method_name(Method m);
/// "causal-mbrl", "tabular-q" or "predefined"; throws ConfigError otherwise.
Method parse_method(const std::string& name);

struct TrainConfig {
  mac::EnvConfig env;

  Method method = Method::CausalMbrl;
  int n_epoch = 50;
  /// When positive, overrides n_epoch: ceil(total / episodes_per_epoch)
  /// epochs, the last one shortened so exactly `total` episodes are played.
  long total_episodes = 0;
  int episodes_per_epoch = 20;
  int n_graph = 1;
  int n_round = 4;
  int k_rollout = 6;
  int n_rollout = 50;
  int n_model = 100;
  int n_ppo = 5;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double model_lr = 1e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.0;
  /// Output scale of the value network; 0 = env.max_steps.
  double value_scale = 0.0;
  double l2_lambda = 1e-4;
  /// PPO minibatches per PPO epoch; 0 = a full pass over the combined data.
  int ppo_minibatches = 0;
  /// Most recent real transitions joined with the synthetic data for PPO;
  /// 0 = the whole real buffer.
  std::size_t ppo_real_window = 0;
  std::size_t real_buffer_capacity = 0;
  bool share_policy = false;
  int eval_episodes = 128;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  int threads = 1;

  causal::ModelDims model;
  baselines::QLearningConfig qlearning;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  int epochs() const;
  int episodes_in_epoch(int epoch) const;
  long episode_budget() const;
};

/// History window used when the config leaves it unset: 1 for one node,
/// 3 for more.
int default_history_window(int num_nodes);

TrainConfig parse_config(std::istream& in);
TrainConfig load_config(const std::string& path);
/// Applies a "section.key=value" override, as given on the command line.
/// Leaves `config` unchanged when the result would be invalid.
void apply_override(TrainConfig& config, const std::string& assignment);
/// Full config in the file syntax, every key present.
std::string format_config(const TrainConfig& config);

}  // namespace cmbrl::experiment
