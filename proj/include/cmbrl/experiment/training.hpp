// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmbrl/experiment/config.hpp"
#include "cmbrl/experiment/metrics.hpp"
#include "cmbrl/rollout/rollout.hpp"

namespace cmbrl::experiment {

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over all episodes
  std::size_t episodes = 0;
};

/// `episodes` episodes per seed; episode i of seed s resets the environment
/// with derive_seed(s, i). Policy randomness, if any, comes from a stream
/// seeded with s. Nothing is recorded anywhere.
EvalResult evaluate(const mac::JointPolicy& policy, const mac::EnvConfig& env, int episodes,
                    std::span<const std::uint64_t> seeds);

/// Seed streams carved out of one experiment seed.
namespace streams {
inline constexpr std::uint64_t kTrainEnv = 1;
inline constexpr std::uint64_t kPolicy = 2;
inline constexpr std::uint64_t kModelInit = 3;
inline constexpr std::uint64_t kAgentInit = 4;
inline constexpr std::uint64_t kModelBatches = 5;
inline constexpr std::uint64_t kRollouts = 6;
inline constexpr std::uint64_t kPpo = 7;
inline constexpr std::uint64_t kEval = 8;
}  // namespace streams

/// One seed of one method, advanced an epoch at a time:
///   Phase 1  play the epoch's episodes in the real environment into D
///   Phase 2  every n_graph epochs, N_model model steps on D
///   Phase 3  n_round times: rollouts from D, PPO on recent D plus D_sim
/// then a greedy evaluation. Tabular Q learns online during Phase 1; the
/// predefined policy only plays.
class SeedRun {
 public:
  SeedRun(const TrainConfig& config, std::uint64_t seed);
  ~SeedRun();
  SeedRun(const SeedRun&) = delete;
  SeedRun& operator=(const SeedRun&) = delete;

  bool finished() const { return epoch_ >= config_.epochs(); }
  const MetricsRecord& run_epoch();

  const MetricsTrace& trace() const { return trace_; }
  const rollout::ReplayBuffer& buffer() const { return buffer_; }
  std::uint64_t seed() const { return seed_; }
  const TrainConfig& config() const { return config_; }

  long episodes_collected() const { return episodes_; }
  long real_env_steps() const { return real_steps_; }
  int model_updates() const { return model_updates_; }
  int ppo_rounds() const { return ppo_rounds_; }

  /// Greedy policy of the method as trained so far.
  const mac::JointPolicy& greedy_policy() const;
  /// Seed used for evaluation episodes.
  std::uint64_t eval_seed() const;

  /// Nullptr unless the method is causal-mbrl.
  const agents::PpoTeam* team() const { return team_.get(); }
  const causal::CausalWorldModel* model() const { return model_.get(); }

  /// Writes "<prefix>_policy.params", "<prefix>_value.params" and
  /// "<prefix>_model.params" for causal-mbrl; nothing for other methods.
  void save_checkpoint(const std::string& prefix) const;

 private:
  void phase_one(MetricsRecord& rec);
  void phase_two(MetricsRecord& rec);
  void phase_three(MetricsRecord& rec);

  TrainConfig config_;
  std::uint64_t seed_;
  int epoch_ = 0;
  long episodes_ = 0;
  long real_steps_ = 0;
  int model_updates_ = 0;
  int ppo_rounds_ = 0;
  MetricsTrace trace_;
  rollout::ReplayBuffer buffer_;

  Rng policy_rng_;
  Rng model_rng_;
  Rng rollout_rng_;
  Rng ppo_rng_;

  std::unique_ptr<agents::PpoTeam> team_;
  std::unique_ptr<agents::GreedyTeam> greedy_team_;
  std::unique_ptr<causal::CausalWorldModel> model_;
  std::unique_ptr<nn::Adam> model_opt_;
  std::unique_ptr<baselines::QLearningTeam> q_;
  std::unique_ptr<baselines::GreedyQTeam> greedy_q_;
  std::unique_ptr<baselines::PredefinedTeam> predefined_;
};

/// Runs every epoch unless `stop` becomes true between epochs.
MetricsTrace train_seed(const TrainConfig& config, std::uint64_t seed, const std::atomic<bool>* stop = nullptr);

/// One trace per configured seed, in seed order; seeds may run on
/// config.threads worker threads.
std::vector<MetricsTrace> train_all_seeds(const TrainConfig& config, const std::atomic<bool>* stop = nullptr);

}  // namespace cmbrl::experiment
