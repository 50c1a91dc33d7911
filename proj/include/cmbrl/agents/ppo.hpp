// SPDX-License-Identifier: Apache-2.0
//
// Decentralized per-node policies trained with the clipped surrogate and a
// centralized value baseline over the concatenated agent inputs.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmbrl/agents/networks.hpp"
#include "cmbrl/mac/policy.hpp"
#include "cmbrl/nn/adam.hpp"

namespace cmbrl::agents {

struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
/// A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
/// `values` holds T + 1 entries, the last one the bootstrap value.
AdvantageBatch gae(std::span<const double> rewards, std::span<const double> values,
                   const std::vector<bool>& dones, double gamma, double lambda);

/// Zero mean, unit variance; left unchanged when the spread is below 1e-12.
void normalize(std::vector<double>& values);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A)
double clipped_surrogate_term(double ratio, double advantage, double clip_eps);

struct AgentConfig {
  NetworkDims dims;
  /// One policy network for every node (ablation); per-node otherwise.
  bool share_policy = false;
  double policy_lr = 1e-4;
  double value_lr = 1e-4;
};

class PpoTeam final : public mac::JointPolicy {
 public:
  PpoTeam(const mac::EnvConfig& env, const AgentConfig& config, std::uint64_t seed);

  PpoTeam(const PpoTeam&) = delete;
  PpoTeam& operator=(const PpoTeam&) = delete;

  /// Samples every node's heads, node 1 first.
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng& rng) const override;
  std::vector<mac::Decision> decide_greedy(const mac::GlobalState& state) const;

  const PolicyNetwork& policy(int node) const;
  const ValueNetwork& value() const { return value_; }
  double value_of(const mac::GlobalState& state) const;

  const mac::EnvConfig& env() const { return env_; }
  const AgentConfig& config() const { return config_; }
  nn::ParameterStore& policy_store() { return policy_store_; }
  const nn::ParameterStore& policy_store() const { return policy_store_; }
  nn::ParameterStore& value_store() { return value_store_; }
  const nn::ParameterStore& value_store() const { return value_store_; }
  nn::Adam& policy_optimizer() { return policy_opt_; }
  nn::Adam& value_optimizer() { return value_opt_; }

 private:
  mac::EnvConfig env_;
  AgentConfig config_;
  nn::ParameterStore policy_store_;
  nn::ParameterStore value_store_;
  std::vector<PolicyNetwork> policies_;
  ValueNetwork value_;
  nn::Adam policy_opt_;
  nn::Adam value_opt_;
};

/// Argmax view of a team, for evaluation.
class GreedyTeam final : public mac::JointPolicy {
 public:
  explicit GreedyTeam(const PpoTeam& team) : team_(team) {}
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng&) const override {
    return team_.decide_greedy(state);
  }

 private:
  const PpoTeam& team_;
};

struct PpoSample {
  std::vector<std::vector<double>> inputs;  // per node
  std::vector<mac::Decision> decisions;
  std::vector<double> old_log_probs;        // per node
  std::vector<double> global_input;
  double advantage = 0.0;
  double return_target = 0.0;
};

/// Splits the transitions into contiguous segments (a segment ends at a
/// done or truncated transition, at a break in continuity, or at the end),
/// evaluates the current value network and runs gae per segment. A
/// segment that ends without `done` bootstraps from V(after).
std::vector<PpoSample> build_samples(const PpoTeam& team, std::span<const mac::Transition* const> transitions,
                                     double gamma, double lambda);

struct PpoConfig {
  double clip_eps = 0.2;
  int epochs = 5;                  // N_PPO
  std::size_t batch_size = 64;
  /// Minibatches per epoch; 0 means a full shuffled pass over the samples.
  int minibatches_per_epoch = 0;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;
};

struct PpoDiagnostics {
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int updates = 0;
};

/// Negated clipped surrogate averaged over samples and nodes, minus the
/// entropy bonus. `advantages` is aligned with `batch` and used as given.
/// Fills ratio statistics when `diag` is given.
nn::Tensor policy_loss(const PpoTeam& team, std::span<const PpoSample* const> batch,
                       std::span<const double> advantages, const PpoConfig& config,
                       PpoDiagnostics* diag = nullptr);
nn::Tensor value_loss(const PpoTeam& team, std::span<const PpoSample* const> batch);

/// Throws UsageError on an empty sample set.
PpoDiagnostics ppo_update(PpoTeam& team, const std::vector<PpoSample>& samples, const PpoConfig& config,
                          Rng& rng);

}  // namespace cmbrl::agents
