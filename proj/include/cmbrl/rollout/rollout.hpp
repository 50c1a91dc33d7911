// SPDX-License-Identifier: Apache-2.0
//
// k-step model rollouts from real start states. The observation model
// supplies o_{t+1}; downlink messages, reward, windows and termination are
// produced by the same code path the real environment uses.
#pragma once

#include <cstdint>
#include <vector>

#include "cmbrl/causal/uplink.hpp"
#include "cmbrl/mac/policy.hpp"
#include "cmbrl/rollout/replay_buffer.hpp"

namespace cmbrl::rollout {

class ObservationModel {
 public:
  virtual ~ObservationModel() = default;
  virtual mac::SlotOutcome sample_next(const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                                       Rng& rng) const = 0;
};

/// The true data plane; with it a rollout is the real environment.
class SimulatorModel final : public ObservationModel {
 public:
  explicit SimulatorModel(mac::EnvConfig config) : config_(std::move(config)) {}
  mac::SlotOutcome sample_next(const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                               Rng& rng) const override;

 private:
  mac::EnvConfig config_;
};

/// Samples every learned head of a causal world model.
class LearnedModel final : public ObservationModel {
 public:
  LearnedModel(const causal::CausalWorldModel& model, mac::EnvConfig config)
      : model_(model), config_(std::move(config)) {}
  mac::SlotOutcome sample_next(const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                               Rng& rng) const override;

 private:
  const causal::CausalWorldModel& model_;
  mac::EnvConfig config_;
};

/// Up to k synthetic transitions from `start`. Decisions draw from
/// `policy_rng`; the model and the gateway protocol draw from `env_rng` in
/// the same order the environment does. Stops early once a transition is
/// done; a final transition that is not done is marked truncated. A
/// terminal start yields nothing. Throws UsageError for k < 1.
std::vector<mac::Transition> k_step_rollout(const ObservationModel& model, const mac::JointPolicy& policy,
                                            const mac::EnvConfig& config, const mac::GlobalState& start, int k,
                                            Rng& env_rng, Rng& policy_rng);

/// `num_rollouts` rollouts, each from the `before` state of a transition
/// drawn uniformly from `real`. Per rollout the start index, then a fresh
/// env stream seed and a fresh policy stream seed are taken from `rng`.
std::vector<mac::Transition> generate_synthetic(const ObservationModel& model, const mac::JointPolicy& policy,
                                                const mac::EnvConfig& config, const ReplayBuffer& real,
                                                int num_rollouts, int k, Rng& rng);

}  // namespace cmbrl::rollout
