// SPDX-License-Identifier: Apache-2.0
//
// Binding of the generic world model to the uplink: feature extraction from
// environment states, the learned targets o^u_{t+1} and o^b_{t+1}, batched
// loss over transitions and Phase-2 training.
#pragma once

#include <span>
#include <vector>

#include "cmbrl/causal/world_model.hpp"
#include "cmbrl/nn/adam.hpp"
#include "cmbrl/rollout/replay_buffer.hpp"

namespace cmbrl::causal {

/// Slot-t quantities a batch row is built from. `dcms` may be empty when no
/// requested variable needs them.
struct SlotInput {
  const mac::GlobalState* state = nullptr;
  std::span<const mac::Decision> decisions;
  std::span<const mac::DownlinkControl> dcms;
};

/// Raw widths: node state = window encoding, gateway state = gateway window,
/// node obs one-hot(P+1), gateway obs one-hot(U+2), decision = ucm one-hot
/// then action one-hot, channel action one-hot(3), dcm one-hot(3).
std::map<VariableRole, std::size_t> uplink_role_widths(const mac::EnvConfig& config);

/// Default graph with categorical heads for every o^u_{t+1} (P+1 classes)
/// and o^b_{t+1} (U+2 classes), in that order.
CausalWorldModel make_uplink_model(const mac::EnvConfig& config, const ModelDims& dims, std::uint64_t seed);

int node_observation_target(const CausalGraph& graph, int node);
int gateway_observation_target(const CausalGraph& graph);

VariableBatch uplink_inputs(const mac::EnvConfig& config, const CausalGraph& graph,
                            std::span<const SlotInput> rows, std::span<const int> variables);

TargetBatch uplink_targets(const CausalWorldModel& model, std::span<const mac::Transition* const> batch);

nn::Tensor uplink_model_loss(const CausalWorldModel& model, const mac::EnvConfig& config,
                             std::span<const mac::Transition* const> batch, double lambda);

/// Samples o_{t+1} target by target in model order (nodes 1..U, then the
/// gateway), one uniform() draw each.
mac::SlotOutcome sample_outcome(const CausalWorldModel& model, const mac::EnvConfig& config,
                                const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                                Rng& rng);
/// Argmax of every head.
mac::SlotOutcome most_likely_outcome(const CausalWorldModel& model, const mac::EnvConfig& config,
                                     const mac::GlobalState& state, std::span<const mac::Decision> decisions);

/// Fraction of transitions whose argmax prediction equals the observed
/// outcome on every learned variable.
double prediction_accuracy(const CausalWorldModel& model, const mac::EnvConfig& config,
                           std::span<const mac::Transition* const> batch);

/// Mean held-out NLL per transition, lambda excluded.
double mean_nll(const CausalWorldModel& model, const mac::EnvConfig& config,
                std::span<const mac::Transition* const> batch);

struct ModelTrainConfig {
  int steps = 100;             // N_model
  std::size_t batch_size = 64;
  double lambda = 1e-4;
};

struct ModelTrainResult {
  std::vector<double> losses;
  bool skipped = false;  // buffer smaller than one minibatch
};

/// `steps` Adam steps on minibatches drawn uniformly without replacement.
ModelTrainResult train_model(CausalWorldModel& model, nn::Adam& optimizer, const mac::EnvConfig& config,
                             const rollout::ReplayBuffer& buffer, const ModelTrainConfig& train, Rng& rng);

}  // namespace cmbrl::causal
