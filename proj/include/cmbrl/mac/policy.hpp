// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cmbrl/mac/env.hpp"

namespace cmbrl::mac {

/// Decentralized team: one decision per node from the global state. Each
/// node must read only its own part of the state.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;
  virtual std::vector<Decision> decide(const GlobalState& state, Rng& rng) const = 0;
};

/// Plays one episode from reset(config, env_seed) until done. Policy
/// randomness comes from `policy_rng`, channel and gateway randomness from
/// the environment's own stream.
std::vector<Transition> run_episode(const EnvConfig& config, const JointPolicy& policy,
                                    std::uint64_t env_seed, Rng& policy_rng);

/// Sum of rewards.
double episode_return(const std::vector<Transition>& episode);

}  // namespace cmbrl::mac
