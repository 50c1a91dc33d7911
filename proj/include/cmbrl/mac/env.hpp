// SPDX-License-Identifier: Apache-2.0
//
// Discrete-time simulator of the multi-node uplink: error-free control
// channels, a shared packet-erasure data channel and the gateway's fixed
// grant/ack protocol.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmbrl/mac/types.hpp"
#include "cmbrl/rng.hpp"

namespace cmbrl::mac {

struct EnvConfig {
  int num_nodes = 1;          // U
  int buffer_capacity = 2;    // P, packets per node at reset
  int max_steps = 16;         // T_max
  double bler = 0.5;          // rho, erasure probability of a lone transmission
  int history_window = 1;     // N
  bool erased_looks_idle = true;
  /// Per-node Bernoulli packet arrival probability per slot; 0 disables arrivals.
  double arrival_rate = 0.0;
  /// When set, an episode only drains once every deleted packet had been
  /// received by the gateway; deleting an undelivered packet loses it and the
  /// episode then runs until T_max.
  bool require_delivery = true;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Gateway observation meaning "collision" (U + 1).
  int collision_symbol() const { return num_nodes + 1; }
};

/// Everything the agents and the world model can condition on at slot t,
/// plus the packet bookkeeping needed to decide termination.
struct GlobalState {
  int t = 0;
  std::vector<int> buffers;                 // o_t^u, buffer count at slot start
  int gateway_obs = 0;                      // o_t^b, channel outcome of slot t-1
  std::vector<std::uint8_t> head_delivered; // head-of-line packet already received
  bool packet_lost = false;                 // an undelivered packet was deleted
  std::vector<NodeWindow> node_windows;     // x_t^u
  GatewayWindow gateway_window;             // x_t^b

  bool operator==(const GlobalState&) const = default;
};

struct EnvState {
  EnvConfig config;
  GlobalState global;
  Rng rng;

  bool operator==(const EnvState& other) const {
    return global == other.global && rng == other.rng;
  }
};

/// Next observations o_{t+1}: what a world model has to predict.
struct SlotOutcome {
  std::vector<int> buffers;
  int gateway_obs = 0;

  bool operator==(const SlotOutcome&) const = default;
};

struct Transition {
  GlobalState before;
  std::vector<Decision> decisions;
  std::vector<DownlinkControl> dcms;
  double reward = 0.0;
  SlotOutcome next;
  GlobalState after;
  bool done = false;
  /// Rollout fragment ended without reaching a terminal state.
  bool truncated = false;
  /// Generated by a model rollout rather than the real environment.
  bool synthetic = false;

  bool operator==(const Transition&) const = default;
};

/// Fresh episode: every buffer full, padded windows, rng seeded with `seed`.
EnvState reset(const EnvConfig& config, std::uint64_t seed);

/// Padded initial GlobalState (no rng involvement).
GlobalState initial_state(const EnvConfig& config);

/// Channel outcome for the set of nodes (1-based ids) that actually put a
/// packet on the air. Draws once from `rng` iff exactly one node transmits
/// and 0 < bler < 1.
int resolve_channel(const EnvConfig& config, std::span<const int> transmitting_nodes, Rng& rng);

/// Gateway protocol: ACK the successful sender, grant one uniformly chosen
/// remaining requester. Draws once from `rng` iff two or more requesters are
/// eligible for the grant.
std::vector<DownlinkControl> gateway_signaling(const EnvConfig& config,
                                               std::span<const UplinkControl> srs,
                                               int channel_obs, Rng& rng);

/// True data plane of one slot: channel resolution, deletions, arrivals.
SlotOutcome simulate_data_plane(const EnvConfig& config, const GlobalState& state,
                                std::span<const Decision> decisions, Rng& rng);

/// Finishes a slot from its data-plane outcome: gateway signaling, delivery
/// bookkeeping, reward, window shift and termination. Shared by the real
/// environment and model rollouts so both follow identical control logic.
Transition complete_slot(const EnvConfig& config, const GlobalState& state,
                         std::span<const Decision> decisions, const SlotOutcome& outcome,
                         Rng& rng);

/// Terminal test for a state at the start of a slot.
bool is_terminal(const EnvConfig& config, const GlobalState& state);

/// Advances the environment one slot. Throws UsageError on a finished episode
/// and ContractViolation on a malformed decision vector.
Transition step(EnvState& state, std::span<const Decision> decisions);

/// Flat network input for a node window: per record
/// [pad, buffer / P, ucm one-hot(2), action one-hot(3), dcm one-hot(3)].
std::vector<double> encode_node_window(const NodeWindow& window, int buffer_capacity);
NodeWindow decode_node_window(std::span<const double> encoded, int history_window,
                              int buffer_capacity);
int node_record_width();

/// Gateway window: per record
/// [pad, observation one-hot(U+2), per node ucm one-hot(2), per node dcm one-hot(3)].
std::vector<double> encode_gateway_window(const GatewayWindow& window, int num_nodes);
GatewayWindow decode_gateway_window(std::span<const double> encoded, int history_window,
                                    int num_nodes);
int gateway_record_width(int num_nodes);

/// What node `node` (0-based) conditions its decision on: its window x_t^u
/// followed by a one-hot of its current buffer count o_t^u (P + 1 entries).
std::vector<double> encode_agent_input(const EnvConfig& config, const GlobalState& state, int node);
std::size_t agent_input_width(const EnvConfig& config);

/// Concatenation of every node's agent input and the gateway window, then
/// the bookkeeping no agent observes: per node head_delivered, packet_lost
/// and t / T_max. Only the centralized critic reads it.
std::vector<double> encode_global_input(const EnvConfig& config, const GlobalState& state);
std::size_t global_input_width(const EnvConfig& config);

}  // namespace cmbrl::mac
