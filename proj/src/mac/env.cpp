// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/mac/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmbrl/errors.hpp"

namespace cmbrl::mac {

Decision Decision::from_index(int index) {
  if (index < 0 || index >= kNumDecisions) {
    throw ContractViolation("decision index out of range: " + std::to_string(index));
  }
  return Decision{static_cast<UplinkControl>(index / kNumActions),
                  static_cast<NodeAction>(index % kNumActions)};
}

void EnvConfig::validate() const {
  if (num_nodes < 1) throw ConfigError("env.num_nodes must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("env.buffer_capacity must be >= 1");
  if (max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
  if (!(bler >= 0.0 && bler <= 1.0)) throw ConfigError("env.bler must lie in [0, 1]");
  if (history_window < 1) throw ConfigError("env.history_window must be >= 1");
  if (!(arrival_rate >= 0.0 && arrival_rate <= 1.0)) {
    throw ConfigError("env.arrival_rate must lie in [0, 1]");
  }
}

GlobalState initial_state(const EnvConfig& config) {
  const auto users = static_cast<std::size_t>(config.num_nodes);
  const auto window = static_cast<std::size_t>(config.history_window);
  GlobalState s;
  s.t = 0;
  s.buffers.assign(users, config.buffer_capacity);
  s.gateway_obs = 0;
  s.head_delivered.assign(users, 0);
  s.packet_lost = false;
  s.node_windows.assign(users, NodeWindow(window));
  GatewayRecord pad;
  pad.ucms.assign(users, UplinkControl::NoRequest);
  pad.dcms.assign(users, DownlinkControl::Null);
  s.gateway_window.assign(window, pad);
  return s;
}

EnvState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  return EnvState{config, initial_state(config), Rng(seed)};
}

int resolve_channel(const EnvConfig& config, std::span<const int> transmitting_nodes, Rng& rng) {
  for (int u : transmitting_nodes) {
    if (u < 1 || u > config.num_nodes) {
      throw ContractViolation("resolve_channel: node id " + std::to_string(u) +
                              " outside [1, " + std::to_string(config.num_nodes) + "]");
    }
  }
  if (transmitting_nodes.empty()) return 0;
  if (transmitting_nodes.size() >= 2) return config.collision_symbol();

  bool erased;
  if (config.bler <= 0.0) {
    erased = false;
  } else if (config.bler >= 1.0) {
    erased = true;
  } else {
    erased = rng.uniform() < config.bler;
  }
  if (!erased) return transmitting_nodes.front();
  return config.erased_looks_idle ? 0 : config.collision_symbol();
}

std::vector<DownlinkControl> gateway_signaling(const EnvConfig& config,
                                               std::span<const UplinkControl> srs,
                                               int channel_obs, Rng& rng) {
  const int users = config.num_nodes;
  if (static_cast<int>(srs.size()) != users) {
    throw ContractViolation("gateway_signaling: expected " + std::to_string(users) +
                            " uplink messages, got " + std::to_string(srs.size()));
  }
  std::vector<DownlinkControl> dcms(static_cast<std::size_t>(users), DownlinkControl::Null);
  const bool success = channel_obs >= 1 && channel_obs <= users;
  if (success) dcms[static_cast<std::size_t>(channel_obs - 1)] = DownlinkControl::Ack;

  std::vector<std::size_t> eligible;
  for (std::size_t u = 0; u < srs.size(); ++u) {
    if (srs[u] != UplinkControl::SchedulingRequest) continue;
    if (success && static_cast<int>(u) == channel_obs - 1) continue;
    eligible.push_back(u);
  }
  if (!eligible.empty()) {
    const std::size_t pick = eligible.size() == 1 ? eligible.front()
                                                  : eligible[rng.below(eligible.size())];
    dcms[pick] = DownlinkControl::Grant;
  }
  return dcms;
}

namespace {

void check_decisions(const EnvConfig& config, std::span<const Decision> decisions) {
  if (static_cast<int>(decisions.size()) != config.num_nodes) {
    throw ContractViolation("expected " + std::to_string(config.num_nodes) +
                            " decisions, got " + std::to_string(decisions.size()));
  }
}

template <class Record>
void push_front(std::vector<Record>& window, Record record) {
  std::rotate(window.rbegin(), window.rbegin() + 1, window.rend());
  window.front() = std::move(record);
}

}  // namespace

SlotOutcome simulate_data_plane(const EnvConfig& config, const GlobalState& state,
                                std::span<const Decision> decisions, Rng& rng) {
  check_decisions(config, decisions);
  std::vector<int> transmitting;
  for (std::size_t u = 0; u < decisions.size(); ++u) {
    if (decisions[u].action == NodeAction::Transmit && state.buffers[u] > 0) {
      transmitting.push_back(static_cast<int>(u) + 1);
    }
  }
  SlotOutcome out;
  out.gateway_obs = resolve_channel(config, transmitting, rng);
  out.buffers = state.buffers;
  for (std::size_t u = 0; u < decisions.size(); ++u) {
    if (decisions[u].action == NodeAction::DeleteOldest && out.buffers[u] > 0) --out.buffers[u];
  }
  if (config.arrival_rate > 0.0) {
    for (auto& b : out.buffers) {
      if (rng.uniform() < config.arrival_rate && b < config.buffer_capacity) ++b;
    }
  }
  return out;
}

bool is_terminal(const EnvConfig& config, const GlobalState& state) {
  if (state.t >= config.max_steps) return true;
  const bool drained =
      std::all_of(state.buffers.begin(), state.buffers.end(), [](int b) { return b == 0; });
  return drained && !(config.require_delivery && state.packet_lost);
}

Transition complete_slot(const EnvConfig& config, const GlobalState& state,
                         std::span<const Decision> decisions, const SlotOutcome& outcome,
                         Rng& rng) {
  check_decisions(config, decisions);
  const auto users = decisions.size();

  Transition tr;
  tr.before = state;
  tr.decisions.assign(decisions.begin(), decisions.end());
  std::vector<UplinkControl> srs(users);
  for (std::size_t u = 0; u < users; ++u) srs[u] = decisions[u].ucm;
  tr.dcms = gateway_signaling(config, srs, outcome.gateway_obs, rng);

  GlobalState next = state;
  for (std::size_t u = 0; u < users; ++u) {
    const Decision d = decisions[u];
    const bool nonempty = state.buffers[u] > 0;
    if (d.action == NodeAction::Transmit && nonempty &&
        outcome.gateway_obs == static_cast<int>(u) + 1) {
      next.head_delivered[u] = 1;
    }
    if (d.action == NodeAction::DeleteOldest && nonempty) {
      if (!next.head_delivered[u]) next.packet_lost = true;
      next.head_delivered[u] = 0;
    }
    push_front(next.node_windows[u], NodeRecord{false, state.buffers[u], d, tr.dcms[u]});
  }
  push_front(next.gateway_window, GatewayRecord{false, state.gateway_obs, srs, tr.dcms});
  next.buffers = outcome.buffers;
  next.gateway_obs = outcome.gateway_obs;
  next.t = state.t + 1;

  tr.reward = -1.0;
  tr.next = outcome;
  tr.done = is_terminal(config, next);
  tr.after = std::move(next);
  return tr;
}

Transition step(EnvState& state, std::span<const Decision> decisions) {
  if (is_terminal(state.config, state.global)) {
    throw UsageError("step called on a finished episode");
  }
  check_decisions(state.config, decisions);
  const SlotOutcome outcome = simulate_data_plane(state.config, state.global, decisions, state.rng);
  Transition tr = complete_slot(state.config, state.global, decisions, outcome, state.rng);
  state.global = tr.after;
  return tr;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

std::size_t argmax_block(std::span<const double> v, std::size_t begin, std::size_t width) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < width; ++i) {
    if (v[begin + i] > v[begin + best]) best = i;
  }
  return best;
}

}  // namespace

int node_record_width() { return 1 + 1 + kNumUplinkControls + kNumActions + kNumDownlinkControls; }

std::vector<double> encode_node_window(const NodeWindow& window, int buffer_capacity) {
  const auto width = static_cast<std::size_t>(node_record_width());
  std::vector<double> out(window.size() * width, 0.0);
  for (std::size_t r = 0; r < window.size(); ++r) {
    double* rec = out.data() + r * width;
    const NodeRecord& n = window[r];
    if (n.pad) {
      rec[0] = 1.0;
      continue;
    }
    rec[1] = static_cast<double>(n.buffer) / static_cast<double>(buffer_capacity);
    rec[2 + static_cast<int>(n.decision.ucm)] = 1.0;
    rec[4 + static_cast<int>(n.decision.action)] = 1.0;
    rec[7 + static_cast<int>(n.dcm)] = 1.0;
  }
  return out;
}

NodeWindow decode_node_window(std::span<const double> encoded, int history_window,
                              int buffer_capacity) {
  const auto width = static_cast<std::size_t>(node_record_width());
  if (encoded.size() != width * static_cast<std::size_t>(history_window)) {
    throw ContractViolation("decode_node_window: length mismatch");
  }
  NodeWindow window(static_cast<std::size_t>(history_window));
  for (std::size_t r = 0; r < window.size(); ++r) {
    auto rec = encoded.subspan(r * width, width);
    if (rec[0] > 0.5) continue;
    NodeRecord& n = window[r];
    n.pad = false;
    n.buffer = static_cast<int>(std::lround(rec[1] * buffer_capacity));
    n.decision.ucm = static_cast<UplinkControl>(argmax_block(rec, 2, kNumUplinkControls));
    n.decision.action = static_cast<NodeAction>(argmax_block(rec, 4, kNumActions));
    n.dcm = static_cast<DownlinkControl>(argmax_block(rec, 7, kNumDownlinkControls));
  }
  return window;
}

int gateway_record_width(int num_nodes) {
  return 1 + (num_nodes + 2) + num_nodes * kNumUplinkControls + num_nodes * kNumDownlinkControls;
}

std::vector<double> encode_gateway_window(const GatewayWindow& window, int num_nodes) {
  const auto width = static_cast<std::size_t>(gateway_record_width(num_nodes));
  const auto users = static_cast<std::size_t>(num_nodes);
  std::vector<double> out(window.size() * width, 0.0);
  for (std::size_t r = 0; r < window.size(); ++r) {
    double* rec = out.data() + r * width;
    const GatewayRecord& g = window[r];
    if (g.pad) {
      rec[0] = 1.0;
      continue;
    }
    rec[1 + g.observation] = 1.0;
    const std::size_t ucm_base = 1 + users + 2;
    const std::size_t dcm_base = ucm_base + users * kNumUplinkControls;
    for (std::size_t u = 0; u < users; ++u) {
      rec[ucm_base + u * kNumUplinkControls + static_cast<std::size_t>(g.ucms[u])] = 1.0;
      rec[dcm_base + u * kNumDownlinkControls + static_cast<std::size_t>(g.dcms[u])] = 1.0;
    }
  }
  return out;
}

GatewayWindow decode_gateway_window(std::span<const double> encoded, int history_window,
                                    int num_nodes) {
  const auto width = static_cast<std::size_t>(gateway_record_width(num_nodes));
  const auto users = static_cast<std::size_t>(num_nodes);
  if (encoded.size() != width * static_cast<std::size_t>(history_window)) {
    throw ContractViolation("decode_gateway_window: length mismatch");
  }
  GatewayRecord pad;
  pad.ucms.assign(users, UplinkControl::NoRequest);
  pad.dcms.assign(users, DownlinkControl::Null);
  GatewayWindow window(static_cast<std::size_t>(history_window), pad);
  for (std::size_t r = 0; r < window.size(); ++r) {
    auto rec = encoded.subspan(r * width, width);
    if (rec[0] > 0.5) continue;
    GatewayRecord& g = window[r];
    g.pad = false;
    g.observation = static_cast<int>(argmax_block(rec, 1, users + 2));
    const std::size_t ucm_base = 1 + users + 2;
    const std::size_t dcm_base = ucm_base + users * kNumUplinkControls;
    for (std::size_t u = 0; u < users; ++u) {
      g.ucms[u] = static_cast<UplinkControl>(
          argmax_block(rec, ucm_base + u * kNumUplinkControls, kNumUplinkControls));
      g.dcms[u] = static_cast<DownlinkControl>(
          argmax_block(rec, dcm_base + u * kNumDownlinkControls, kNumDownlinkControls));
    }
  }
  return window;
}

std::vector<double> encode_agent_input(const EnvConfig& config, const GlobalState& state, int node) {
  const auto u = static_cast<std::size_t>(node);
  if (node < 0 || u >= state.node_windows.size()) throw ContractViolation("encode_agent_input: bad node index");
  std::vector<double> out = encode_node_window(state.node_windows[u], config.buffer_capacity);
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(config.buffer_capacity) + 1, 0.0);
  out[base + static_cast<std::size_t>(state.buffers[u])] = 1.0;
  return out;
}

std::size_t agent_input_width(const EnvConfig& config) {
  return static_cast<std::size_t>(config.history_window * node_record_width() + config.buffer_capacity + 1);
}

std::vector<double> encode_global_input(const EnvConfig& config, const GlobalState& state) {
  std::vector<double> out;
  out.reserve(global_input_width(config));
  for (int u = 0; u < config.num_nodes; ++u) {
    const auto part = encode_agent_input(config, state, u);
    out.insert(out.end(), part.begin(), part.end());
  }
  const auto gw = encode_gateway_window(state.gateway_window, config.num_nodes);
  out.insert(out.end(), gw.begin(), gw.end());
  for (auto delivered : state.head_delivered) out.push_back(delivered ? 1.0 : 0.0);
  out.push_back(state.packet_lost ? 1.0 : 0.0);
  out.push_back(static_cast<double>(state.t) / static_cast<double>(config.max_steps));
  return out;
}

std::size_t global_input_width(const EnvConfig& config) {
  return static_cast<std::size_t>(config.num_nodes) * agent_input_width(config) +
         static_cast<std::size_t>(config.history_window * gateway_record_width(config.num_nodes)) +
         static_cast<std::size_t>(config.num_nodes) + 2;
}

}  // namespace cmbrl::mac
