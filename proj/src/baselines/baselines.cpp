// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/baselines/baselines.hpp"

#include <algorithm>
#include <charconv>

#include "cmbrl/errors.hpp"

namespace cmbrl::baselines {

const ActionValues& QTable::values(const std::string& key) const {
  static const ActionValues zeros{};
  auto it = table_.find(key);
  return it == table_.end() ? zeros : it->second;
}

std::string state_key(const mac::EnvConfig& config, const mac::GlobalState& state, int node) {
  const auto enc = mac::encode_agent_input(config, state, node);
  std::string key;
  key.reserve(enc.size() * 4);
  char buf[32];
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (i) key.push_back(',');
    const auto res = std::to_chars(buf, buf + sizeof buf, enc[i]);
    key.append(buf, res.ptr);
  }
  return key;
}

int greedy_index(const ActionValues& values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

mac::Decision q_act(const QTable& table, const std::string& key, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ContractViolation("epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    return mac::Decision::from_index(static_cast<int>(rng.below(mac::kNumDecisions)));
  }
  return mac::Decision::from_index(greedy_index(table.values(key)));
}

void q_update(QTable& table, const std::string& key, mac::Decision decision, double reward,
              const std::string& next_key, bool done, double alpha, double gamma) {
  if (alpha == 0.0) return;
  double bootstrap = 0.0;
  if (!done) {
    const auto& next = table.values(next_key);
    bootstrap = *std::max_element(next.begin(), next.end());
  }
  double& q = table.mutable_values(key)[static_cast<std::size_t>(decision.index())];
  q += alpha * (reward + gamma * bootstrap - q);
}

double epsilon_at(const QLearningConfig& config, long episode, long total_episodes) {
  const double horizon = config.anneal_fraction * static_cast<double>(total_episodes);
  if (horizon <= 0.0 || static_cast<double>(episode) >= horizon) return config.epsilon_end;
  const double f = static_cast<double>(episode) / horizon;
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * f;
}

QLearningTeam::QLearningTeam(const mac::EnvConfig& env, QLearningConfig config)
    : env_(env), config_(config), epsilon_(config.epsilon_start),
      tables_(static_cast<std::size_t>(env.num_nodes)) {
  env_.validate();
}

std::vector<mac::Decision> QLearningTeam::decide(const mac::GlobalState& state, Rng& rng) const {
  std::vector<mac::Decision> out;
  for (int u = 0; u < env_.num_nodes; ++u) {
    out.push_back(q_act(tables_[static_cast<std::size_t>(u)], state_key(env_, state, u), epsilon_, rng));
  }
  return out;
}

std::vector<mac::Decision> QLearningTeam::decide_greedy(const mac::GlobalState& state) const {
  std::vector<mac::Decision> out;
  for (int u = 0; u < env_.num_nodes; ++u) {
    out.push_back(mac::Decision::from_index(
        greedy_index(tables_[static_cast<std::size_t>(u)].values(state_key(env_, state, u)))));
  }
  return out;
}

void QLearningTeam::learn(const mac::Transition& t) {
  for (int u = 0; u < env_.num_nodes; ++u) {
    q_update(tables_[static_cast<std::size_t>(u)], state_key(env_, t.before, u),
             t.decisions[static_cast<std::size_t>(u)], t.reward, state_key(env_, t.after, u), t.done,
             config_.alpha, config_.gamma);
  }
}

mac::Decision predefined_decision(const mac::NodeWindow& window, int buffer) {
  using mac::DownlinkControl;
  using mac::NodeAction;
  using mac::UplinkControl;
  if (buffer <= 0) return {UplinkControl::NoRequest, NodeAction::Idle};
  const DownlinkControl last =
      (window.empty() || window.front().pad) ? DownlinkControl::Null : window.front().dcm;
  if (last == DownlinkControl::Ack) {
    return {buffer > 1 ? UplinkControl::SchedulingRequest : UplinkControl::NoRequest, NodeAction::DeleteOldest};
  }
  if (last == DownlinkControl::Grant) return {UplinkControl::NoRequest, NodeAction::Transmit};
  return {UplinkControl::SchedulingRequest, NodeAction::Idle};
}

std::vector<mac::Decision> PredefinedTeam::decide(const mac::GlobalState& state, Rng&) const {
  std::vector<mac::Decision> out;
  for (std::size_t u = 0; u < state.buffers.size(); ++u) {
    out.push_back(predefined_decision(state.node_windows[u], state.buffers[u]));
  }
  return out;
}

}  // namespace cmbrl::baselines
