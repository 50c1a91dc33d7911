// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmbrl/mac/policy.hpp"

namespace cmbrl::baselines {

using ActionValues = std::array<double, mac::kNumDecisions>;

/// Action values per state key; unseen keys read as all zero.
class QTable {
 public:
  const ActionValues& values(const std::string& key) const;
  ActionValues& mutable_values(const std::string& key) { return table_[key]; }
  std::size_t size() const { return table_.size(); }
  bool operator==(const QTable& other) const { return table_ == other.table_; }

 private:
  std::unordered_map<std::string, ActionValues> table_;
};

/// Stringified agent input (window plus current buffer), the key shared by
/// every node's table.
std::string state_key(const mac::EnvConfig& config, const mac::GlobalState& state, int node);

/// Lowest joint index among the maximal values.
int greedy_index(const ActionValues& values);

/// With epsilon > 0 draws one uniform(); if it falls below epsilon the
/// decision is below(6). Otherwise, and always when epsilon == 0, greedy.
mac::Decision q_act(const QTable& table, const std::string& key, double epsilon, Rng& rng);

/// Q(s,d) += alpha (r + gamma max_d' Q(s',d') (1 - done) - Q(s,d))
void q_update(QTable& table, const std::string& key, mac::Decision decision, double reward,
              const std::string& next_key, bool done, double alpha, double gamma);

struct QLearningConfig {
  double alpha = 0.1;
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Fraction of the episode budget over which epsilon anneals linearly.
  double anneal_fraction = 0.5;
};

/// Linear schedule: epsilon_start at episode 0, epsilon_end from
/// anneal_fraction * total_episodes on.
double epsilon_at(const QLearningConfig& config, long episode, long total_episodes);

/// Independent learners, one table per node.
class QLearningTeam final : public mac::JointPolicy {
 public:
  QLearningTeam(const mac::EnvConfig& env, QLearningConfig config);

  /// Epsilon-greedy over every node with the current epsilon.
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng& rng) const override;
  std::vector<mac::Decision> decide_greedy(const mac::GlobalState& state) const;

  /// Applies q_update for every node.
  void learn(const mac::Transition& transition);

  void set_epsilon(double epsilon) { epsilon_ = epsilon; }
  double epsilon() const { return epsilon_; }
  const QTable& table(int node) const { return tables_.at(static_cast<std::size_t>(node)); }
  const QLearningConfig& config() const { return config_; }

 private:
  mac::EnvConfig env_;
  QLearningConfig config_;
  double epsilon_ = 1.0;
  std::vector<QTable> tables_;
};

class GreedyQTeam final : public mac::JointPolicy {
 public:
  explicit GreedyQTeam(const QLearningTeam& team) : team_(team) {}
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng&) const override {
    return team_.decide_greedy(state);
  }

 private:
  const QLearningTeam& team_;
};

/// Grant-waiting rule for one node:
///   empty buffer         -> (NoRequest, Idle)
///   last DCM was Ack     -> (SR if more than one packet left, DeleteOldest)
///   last DCM was Grant   -> (NoRequest, Transmit)
///   otherwise            -> (SchedulingRequest, Idle)
mac::Decision predefined_decision(const mac::NodeWindow& window, int buffer);

class PredefinedTeam final : public mac::JointPolicy {
 public:
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng& rng) const override;
};

}  // namespace cmbrl::baselines
