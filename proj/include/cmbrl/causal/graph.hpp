// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cmbrl/mac/env.hpp"

namespace cmbrl::causal {

enum class TimeLayer { Current, Next };

enum class VariableRole {
  NodeState,           // x^u
  GatewayState,        // x^b
  NodeObservation,     // o^u
  GatewayObservation,  // o^b
  Decision,            // d^u = (n^u, a^u)
  ChannelAction,       // a^u
  Dcm,                 // m^u
  Reward,              // r
};

/// States and observations are attended over; decisions, actions and
/// downlink messages are summarized sequentially.
bool is_state_role(VariableRole role);
bool is_action_role(VariableRole role);

struct Variable {
  std::string name;
  TimeLayer layer = TimeLayer::Current;
  VariableRole role = VariableRole::NodeState;
  int node = -1;  // 0-based node index, -1 for gateway/global variables
};

/// Two-layer DAG over slot-t and slot-(t+1) variables.
class CausalGraph {
 public:
  int add_variable(Variable v);
  /// Parents are kept in the given order; that order fixes the sequence fed
  /// to action summarizers.
  void set_parents(int child, std::vector<int> parents);

  std::size_t size() const { return variables_.size(); }
  const Variable& variable(int id) const { return variables_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& parents(int id) const { return parents_.at(static_cast<std::size_t>(id)); }
  /// Throws ContractViolation for unknown names.
  int find(const std::string& name) const;

  bool is_acyclic() const;
  std::size_t in_degree(int id) const { return parents(id).size(); }
  std::size_t max_in_degree() const;

  /// "child <- parent1, parent2, ..." one line per variable with parents.
  std::string adjacency_listing() const;

 private:
  std::vector<Variable> variables_;
  std::vector<std::vector<int>> parents_;
};

/// Structural equations of the uplink:
///   x^u_{t+1} <- x^u_t, o^u_t, d^u_t, m^u_t
///   x^b_{t+1} <- x^b_t, o^b_t, d^1..U_t, m^1..U_t
///   o^u_{t+1} <- x^u_t, a^u_t
///   o^b_{t+1} <- x^b_t, d^1..U_t
///   r_{t+1}   <- x_t, d_t, m_t, o_t
CausalGraph default_graph(const mac::EnvConfig& config);

/// Names used by default_graph, e.g. "x1_t", "xb_t+1", "o2_t+1", "r_t+1".
std::string node_variable_name(char symbol, int node, TimeLayer layer);
std::string gateway_variable_name(char symbol, TimeLayer layer);

}  // namespace cmbrl::causal
