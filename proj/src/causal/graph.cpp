// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/causal/graph.hpp"

#include <algorithm>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl::causal {

bool is_state_role(VariableRole role) {
  return role == VariableRole::NodeState || role == VariableRole::GatewayState ||
         role == VariableRole::NodeObservation || role == VariableRole::GatewayObservation;
}

bool is_action_role(VariableRole role) {
  return role == VariableRole::Decision || role == VariableRole::ChannelAction ||
         role == VariableRole::Dcm;
}

int CausalGraph::add_variable(Variable v) {
  for (const auto& existing : variables_) {
    if (existing.name == v.name) throw ContractViolation("duplicate variable " + v.name);
  }
  variables_.push_back(std::move(v));
  parents_.emplace_back();
  return static_cast<int>(variables_.size()) - 1;
}

void CausalGraph::set_parents(int child, std::vector<int> parents) {
  for (int p : parents) {
    if (p < 0 || static_cast<std::size_t>(p) >= variables_.size()) {
      throw ContractViolation("parent id out of range for " + variable(child).name);
    }
  }
  parents_.at(static_cast<std::size_t>(child)) = std::move(parents);
}

int CausalGraph::find(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return static_cast<int>(i);
  }
  throw ContractViolation("unknown variable " + name);
}

bool CausalGraph::is_acyclic() const {
  // Kahn's algorithm on parent -> child edges.
  const std::size_t n = variables_.size();
  std::vector<std::size_t> pending(n);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t c = 0; c < n; ++c) {
    pending[c] = parents_[c].size();
    for (int p : parents_[c]) children[static_cast<std::size_t>(p)].push_back(c);
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::size_t v = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t c : children[v]) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  return visited == n;
}

std::size_t CausalGraph::max_in_degree() const {
  std::size_t best = 0;
  for (const auto& p : parents_) best = std::max(best, p.size());
  return best;
}

std::string CausalGraph::adjacency_listing() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < variables_.size(); ++c) {
    if (parents_[c].empty()) continue;
    out << variables_[c].name << " <-";
    for (std::size_t i = 0; i < parents_[c].size(); ++i) {
      out << (i ? ", " : " ") << variables_[static_cast<std::size_t>(parents_[c][i])].name;
    }
    out << '\n';
  }
  return out.str();
}

std::string node_variable_name(char symbol, int node, TimeLayer layer) {
  return std::string(1, symbol) + std::to_string(node + 1) + (layer == TimeLayer::Current ? "_t" : "_t+1");
}

std::string gateway_variable_name(char symbol, TimeLayer layer) {
  return std::string(1, symbol) + "b" + (layer == TimeLayer::Current ? "_t" : "_t+1");
}

CausalGraph default_graph(const mac::EnvConfig& config) {
  config.validate();
  const int users = config.num_nodes;
  CausalGraph g;
  using R = VariableRole;
  const auto cur = TimeLayer::Current;
  const auto next = TimeLayer::Next;

  std::vector<int> xs(static_cast<std::size_t>(users)), os(xs.size()), ds(xs.size()), as(xs.size()),
      ms(xs.size());
  for (int u = 0; u < users; ++u) {
    const auto i = static_cast<std::size_t>(u);
    xs[i] = g.add_variable({node_variable_name('x', u, cur), cur, R::NodeState, u});
    os[i] = g.add_variable({node_variable_name('o', u, cur), cur, R::NodeObservation, u});
    ds[i] = g.add_variable({node_variable_name('d', u, cur), cur, R::Decision, u});
    as[i] = g.add_variable({node_variable_name('a', u, cur), cur, R::ChannelAction, u});
    ms[i] = g.add_variable({node_variable_name('m', u, cur), cur, R::Dcm, u});
  }
  const int xb = g.add_variable({gateway_variable_name('x', cur), cur, R::GatewayState, -1});
  const int ob = g.add_variable({gateway_variable_name('o', cur), cur, R::GatewayObservation, -1});

  for (int u = 0; u < users; ++u) {
    const auto i = static_cast<std::size_t>(u);
    const int xn = g.add_variable({node_variable_name('x', u, next), next, R::NodeState, u});
    g.set_parents(xn, {xs[i], os[i], ds[i], ms[i]});
  }
  const int xbn = g.add_variable({gateway_variable_name('x', next), next, R::GatewayState, -1});
  {
    std::vector<int> pa{xb, ob};
    pa.insert(pa.end(), ds.begin(), ds.end());
    pa.insert(pa.end(), ms.begin(), ms.end());
    g.set_parents(xbn, pa);
  }
  for (int u = 0; u < users; ++u) {
    const auto i = static_cast<std::size_t>(u);
    const int on = g.add_variable({node_variable_name('o', u, next), next, R::NodeObservation, u});
    g.set_parents(on, {xs[i], as[i]});
  }
  const int obn = g.add_variable({gateway_variable_name('o', next), next, R::GatewayObservation, -1});
  {
    std::vector<int> pa{xb};
    pa.insert(pa.end(), ds.begin(), ds.end());
    g.set_parents(obn, pa);
  }
  const int r = g.add_variable({"r_t+1", next, R::Reward, -1});
  {
    std::vector<int> pa(xs);
    pa.push_back(xb);
    pa.insert(pa.end(), ds.begin(), ds.end());
    pa.insert(pa.end(), ms.begin(), ms.end());
    pa.insert(pa.end(), os.begin(), os.end());
    pa.push_back(ob);
    g.set_parents(r, pa);
  }
  if (!g.is_acyclic()) throw ContractViolation("default causal graph is cyclic");
  return g;
}

}  // namespace cmbrl::causal
