// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/causal/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

#include "cmbrl/errors.hpp"

namespace cmbrl::causal {

namespace {

const char* role_name(VariableRole role) {
  switch (role) {
    case VariableRole::NodeState: return "node_state";
    case VariableRole::GatewayState: return "gateway_state";
    case VariableRole::NodeObservation: return "node_obs";
    case VariableRole::GatewayObservation: return "gateway_obs";
    case VariableRole::Decision: return "decision";
    case VariableRole::ChannelAction: return "channel_action";
    case VariableRole::Dcm: return "dcm";
    case VariableRole::Reward: return "reward";
  }
  return "unknown";
}

}  // namespace

Distribution InferenceOutput::distribution(std::size_t row) const {
  const std::size_t width = params.cols();
  const auto values = params.data().subspan(row * width, width);
  if (kind == HeadKind::Categorical) return categorical_from_logits(values);
  const std::size_t d = width / 2;
  Gaussian g;
  g.mean.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(d));
  g.log_std.assign(values.begin() + static_cast<std::ptrdiff_t>(d), values.end());
  return g;
}

CausalWorldModel::CausalWorldModel(CausalGraph graph, std::map<VariableRole, std::size_t> role_widths,
                                   std::vector<TargetSpec> targets, ModelDims dims, std::uint64_t seed)
    : graph_(std::move(graph)),
      role_widths_(std::move(role_widths)),
      targets_(std::move(targets)),
      dims_(dims) {
  if (!graph_.is_acyclic()) throw ContractViolation("world model needs an acyclic graph");
  Rng rng(seed);
  const nn::Init init{dims_.init_std, &rng};

  std::set<VariableRole> roles_needed;
  std::set<int> states_needed;
  for (const auto& t : targets_) {
    if (t.size == 0) throw ContractViolation("target " + graph_.variable(t.variable).name + " has size 0");
    if (graph_.parents(t.variable).empty()) {
      throw ContractViolation("target " + graph_.variable(t.variable).name + " has no parents");
    }
    for (int p : graph_.parents(t.variable)) {
      const auto role = graph_.variable(p).role;
      if (!is_state_role(role) && !is_action_role(role)) {
        throw ContractViolation("parent " + graph_.variable(p).name + " is neither state nor action");
      }
      roles_needed.insert(role);
      if (is_state_role(role)) states_needed.insert(p);
    }
  }
  for (auto role : roles_needed) {
    auto it = role_widths_.find(role);
    if (it == role_widths_.end() || it->second == 0) {
      throw ContractViolation(std::string("no input width for role ") + role_name(role));
    }
    encoders_.emplace(role, nn::Mlp(store_, std::string("enc/") + role_name(role),
                                    {it->second, dims_.embed, dims_.embed}, nn::Activation::Relu,
                                    nn::Activation::Identity, init));
  }
  for (int s : states_needed) {
    keys_.emplace(s, store_.create_normal("keys/" + graph_.variable(s).name, {dims_.query, 1},
                                          dims_.init_std, rng));
  }
  for (const auto& t : targets_) {
    Network net;
    net.target = t.variable;
    const std::string base = "net/" + graph_.variable(t.variable).name + "/";
    for (int p : graph_.parents(t.variable)) {
      if (is_state_role(graph_.variable(p).role)) {
        net.state_parents.push_back(p);
        net.value.emplace_back(store_, base + "value/" + graph_.variable(p).name, dims_.embed,
                               dims_.value, init);
      } else {
        net.action_parents.push_back(p);
      }
    }
    net.gru = nn::GruCell(store_, base + "gru", dims_.embed, dims_.gru_hidden, init);
    net.query = nn::Linear(store_, base + "query", dims_.gru_hidden, dims_.query, init);
    net.action_value = nn::Linear(store_, base + "action_value", dims_.gru_hidden, dims_.value, init);
    const std::size_t out = t.kind == HeadKind::Categorical ? t.size : 2 * t.size;
    net.decoder = nn::Mlp(store_, base + "decoder", {dims_.value, dims_.decoder_hidden, out},
                          nn::Activation::Relu, nn::Activation::Identity, init);
    networks_.push_back(std::move(net));
  }
}

const TargetSpec& CausalWorldModel::target_spec(int variable) const {
  for (const auto& t : targets_) {
    if (t.variable == variable) return t;
  }
  throw ContractViolation("variable " + graph_.variable(variable).name + " is not a model target");
}

const nn::Tensor& CausalWorldModel::key(int state_variable) const {
  auto it = keys_.find(state_variable);
  if (it == keys_.end()) throw ContractViolation("no key for " + graph_.variable(state_variable).name);
  return it->second;
}

std::vector<int> CausalWorldModel::required_inputs() const {
  std::set<int> all;
  for (const auto& t : targets_) {
    for (int p : graph_.parents(t.variable)) all.insert(p);
  }
  return {all.begin(), all.end()};
}

std::map<int, nn::Tensor> CausalWorldModel::encode(const VariableBatch& inputs) const {
  std::map<int, nn::Tensor> encoded;
  for (const auto& [var, x] : inputs) {
    auto it = encoders_.find(graph_.variable(var).role);
    if (it == encoders_.end()) continue;  // role not read by any target
    encoded.emplace(var, it->second(x));
  }
  return encoded;
}

const CausalWorldModel::Network& CausalWorldModel::network(int target) const {
  for (const auto& n : networks_) {
    if (n.target == target) return n;
  }
  throw ContractViolation("variable " + graph_.variable(target).name + " is not a model target");
}

InferenceOutput CausalWorldModel::infer(int target, const VariableBatch& inputs) const {
  VariableBatch parents_only;
  for (int p : graph_.parents(target)) {
    auto it = inputs.find(p);
    if (it == inputs.end()) {
      throw ContractViolation("missing parent " + graph_.variable(p).name + " of " +
                              graph_.variable(target).name);
    }
    parents_only.emplace(p, it->second);
  }
  return infer_encoded(target, encode(parents_only));
}

InferenceOutput CausalWorldModel::infer_encoded(int target, const std::map<int, nn::Tensor>& encoded) const {
  const Network& net = network(target);
  auto fetch = [&](int var) -> const nn::Tensor& {
    auto it = encoded.find(var);
    if (it == encoded.end()) {
      throw ContractViolation("missing parent " + graph_.variable(var).name + " of " +
                              graph_.variable(target).name);
    }
    return it->second;
  };

  std::size_t batch = 0;
  std::vector<nn::Tensor> values;
  std::vector<nn::Tensor> scores;
  values.reserve(net.state_parents.size());
  for (std::size_t i = 0; i < net.state_parents.size(); ++i) {
    const nn::Tensor& enc = fetch(net.state_parents[i]);
    batch = enc.rows();
    values.push_back(nn::relu(net.value[i](enc)));
  }
  std::vector<nn::Tensor> sequence;
  for (int a : net.action_parents) {
    sequence.push_back(fetch(a));
    batch = sequence.back().rows();
  }
  if (batch == 0) throw ContractViolation("empty batch for " + graph_.variable(target).name);

  const nn::Tensor e = net.gru.run(sequence, nn::Tensor::zeros({batch, dims_.gru_hidden}));
  const nn::Tensor q = net.query(e);
  const nn::Tensor c_a = net.action_value(e);
  for (int s : net.state_parents) scores.push_back(nn::matmul(q, key(s)));
  // The action term enters the normalizer with a fixed score of zero.
  scores.push_back(nn::Tensor::zeros({batch, 1}));
  const nn::Tensor alpha = nn::softmax(nn::concat(scores));

  const std::size_t n_states = net.state_parents.size();
  nn::Tensor h = nn::mul(c_a, nn::slice(alpha, n_states, n_states + 1));
  for (std::size_t i = 0; i < n_states; ++i) h = nn::add(h, nn::mul(values[i], nn::slice(alpha, i, i + 1)));

  InferenceOutput out;
  out.kind = target_spec(target).kind;
  out.params = net.decoder(h);
  out.attention = alpha;
  out.state_parents = net.state_parents;
  return out;
}

nn::Tensor model_loss(const CausalWorldModel& model, const VariableBatch& inputs, const TargetBatch& targets,
                      double lambda) {
  if (inputs.empty() || inputs.begin()->second.rows() == 0) throw UsageError("model_loss on an empty batch");
  const std::size_t batch = inputs.begin()->second.rows();
  const auto encoded = model.encode(inputs);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  nn::Tensor per_row;
  for (const auto& spec : model.targets()) {
    const InferenceOutput out = model.infer_encoded(spec.variable, encoded);
    nn::Tensor nll;
    if (spec.kind == HeadKind::Categorical) {
      auto it = targets.classes.find(spec.variable);
      if (it == targets.classes.end() || it->second.size() != batch) {
        throw ContractViolation("missing observed classes for " + model.graph().variable(spec.variable).name);
      }
      nll = nn::scale(nn::gather(nn::log_softmax(out.params), it->second), -1.0);
    } else {
      auto it = targets.values.find(spec.variable);
      if (it == targets.values.end() || it->second.rows() != batch || it->second.cols() != spec.size) {
        throw ContractViolation("missing observed values for " + model.graph().variable(spec.variable).name);
      }
      const nn::Tensor mu = nn::slice(out.params, 0, spec.size);
      const nn::Tensor log_std = nn::slice(out.params, spec.size, 2 * spec.size);
      const nn::Tensor z = nn::mul(nn::sub(it->second, mu), nn::exp(nn::scale(log_std, -1.0)));
      nll = nn::add_scalar(nn::row_sum(nn::add(nn::scale(nn::square(z), 0.5), log_std)),
                           half_log_2pi * static_cast<double>(spec.size));
    }
    per_row = per_row.defined() ? nn::add(per_row, nll) : nll;
  }
  if (!per_row.defined()) throw ContractViolation("model has no targets");
  nn::Tensor loss = nn::mean(per_row);
  if (lambda != 0.0) loss = nn::add(loss, nn::scale(model.parameters().squared_norm(), lambda));
  return loss;
}

void write_attention_csv(std::ostream& out, const CausalWorldModel& model, int target,
                         const InferenceOutput& output, std::size_t row, bool header) {
  if (header) out << "target,parent,weight\n";
  const auto& g = model.graph();
  const std::size_t width = output.attention.cols();
  for (std::size_t i = 0; i < width; ++i) {
    out << g.variable(target).name << ','
        << (i + 1 == width ? std::string("actions") : g.variable(output.state_parents[i]).name) << ','
        << output.attention.at(row, i) << '\n';
  }
}

}  // namespace cmbrl::causal
