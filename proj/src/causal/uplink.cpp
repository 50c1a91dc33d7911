// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/causal/uplink.hpp"

#include "cmbrl/errors.hpp"

namespace cmbrl::causal {

namespace {

void append_one_hot(std::vector<double>& out, std::size_t width, std::size_t hot) {
  if (hot >= width) throw ContractViolation("one-hot index out of range");
  const std::size_t base = out.size();
  out.resize(base + width, 0.0);
  out[base + hot] = 1.0;
}

void append_features(std::vector<double>& out, const mac::EnvConfig& config, const Variable& v,
                     const SlotInput& row) {
  const mac::GlobalState& s = *row.state;
  const auto u = static_cast<std::size_t>(v.node);
  switch (v.role) {
    case VariableRole::NodeState: {
      const auto enc = mac::encode_node_window(s.node_windows.at(u), config.buffer_capacity);
      out.insert(out.end(), enc.begin(), enc.end());
      return;
    }
    case VariableRole::GatewayState: {
      const auto enc = mac::encode_gateway_window(s.gateway_window, config.num_nodes);
      out.insert(out.end(), enc.begin(), enc.end());
      return;
    }
    case VariableRole::NodeObservation:
      append_one_hot(out, static_cast<std::size_t>(config.buffer_capacity) + 1,
                     static_cast<std::size_t>(s.buffers.at(u)));
      return;
    case VariableRole::GatewayObservation:
      append_one_hot(out, static_cast<std::size_t>(config.num_nodes) + 2,
                     static_cast<std::size_t>(s.gateway_obs));
      return;
    case VariableRole::Decision:
      if (u >= row.decisions.size()) throw ContractViolation("row lacks decision for " + v.name);
      append_one_hot(out, mac::kNumUplinkControls, static_cast<std::size_t>(row.decisions[u].ucm));
      append_one_hot(out, mac::kNumActions, static_cast<std::size_t>(row.decisions[u].action));
      return;
    case VariableRole::ChannelAction:
      if (u >= row.decisions.size()) throw ContractViolation("row lacks decision for " + v.name);
      append_one_hot(out, mac::kNumActions, static_cast<std::size_t>(row.decisions[u].action));
      return;
    case VariableRole::Dcm:
      if (u >= row.dcms.size()) throw ContractViolation("row lacks downlink message for " + v.name);
      append_one_hot(out, mac::kNumDownlinkControls, static_cast<std::size_t>(row.dcms[u]));
      return;
    case VariableRole::Reward:
      break;
  }
  throw ContractViolation("variable " + v.name + " has no input features");
}

mac::SlotOutcome outcome_from(const CausalWorldModel& model, const mac::EnvConfig& config,
                              const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                              Rng* rng) {
  nn::NoGradGuard no_grad;
  const SlotInput row{&state, decisions, {}};
  const auto required = model.required_inputs();
  const auto inputs = uplink_inputs(config, model.graph(), std::span(&row, 1), required);
  const auto encoded = model.encode(inputs);
  mac::SlotOutcome out;
  out.buffers.assign(static_cast<std::size_t>(config.num_nodes), 0);
  for (const auto& spec : model.targets()) {
    const auto dist = std::get<Categorical>(model.infer_encoded(spec.variable, encoded).distribution(0));
    const auto value = static_cast<int>(rng ? sample(dist, *rng) : argmax(dist));
    const Variable& v = model.graph().variable(spec.variable);
    if (v.role == VariableRole::NodeObservation) {
      out.buffers[static_cast<std::size_t>(v.node)] = value;
    } else {
      out.gateway_obs = value;
    }
  }
  return out;
}

}  // namespace

std::map<VariableRole, std::size_t> uplink_role_widths(const mac::EnvConfig& config) {
  const auto n = static_cast<std::size_t>(config.history_window);
  return {
      {VariableRole::NodeState, n * static_cast<std::size_t>(mac::node_record_width())},
      {VariableRole::GatewayState, n * static_cast<std::size_t>(mac::gateway_record_width(config.num_nodes))},
      {VariableRole::NodeObservation, static_cast<std::size_t>(config.buffer_capacity) + 1},
      {VariableRole::GatewayObservation, static_cast<std::size_t>(config.num_nodes) + 2},
      {VariableRole::Decision, mac::kNumUplinkControls + mac::kNumActions},
      {VariableRole::ChannelAction, mac::kNumActions},
      {VariableRole::Dcm, mac::kNumDownlinkControls},
  };
}

int node_observation_target(const CausalGraph& graph, int node) {
  return graph.find(node_variable_name('o', node, TimeLayer::Next));
}

int gateway_observation_target(const CausalGraph& graph) {
  return graph.find(gateway_variable_name('o', TimeLayer::Next));
}

CausalWorldModel make_uplink_model(const mac::EnvConfig& config, const ModelDims& dims, std::uint64_t seed) {
  CausalGraph graph = default_graph(config);
  std::vector<TargetSpec> targets;
  for (int u = 0; u < config.num_nodes; ++u) {
    targets.push_back({node_observation_target(graph, u), HeadKind::Categorical,
                       static_cast<std::size_t>(config.buffer_capacity) + 1});
  }
  targets.push_back({gateway_observation_target(graph), HeadKind::Categorical,
                     static_cast<std::size_t>(config.num_nodes) + 2});
  return CausalWorldModel(std::move(graph), uplink_role_widths(config), std::move(targets), dims, seed);
}

VariableBatch uplink_inputs(const mac::EnvConfig& config, const CausalGraph& graph,
                            std::span<const SlotInput> rows, std::span<const int> variables) {
  const auto widths = uplink_role_widths(config);
  VariableBatch batch;
  for (int var : variables) {
    const Variable& v = graph.variable(var);
    const std::size_t width = widths.at(v.role);
    std::vector<double> values;
    values.reserve(rows.size() * width);
    for (const auto& row : rows) append_features(values, config, v, row);
    batch.emplace(var, nn::Tensor::from({rows.size(), width}, std::move(values)));
  }
  return batch;
}

TargetBatch uplink_targets(const CausalWorldModel& model, std::span<const mac::Transition* const> batch) {
  TargetBatch targets;
  for (const auto& spec : model.targets()) {
    const Variable& v = model.graph().variable(spec.variable);
    auto& classes = targets.classes[spec.variable];
    classes.reserve(batch.size());
    for (const auto* t : batch) {
      classes.push_back(static_cast<std::size_t>(
          v.role == VariableRole::NodeObservation ? t->next.buffers.at(static_cast<std::size_t>(v.node))
                                                  : t->next.gateway_obs));
    }
  }
  return targets;
}

nn::Tensor uplink_model_loss(const CausalWorldModel& model, const mac::EnvConfig& config,
                             std::span<const mac::Transition* const> batch, double lambda) {
  if (batch.empty()) throw UsageError("model_loss on an empty batch");
  std::vector<SlotInput> rows;
  rows.reserve(batch.size());
  for (const auto* t : batch) rows.push_back({&t->before, t->decisions, t->dcms});
  const auto required = model.required_inputs();
  return model_loss(model, uplink_inputs(config, model.graph(), rows, required),
                    uplink_targets(model, batch), lambda);
}

mac::SlotOutcome sample_outcome(const CausalWorldModel& model, const mac::EnvConfig& config,
                                const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                                Rng& rng) {
  return outcome_from(model, config, state, decisions, &rng);
}

mac::SlotOutcome most_likely_outcome(const CausalWorldModel& model, const mac::EnvConfig& config,
                                     const mac::GlobalState& state, std::span<const mac::Decision> decisions) {
  return outcome_from(model, config, state, decisions, nullptr);
}

double prediction_accuracy(const CausalWorldModel& model, const mac::EnvConfig& config,
                           std::span<const mac::Transition* const> batch) {
  if (batch.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto* t : batch) {
    if (most_likely_outcome(model, config, t->before, t->decisions) == t->next) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

double mean_nll(const CausalWorldModel& model, const mac::EnvConfig& config,
                std::span<const mac::Transition* const> batch) {
  nn::NoGradGuard no_grad;
  return uplink_model_loss(model, config, batch, 0.0).item();
}

ModelTrainResult train_model(CausalWorldModel& model, nn::Adam& optimizer, const mac::EnvConfig& config,
                             const rollout::ReplayBuffer& buffer, const ModelTrainConfig& train, Rng& rng) {
  ModelTrainResult result;
  if (train.steps <= 0) return result;
  if (buffer.size() < train.batch_size || train.batch_size == 0) {
    result.skipped = true;
    return result;
  }
  std::vector<const mac::Transition*> batch(train.batch_size);
  for (int step = 0; step < train.steps; ++step) {
    const auto idx = buffer.sample_indices(train.batch_size, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &buffer[idx[i]];
    model.parameters().zero_grad();
    const nn::Tensor loss = uplink_model_loss(model, config, batch, train.lambda);
    loss.backward();
    optimizer.step(model.parameters());
    result.losses.push_back(loss.item());
  }
  return result;
}

}  // namespace cmbrl::causal
