// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/agents/networks.hpp"

#include <vector>

#include "cmbrl/causal/distribution.hpp"

namespace cmbrl::agents {

PolicyNetwork::PolicyNetwork(nn::ParameterStore& store, const std::string& name, std::size_t input_dim,
                             const NetworkDims& dims, nn::Init init)
    : projection_(store, name + "/proj", input_dim, dims.projection, init),
      hidden_(store, name + "/hidden", dims.projection, dims.hidden, init),
      action_head_(store, name + "/action", dims.hidden, mac::kNumActions, init),
      ucm_head_(store, name + "/ucm", dims.hidden, mac::kNumUplinkControls, init) {}

PolicyNetwork::Heads PolicyNetwork::forward(const nn::Tensor& x) const {
  const nn::Tensor h = nn::tanh(hidden_(nn::tanh(projection_(x))));
  return {action_head_(h), ucm_head_(h)};
}

ValueNetwork::ValueNetwork(nn::ParameterStore& store, const std::string& name, std::size_t input_dim,
                           const NetworkDims& dims, nn::Init init)
    : body_(store, name, {input_dim, dims.projection, dims.hidden, 1}, nn::Activation::Tanh,
            nn::Activation::Identity, init),
      input_dim_(input_dim),
      scale_(dims.value_scale) {}

nn::Tensor ValueNetwork::forward(const nn::Tensor& x) const {
  const nn::Tensor v = body_(x);
  return scale_ == 1.0 ? v : nn::scale(v, scale_);
}

nn::Tensor joint_log_prob(const PolicyNetwork::Heads& heads, std::span<const mac::Decision> decisions) {
  std::vector<std::size_t> actions(decisions.size()), ucms(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    actions[i] = static_cast<std::size_t>(decisions[i].action);
    ucms[i] = static_cast<std::size_t>(decisions[i].ucm);
  }
  return nn::add(nn::gather(nn::log_softmax(heads.action_logits), actions),
                 nn::gather(nn::log_softmax(heads.ucm_logits), ucms));
}

nn::Tensor joint_entropy(const PolicyNetwork::Heads& heads) {
  auto entropy = [](const nn::Tensor& logits) {
    const nn::Tensor lp = nn::log_softmax(logits);
    return nn::scale(nn::row_sum(nn::mul(nn::exp(lp), lp)), -1.0);
  };
  return nn::add(entropy(heads.action_logits), entropy(heads.ucm_logits));
}

ActResult act(const PolicyNetwork& policy, std::span<const double> input, Rng& rng, bool greedy) {
  nn::NoGradGuard no_grad;
  const auto heads = policy.forward(nn::Tensor::row(input));
  const auto pa = causal::categorical_from_logits(heads.action_logits.data());
  const auto pn = causal::categorical_from_logits(heads.ucm_logits.data());
  std::size_t a = 0, n = 0;
  if (greedy) {
    a = causal::argmax(pa);
    n = causal::argmax(pn);
  } else {
    a = causal::sample(pa, rng);
    n = causal::sample(pn, rng);
  }
  ActResult r;
  r.decision = {static_cast<mac::UplinkControl>(n), static_cast<mac::NodeAction>(a)};
  const nn::Tensor la = nn::log_softmax(heads.action_logits);
  const nn::Tensor ln = nn::log_softmax(heads.ucm_logits);
  r.log_prob = la.at(0, a) + ln.at(0, n);
  return r;
}

double log_prob(const PolicyNetwork& policy, std::span<const double> input, mac::Decision decision) {
  nn::NoGradGuard no_grad;
  const auto heads = policy.forward(nn::Tensor::row(input));
  return joint_log_prob(heads, std::span(&decision, 1)).item();
}

}  // namespace cmbrl::agents
