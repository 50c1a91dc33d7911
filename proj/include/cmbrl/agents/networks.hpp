// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>

#include "cmbrl/mac/types.hpp"
#include "cmbrl/nn/layers.hpp"

namespace cmbrl::agents {

struct NetworkDims {
  std::size_t projection = 64;
  std::size_t hidden = 128;
  double init_std = 0.01;
  /// The value network predicts returns in units of this scale.
  double value_scale = 1.0;
};

/// input -> 64 (tanh) -> 128 (tanh) -> {3 action logits, 2 ucm logits}
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(nn::ParameterStore& store, const std::string& name, std::size_t input_dim,
                const NetworkDims& dims, nn::Init init);

  struct Heads {
    nn::Tensor action_logits;  // [B, 3]
    nn::Tensor ucm_logits;     // [B, 2]
  };
  Heads forward(const nn::Tensor& x) const;
  std::size_t input_dim() const { return projection_.in_dim(); }

 private:
  nn::Linear projection_, hidden_, action_head_, ucm_head_;
};

/// value_scale * (input -> 64 (tanh) -> 128 (tanh) -> 1)
class ValueNetwork {
 public:
  ValueNetwork() = default;
  ValueNetwork(nn::ParameterStore& store, const std::string& name, std::size_t input_dim,
               const NetworkDims& dims, nn::Init init);

  nn::Tensor forward(const nn::Tensor& x) const;  // [B, 1]
  std::size_t input_dim() const { return input_dim_; }

 private:
  nn::Mlp body_;
  std::size_t input_dim_ = 0;
  double scale_ = 1.0;
};

/// log pi(action) + log pi(ucm) per row, on the tape. [B, 1]
nn::Tensor joint_log_prob(const PolicyNetwork::Heads& heads, std::span<const mac::Decision> decisions);

/// Sum of both heads' entropies per row. [B, 1]
nn::Tensor joint_entropy(const PolicyNetwork::Heads& heads);

struct ActResult {
  mac::Decision decision;
  double log_prob = 0.0;
};

/// Samples the action head, then the ucm head (one uniform() each), or
/// takes the lowest-index argmax of each when `greedy`.
ActResult act(const PolicyNetwork& policy, std::span<const double> input, Rng& rng, bool greedy);

/// Joint log-probability of `decision` under the policy at `input`.
double log_prob(const PolicyNetwork& policy, std::span<const double> input, mac::Decision decision);

}  // namespace cmbrl::agents
