// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the code it checks except for plumbing.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cmbrl/mac/policy.hpp"
#include "cmbrl/nn/tensor.hpp"
#include "cmbrl/rng.hpp"

namespace cmbrl::testing {

// ---------------------------------------------------------------------------
// Finite differences

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Relative error between an analytic and a numeric derivative. Derivatives
/// below `floor` in magnitude are compared absolutely against it.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of the scalar `loss()` w.r.t. every entry of `wrt`
/// (or `per_tensor` random entries of larger tensors), against backward().
/// `loss` must rebuild its graph from the current values on every call.
inline GradCheck grad_check(const std::function<nn::Tensor()>& loss, std::vector<nn::Tensor> wrt, Rng& rng,
                            std::size_t per_tensor = 0, double h = 1e-6) {
  for (auto& t : wrt) t.zero_grad();
  loss().backward();
  GradCheck out;
  for (auto& t : wrt) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> coords;
    if (per_tensor == 0 || t.size() <= per_tensor) {
      for (std::size_t i = 0; i < t.size(); ++i) coords.push_back(i);
    } else {
      coords = sample_without_replacement(t.size(), per_tensor, rng);
    }
    for (std::size_t i : coords) {
      auto v = t.mutable_data();
      const double saved = v[i];
      v[i] = saved + h;
      const double up = loss().item();
      v[i] = saved - h;
      const double down = loss().item();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric));
      ++out.coordinates;
    }
  }
  return out;
}

inline nn::Tensor random_parameter(nn::Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(nn::shape_size(shape));
  for (auto& x : v) x = scale * rng.normal();
  return nn::Tensor::parameter(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------------------
// Advantage estimation by explicit sums

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, the sum cut after the first
/// done; returns A_t + V_t as the second half.
inline std::pair<std::vector<double>, std::vector<double>> gae_by_sums(const std::vector<double>& rewards,
                                                                       const std::vector<double>& values,
                                                                       const std::vector<bool>& dones, double gamma,
                                                                       double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = dones[t] ? 0.0 : values[t + 1];
    delta[t] = rewards[t] + gamma * next - values[t];
  }
  std::vector<double> adv(n, 0.0), ret(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      adv[t] += weight * delta[l];
      if (dones[l]) break;
      weight *= gamma * lambda;
    }
    ret[t] = adv[t] + values[t];
  }
  return {adv, ret};
}

// ---------------------------------------------------------------------------
// Policies

/// Uniform over the six decisions, from the caller's stream.
class UniformPolicy final : public mac::JointPolicy {
 public:
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng& rng) const override {
    std::vector<mac::Decision> out;
    for (std::size_t u = 0; u < state.buffers.size(); ++u) {
      out.push_back(mac::Decision::from_index(static_cast<int>(rng.below(mac::kNumDecisions))));
    }
    return out;
  }
};

/// Uniform decisions, except that an empty buffer never transmits (the
/// transmission would be idle on the air, which is invisible to the
/// gateway-observation parents).
class ScriptedPolicy final : public mac::JointPolicy {
 public:
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng& rng) const override {
    std::vector<mac::Decision> out;
    for (std::size_t u = 0; u < state.buffers.size(); ++u) {
      auto d = mac::Decision::from_index(static_cast<int>(rng.below(mac::kNumDecisions)));
      if (state.buffers[u] == 0 && d.action == mac::NodeAction::Transmit) d.action = mac::NodeAction::Idle;
      out.push_back(d);
    }
    return out;
  }
};

/// Plays a fixed decision list slot by slot, ignoring the state.
class FixedSequencePolicy final : public mac::JointPolicy {
 public:
  explicit FixedSequencePolicy(std::vector<std::vector<mac::Decision>> slots) : slots_(std::move(slots)) {}
  std::vector<mac::Decision> decide(const mac::GlobalState& state, Rng&) const override {
    return slots_.at(static_cast<std::size_t>(state.t));
  }

 private:
  std::vector<std::vector<mac::Decision>> slots_;
};

}  // namespace cmbrl::testing
