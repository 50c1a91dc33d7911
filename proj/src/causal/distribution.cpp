// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/causal/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmbrl/errors.hpp"

namespace cmbrl::causal {

Categorical categorical_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("categorical over zero classes");
  const double m = *std::max_element(logits.begin(), logits.end());
  Categorical c;
  c.probs.resize(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    c.probs[i] = std::exp(logits[i] - m);
    z += c.probs[i];
  }
  for (auto& p : c.probs) p /= z;
  return c;
}

std::size_t sample(const Categorical& dist, Rng& rng) {
  if (dist.probs.empty()) throw ContractViolation("categorical over zero classes");
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] <= 0.0) continue;
    last_positive = i;
    cum += dist.probs[i];
    if (u < cum) return i;
  }
  // Rounding left the cumulative sum just under u.
  return last_positive;
}

std::vector<double> sample(const Gaussian& dist, Rng& rng) {
  if (dist.mean.size() != dist.log_std.size()) throw ContractViolation("gaussian dimension mismatch");
  std::vector<double> x(dist.mean.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = dist.mean[i] + std::exp(dist.log_std[i]) * rng.normal();
  return x;
}

SampleValue sample(const Distribution& dist, Rng& rng) {
  return std::visit([&rng](const auto& d) -> SampleValue { return sample(d, rng); }, dist);
}

std::size_t argmax(const Categorical& dist) {
  return static_cast<std::size_t>(std::max_element(dist.probs.begin(), dist.probs.end()) -
                                  dist.probs.begin());
}

double negative_log_likelihood(const Categorical& dist, std::size_t observed) {
  if (observed >= dist.probs.size()) throw ContractViolation("observed class out of range");
  return -std::log(dist.probs[observed]);
}

double negative_log_likelihood(const Gaussian& dist, std::span<const double> observed) {
  if (observed.size() != dist.mean.size()) throw ContractViolation("gaussian dimension mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double nll = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double z = (observed[i] - dist.mean[i]) * std::exp(-dist.log_std[i]);
    nll += 0.5 * z * z + dist.log_std[i] + half_log_2pi;
  }
  return nll;
}

AttentionWeights attention_weights(std::span<const double> scores) {
  // Shift by max(0, max e) so that the implicit zero score of the action
  // term stays in the same frame.
  double shift = 0.0;
  for (double e : scores) {
    if (!std::isfinite(e)) throw ContractViolation("non-finite attention score");
    shift = std::max(shift, e);
  }
  AttentionWeights w;
  w.states.resize(scores.size());
  const double action_term = std::exp(-shift);
  double denom = action_term;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w.states[i] = std::exp(scores[i] - shift);
    denom += w.states[i];
  }
  for (auto& a : w.states) a /= denom;
  w.action = action_term / denom;
  return w;
}

}  // namespace cmbrl::causal
