// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "cmbrl/rng.hpp"

namespace cmbrl::causal {

struct Gaussian {
  std::vector<double> mean;
  std::vector<double> log_std;
};

struct Categorical {
  std::vector<double> probs;
};

using Distribution = std::variant<Gaussian, Categorical>;
using SampleValue = std::variant<std::vector<double>, std::size_t>;

/// Softmax of raw logits, max-shifted.
Categorical categorical_from_logits(std::span<const double> logits);

/// Inverse-CDF draw: one uniform() u, first class whose cumulative mass
/// exceeds u. Zero-probability classes are never returned.
std::size_t sample(const Categorical& dist, Rng& rng);
/// mean + exp(log_std) * normal(), one normal() per dimension.
std::vector<double> sample(const Gaussian& dist, Rng& rng);
SampleValue sample(const Distribution& dist, Rng& rng);

std::size_t argmax(const Categorical& dist);

double negative_log_likelihood(const Categorical& dist, std::size_t observed);
/// sum_d 0.5 ((x - mu) / sigma)^2 + log sigma + 0.5 ln(2 pi)
double negative_log_likelihood(const Gaussian& dist, std::span<const double> observed);

/// Modified softmax over attention scores: one weight per state plus the
/// residual weight of the action embedding,
///   alpha_i = exp(e_i) / (1 + sum_k exp(e_k)),  alpha_a = 1 / (1 + sum_k exp(e_k)).
struct AttentionWeights {
  std::vector<double> states;
  double action = 1.0;
};
AttentionWeights attention_weights(std::span<const double> scores);

}  // namespace cmbrl::causal
