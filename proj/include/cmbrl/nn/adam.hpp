// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "cmbrl/nn/parameters.hpp"

namespace cmbrl::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2: adds weight_decay * 2 * param to every gradient, i.e. the
  /// gradient of weight_decay * ||param||^2.
  double weight_decay = 0.0;
};

/// Adaptive-moment optimizer with bias correction. Moments are keyed by
/// parameter name, so one instance serves exactly one store.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update from the gradients currently held by `store`.
  void step(ParameterStore& store);

  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace cmbrl::nn
