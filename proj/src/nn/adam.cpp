// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/nn/adam.hpp"

#include <cmath>

namespace cmbrl::nn {

void Adam::step(ParameterStore& store) {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [name, param] : store.items()) {
    Tensor p = param;
    auto values = p.mutable_data();
    auto grads = p.grad();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != values.size()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i] + 2.0 * options_.weight_decay * values[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace cmbrl::nn
