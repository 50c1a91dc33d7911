// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/nn/layers.hpp"

#include "cmbrl/errors.hpp"

namespace cmbrl::nn {

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Identity: break;
  }
  return x;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Init init) {
  if (init.rng == nullptr) throw ContractViolation("Linear " + name + ": init rng missing");
  weight_ = store.create_normal(name + "/W", {in, out}, init.weight_std, *init.rng);
  bias_ = store.create_zeros(name + "/b", {1, out});
}

Mlp::Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims,
         Activation hidden, Activation output, Init init)
    : hidden_(hidden), output_(output) {
  if (dims.size() < 2) throw ContractViolation("Mlp " + name + ": needs at least two dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(store, name + "/l" + std::to_string(i + 1), dims[i], dims[i + 1], init);
  }
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = activate(layers_[i](h), i + 1 == layers_.size() ? output_ : hidden_);
  }
  return h;
}

GruCell::GruCell(ParameterStore& store, const std::string& name, std::size_t input_dim,
                 std::size_t hidden_dim, Init init)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (init.rng == nullptr) throw ContractViolation("GruCell " + name + ": init rng missing");
  auto gate = [&](const std::string& g) {
    return Gate{store.create_normal(name + "/" + g + "/W", {input_dim, hidden_dim}, init.weight_std, *init.rng),
                store.create_normal(name + "/" + g + "/U", {hidden_dim, hidden_dim}, init.weight_std, *init.rng),
                store.create_zeros(name + "/" + g + "/b", {1, hidden_dim})};
  };
  z_ = gate("z");
  r_ = gate("r");
  h_ = gate("h");
}

Tensor GruCell::step(const Tensor& hidden, const Tensor& input) const {
  if (input.cols() != input_dim_ || hidden.cols() != hidden_dim_ || input.rows() != hidden.rows()) {
    throw ContractViolation("gru_step: input " + shape_string(input.shape()) + " / hidden " +
                            shape_string(hidden.shape()) + " do not match cell (" +
                            std::to_string(input_dim_) + " -> " + std::to_string(hidden_dim_) + ")");
  }
  const Tensor z = sigmoid(add(affine(input, z_.input_weight, z_.bias), matmul(hidden, z_.hidden_weight)));
  const Tensor r = sigmoid(add(affine(input, r_.input_weight, r_.bias), matmul(hidden, r_.hidden_weight)));
  const Tensor candidate =
      tanh(add(affine(input, h_.input_weight, h_.bias), matmul(mul(r, hidden), h_.hidden_weight)));
  // (1 - z) * h + z * h~  ==  h + z * (h~ - h)
  return add(hidden, mul(z, sub(candidate, hidden)));
}

Tensor GruCell::run(const std::vector<Tensor>& sequence, const Tensor& initial) const {
  Tensor h = initial;
  for (const auto& x : sequence) h = step(h, x);
  return h;
}

}  // namespace cmbrl::nn
