// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cmbrl/nn/parameters.hpp"

namespace cmbrl::nn {

enum class Activation { Identity, Relu, Tanh };

Tensor activate(const Tensor& x, Activation act);

/// Weight init shared by every layer: N(0, init_std^2) weights, zero biases.
struct Init {
  double weight_std = 0.01;
  Rng* rng = nullptr;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Init init);

  Tensor operator()(const Tensor& x) const { return affine(x, weight_, bias_); }

  std::size_t in_dim() const { return weight_.rows(); }
  std::size_t out_dim() const { return weight_.cols(); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [1, out]
};

/// Stack of Linear layers; `hidden` after every layer but the last, `output`
/// after the last.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims,
      Activation hidden, Activation output, Init init);

  Tensor operator()(const Tensor& x) const;
  std::size_t out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<Linear> layers_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::Identity;
};

/// Standard gated recurrent unit:
///   z  = sigmoid(x W_z + h U_z + b_z)
///   r  = sigmoid(x W_r + h U_r + b_r)
///   h~ = tanh(x W_h + (r * h) U_h + b_h)
///   h' = (1 - z) * h + z * h~
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& name, std::size_t input_dim,
          std::size_t hidden_dim, Init init);

  Tensor step(const Tensor& hidden, const Tensor& input) const;
  /// Folds `step` over the sequence; an empty sequence returns `initial`.
  Tensor run(const std::vector<Tensor>& sequence, const Tensor& initial) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  struct Gate {
    Tensor input_weight;   // [input, hidden]
    Tensor hidden_weight;  // [hidden, hidden]
    Tensor bias;           // [1, hidden]
  };
  const Gate& update_gate() const { return z_; }
  const Gate& reset_gate() const { return r_; }
  const Gate& candidate() const { return h_; }

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  Gate z_, r_, h_;
};

}  // namespace cmbrl::nn
