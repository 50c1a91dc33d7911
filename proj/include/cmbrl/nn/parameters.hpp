// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cmbrl/nn/tensor.hpp"
#include "cmbrl/rng.hpp"

namespace cmbrl::nn {

/// Named collection of trainable tensors. Names are unique paths such as
/// "enc/node_state/l1/W"; iteration order is lexicographic, which fixes the
/// order of optimizer updates and checkpoint records.
class ParameterStore {
 public:
  /// Registers a parameter with N(0, std^2) entries drawn from `rng` in
  /// row-major order. Throws ContractViolation on a duplicate name.
  Tensor create_normal(const std::string& name, Shape shape, double std, Rng& rng);
  Tensor create_zeros(const std::string& name, Shape shape);
  Tensor create(const std::string& name, Shape shape, std::vector<double> values);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, Tensor>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();
  /// Sum of squared entries over every parameter, on the tape.
  Tensor squared_norm() const;

  using Snapshot = std::map<std::string, std::vector<double>>;
  Snapshot snapshot() const;
  /// Writes values back in place; names and sizes must match.
  void restore(const Snapshot& snapshot);

  /// Plain-text checkpoint:
  ///   line 1   "cmbrl-params v1 <count>"
  ///   then per parameter  "<name> <rank> <dims...> <hexfloat values...>"
  /// Hexadecimal floats make the round trip bit exact.
  void save(std::ostream& out) const;
  /// Loads values into already-registered parameters of identical shape.
  void load(std::istream& in);
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
};

}  // namespace cmbrl::nn
