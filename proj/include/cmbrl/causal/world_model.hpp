// SPDX-License-Identifier: Apache-2.0
//
// Attention-based inference networks q(v_j | Pa(v_j)) over a causal graph.
//
// Per target: encoded parent states each yield a value vector c_i, the
// encoded parent actions are folded by a GRU into e, which gives the query
// q = W_q e + b_q and the action value c_a = W_a e + b_a. Scores k_i^T q go
// through the modified softmax and h = sum_i alpha_i c_i + alpha_a c_a is
// decoded into distribution parameters. Encoders (one per variable role) and
// key vectors (one per state variable) are shared by all networks.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "cmbrl/causal/distribution.hpp"
#include "cmbrl/causal/graph.hpp"
#include "cmbrl/nn/layers.hpp"

namespace cmbrl::causal {

struct ModelDims {
  std::size_t embed = 64;
  std::size_t value = 128;
  std::size_t query = 32;
  std::size_t gru_hidden = 64;
  std::size_t decoder_hidden = 128;
  double init_std = 0.01;
};

enum class HeadKind { Categorical, Gaussian };

struct TargetSpec {
  int variable = -1;
  HeadKind kind = HeadKind::Categorical;
  std::size_t size = 0;  // class count, or dimension of a Gaussian target
};

/// Raw feature rows per graph variable, [batch, role width].
using VariableBatch = std::map<int, nn::Tensor>;

struct InferenceOutput {
  HeadKind kind = HeadKind::Categorical;
  /// Logits [B, K], or [B, 2d] holding means then log-stds.
  nn::Tensor params;
  /// [B, |S_j| + 1]; column i belongs to state_parents[i], the last column
  /// is the action weight alpha_a.
  nn::Tensor attention;
  std::vector<int> state_parents;

  Distribution distribution(std::size_t row) const;
};

class CausalWorldModel {
 public:
  CausalWorldModel(CausalGraph graph, std::map<VariableRole, std::size_t> role_widths,
                   std::vector<TargetSpec> targets, ModelDims dims, std::uint64_t seed);

  CausalWorldModel(const CausalWorldModel&) = delete;
  CausalWorldModel& operator=(const CausalWorldModel&) = delete;
  CausalWorldModel(CausalWorldModel&&) = default;

  const CausalGraph& graph() const { return graph_; }
  const std::vector<TargetSpec>& targets() const { return targets_; }
  const TargetSpec& target_spec(int variable) const;
  const ModelDims& dims() const { return dims_; }

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const nn::Tensor& key(int state_variable) const;

  /// Union of the parent sets of all targets, ascending.
  std::vector<int> required_inputs() const;

  /// Applies the shared role encoders to every variable in `inputs`.
  std::map<int, nn::Tensor> encode(const VariableBatch& inputs) const;

  /// Reads exactly Pa(target) from `inputs`; a missing parent throws
  /// ContractViolation naming it.
  InferenceOutput infer(int target, const VariableBatch& inputs) const;
  InferenceOutput infer_encoded(int target, const std::map<int, nn::Tensor>& encoded) const;

 private:
  struct Network {
    int target = -1;
    std::vector<int> state_parents;
    std::vector<int> action_parents;
    std::vector<nn::Linear> value;  // aligned with state_parents
    nn::GruCell gru;
    nn::Linear query;
    nn::Linear action_value;
    nn::Mlp decoder;
  };

  const Network& network(int target) const;

  CausalGraph graph_;
  std::map<VariableRole, std::size_t> role_widths_;
  std::vector<TargetSpec> targets_;
  ModelDims dims_;
  nn::ParameterStore store_;
  std::map<VariableRole, nn::Mlp> encoders_;
  std::map<int, nn::Tensor> keys_;
  std::vector<Network> networks_;
};

/// Observed values of the targets for a batch: class indices for
/// categorical heads, [B, d] tensors for Gaussian heads.
struct TargetBatch {
  std::map<int, std::vector<std::size_t>> classes;
  std::map<int, nn::Tensor> values;
};

/// Mean over the batch of the summed per-target negative log-likelihoods,
/// plus lambda times the squared norm of every model parameter. Throws
/// UsageError on an empty batch.
nn::Tensor model_loss(const CausalWorldModel& model, const VariableBatch& inputs,
                      const TargetBatch& targets, double lambda);

/// CSV rows "target,parent,weight" for one batch row; the action weight is
/// reported under the parent name "actions". Writes the header when asked.
void write_attention_csv(std::ostream& out, const CausalWorldModel& model, int target,
                         const InferenceOutput& output, std::size_t row, bool header);

}  // namespace cmbrl::causal
