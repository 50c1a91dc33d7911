// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/rollout/rollout.hpp"

#include "cmbrl/errors.hpp"

namespace cmbrl::rollout {

mac::SlotOutcome SimulatorModel::sample_next(const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                                             Rng& rng) const {
  return mac::simulate_data_plane(config_, state, decisions, rng);
}

mac::SlotOutcome LearnedModel::sample_next(const mac::GlobalState& state, std::span<const mac::Decision> decisions,
                                           Rng& rng) const {
  return causal::sample_outcome(model_, config_, state, decisions, rng);
}

std::vector<mac::Transition> k_step_rollout(const ObservationModel& model, const mac::JointPolicy& policy,
                                            const mac::EnvConfig& config, const mac::GlobalState& start, int k,
                                            Rng& env_rng, Rng& policy_rng) {
  if (k < 1) throw UsageError("rollout horizon must be at least 1");
  std::vector<mac::Transition> out;
  mac::GlobalState x = start;
  for (int tau = 0; tau < k && !mac::is_terminal(config, x); ++tau) {
    const auto decisions = policy.decide(x, policy_rng);
    const mac::SlotOutcome next = model.sample_next(x, decisions, env_rng);
    mac::Transition tr = mac::complete_slot(config, x, decisions, next, env_rng);
    tr.synthetic = true;
    tr.truncated = !tr.done && tau + 1 == k;
    x = tr.after;
    out.push_back(std::move(tr));
    if (out.back().done) break;
  }
  return out;
}

std::vector<mac::Transition> generate_synthetic(const ObservationModel& model, const mac::JointPolicy& policy,
                                                const mac::EnvConfig& config, const ReplayBuffer& real,
                                                int num_rollouts, int k, Rng& rng) {
  if (num_rollouts <= 0) return {};
  if (real.empty()) throw UsageError("synthetic rollouts need a nonempty real buffer");
  std::vector<mac::Transition> out;
  out.reserve(static_cast<std::size_t>(num_rollouts) * static_cast<std::size_t>(std::max(k, 0)));
  for (int i = 0; i < num_rollouts; ++i) {
    const mac::GlobalState& start = real[rng.below(real.size())].before;
    Rng env_rng(rng.next_u64());
    Rng policy_rng(rng.next_u64());
    auto part = k_step_rollout(model, policy, config, start, k, env_rng, policy_rng);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace cmbrl::rollout
