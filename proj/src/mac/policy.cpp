// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/mac/policy.hpp"

namespace cmbrl::mac {

std::vector<Transition> run_episode(const EnvConfig& config, const JointPolicy& policy,
                                    std::uint64_t env_seed, Rng& policy_rng) {
  EnvState env = reset(config, env_seed);
  std::vector<Transition> episode;
  while (!is_terminal(config, env.global)) {
    const auto decisions = policy.decide(env.global, policy_rng);
    episode.push_back(step(env, decisions));
    if (episode.back().done) break;
  }
  return episode;
}

double episode_return(const std::vector<Transition>& episode) {
  double r = 0.0;
  for (const auto& t : episode) r += t.reward;
  return r;
}

}  // namespace cmbrl::mac
