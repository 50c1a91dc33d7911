// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "cmbrl/baselines/baselines.hpp"
#include "cmbrl/mac/policy.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cmbrl;
using namespace cmbrl::baselines;

namespace {
mac::EnvConfig det_env(int packets, int t_max) {
  mac::EnvConfig c;
  c.buffer_capacity = packets;
  c.max_steps = t_max;
  c.bler = 0.0;
  return c;
}

double play(const mac::EnvConfig& c, const mac::JointPolicy& p, std::uint64_t seed = 1) {
  Rng rng(seed);
  return mac::episode_return(mac::run_episode(c, p, seed, rng));
}

// Best return over every open-loop decision sequence of a deterministic
// one-node episode.
double brute_force_optimum(const mac::EnvConfig& c) {
  double best = -1e9;
  std::vector<int> digits(static_cast<std::size_t>(c.max_steps), 0);
  for (;;) {
    std::vector<std::vector<mac::Decision>> slots;
    for (int d : digits) slots.push_back({mac::Decision::from_index(d)});
    best = std::max(best, play(c, testing::FixedSequencePolicy(slots)));
    std::size_t i = 0;
    while (i < digits.size() && ++digits[i] == mac::kNumDecisions) digits[i++] = 0;
    if (i == digits.size()) return best;
  }
}
}  // namespace

TEST_CASE("q update follows the one-step rule") {
  QTable q;
  q.mutable_values("s")[2] = 1.0;
  q.mutable_values("n") = {0.5, 3.0, -1.0, 0.0, 0.0, 0.0};
  q_update(q, "s", mac::Decision::from_index(2), -1.0, "n", false, 0.1, 0.9);
  CHECK(q.values("s")[2] == doctest::Approx(1.0 + 0.1 * (-1.0 + 0.9 * 3.0 - 1.0)));
  q_update(q, "s", mac::Decision::from_index(2), -1.0, "n", true, 0.1, 0.9);
  const double before = 1.0 + 0.1 * (-1.0 + 0.9 * 3.0 - 1.0);
  CHECK(q.values("s")[2] == doctest::Approx(before + 0.1 * (-1.0 - before)));
  CHECK(q.values("unseen")[0] == 0.0);
  CHECK(q.size() == 2);
}

TEST_CASE("greedy ties and epsilon handling") {
  CHECK(greedy_index({0, 1, 1, 0, 0, 0}) == 1);
  CHECK(greedy_index({-2, -2, -2, -2, -2, -2}) == 0);
  QTable q;
  q.mutable_values("k")[4] = 1.0;
  Rng rng(3);
  const auto snapshot = rng;
  CHECK(q_act(q, "k", 0.0, rng).index() == 4);
  Rng copy = snapshot;
  CHECK(rng.next_u64() == copy.next_u64());

  QLearningConfig cfg;
  CHECK(epsilon_at(cfg, 0, 100) == doctest::Approx(1.0));
  CHECK(epsilon_at(cfg, 25, 100) == doctest::Approx(0.525));
  CHECK(epsilon_at(cfg, 50, 100) == doctest::Approx(0.05));
  CHECK(epsilon_at(cfg, 99, 100) == doctest::Approx(0.05));

  // epsilon = 1 is uniform over decisions
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[static_cast<std::size_t>(q_act(q, "k", 1.0, rng).index())];
  for (int c : counts) CHECK(std::abs(c / 60000.0 - 1.0 / 6.0) < 0.01);
}

TEST_CASE("state keys are per node and window dependent") {
  mac::EnvConfig c;
  c.num_nodes = 2;
  c.history_window = 2;
  auto env = mac::reset(c, 1);
  const std::string k0 = state_key(c, env.global, 0);
  CHECK(k0 == state_key(c, env.global, 1));
  const std::vector<mac::Decision> d{{mac::UplinkControl::SchedulingRequest, mac::NodeAction::Idle},
                                     {mac::UplinkControl::NoRequest, mac::NodeAction::Idle}};
  mac::step(env, d);
  CHECK(state_key(c, env.global, 0) != state_key(c, env.global, 1));
  CHECK(state_key(c, env.global, 0) != k0);
}

TEST_CASE("tabular q reaches the brute-force optimum on a deterministic channel") {
  const auto c = det_env(1, 4);
  const double optimum = brute_force_optimum(c);
  CHECK(optimum == -2.0);
  QLearningConfig cfg;
  cfg.alpha = 0.5;
  QLearningTeam team(c, cfg);
  Rng rng(5);
  const long episodes = 3000;
  for (long e = 0; e < episodes; ++e) {
    team.set_epsilon(epsilon_at(cfg, e, episodes));
    auto env = mac::reset(c, static_cast<std::uint64_t>(e));
    while (!mac::is_terminal(c, env.global)) {
      const auto t = mac::step(env, team.decide(env.global, rng));
      team.learn(t);
      if (t.done) break;
    }
  }
  CHECK(play(c, GreedyQTeam(team)) == optimum);
}

TEST_CASE("predefined policy waits for a grant") {
  const PredefinedTeam p;
  for (int packets = 1; packets <= 4; ++packets) {
    CAPTURE(packets);
    CHECK(play(det_env(packets, 32), p) == -(2.0 * packets + 1.0));
  }
  // one slot worse than the best open-loop schedule
  CHECK(play(det_env(1, 4), p) == brute_force_optimum(det_env(1, 4)) - 1.0);

  mac::NodeWindow w;
  CHECK(predefined_decision(w, 0) == mac::Decision{mac::UplinkControl::NoRequest, mac::NodeAction::Idle});
  CHECK(predefined_decision(w, 2) == mac::Decision{mac::UplinkControl::SchedulingRequest, mac::NodeAction::Idle});
}
