// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "cmbrl/errors.hpp"
#include "cmbrl/mac/env.hpp"
#include "cmbrl/mac/policy.hpp"
#include "cmbrl/mac/trajectory.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cmbrl;
using namespace cmbrl::mac;

namespace {
const Decision kIdle{UplinkControl::NoRequest, NodeAction::Idle};
const Decision kTx{UplinkControl::NoRequest, NodeAction::Transmit};
const Decision kDel{UplinkControl::NoRequest, NodeAction::DeleteOldest};
const Decision kSrIdle{UplinkControl::SchedulingRequest, NodeAction::Idle};
const Decision kSrTx{UplinkControl::SchedulingRequest, NodeAction::Transmit};

EnvConfig one_node(int p, double bler, int t_max = 16) {
  EnvConfig c;
  c.num_nodes = 1;
  c.buffer_capacity = p;
  c.bler = bler;
  c.max_steps = t_max;
  return c;
}
}  // namespace

TEST_CASE("reset fills buffers and pads windows") {
  EnvConfig c = one_node(3, 0.5);
  c.num_nodes = 2;
  c.history_window = 2;
  const auto s = reset(c, 1);
  CHECK(s.global.t == 0);
  CHECK(s.global.buffers == std::vector<int>{3, 3});
  CHECK(s.global.gateway_obs == 0);
  CHECK_FALSE(s.global.packet_lost);
  for (const auto& w : s.global.node_windows) {
    REQUIRE(w.size() == 2);
    for (const auto& r : w) CHECK(r.pad);
  }
  CHECK(s.global.gateway_window.size() == 2);
}

TEST_CASE("config validation names the field") {
  EnvConfig c = one_node(2, 0.5);
  c.bler = 1.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("bler"), ConfigError);
  c = one_node(0, 0.5);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = one_node(2, 0.5);
  c.history_window = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("history_window"), ConfigError);
}

TEST_CASE("first channel draws of seed 42 at bler 0.5") {
  // uniforms 0.755, 0.639, 0.752, 0.136: three receptions, then an erasure
  EnvState env = reset(one_node(4, 0.5), 42);
  const int expected_obs[] = {1, 1, 1, 0};
  for (int obs : expected_obs) {
    const auto tr = step(env, std::vector{kTx});
    CHECK(tr.next.gateway_obs == obs);
    CHECK(tr.dcms[0] == (obs == 1 ? DownlinkControl::Ack : DownlinkControl::Null));
  }
}

TEST_CASE("deleting after an ACK drains cleanly; deleting before loses the packet") {
  SUBCASE("delivered") {
    EnvState env = reset(one_node(1, 0.0), 0);
    auto tr = step(env, std::vector{kTx});
    CHECK(tr.dcms[0] == DownlinkControl::Ack);
    CHECK(tr.next.buffers[0] == 1);
    CHECK_FALSE(tr.done);
    tr = step(env, std::vector{kDel});
    CHECK(tr.next.buffers[0] == 0);
    CHECK(tr.done);
    CHECK_FALSE(tr.after.packet_lost);
    CHECK_THROWS_AS(step(env, std::vector{kIdle}), UsageError);
  }
  SUBCASE("lost") {
    EnvState env = reset(one_node(1, 0.0, 5), 0);
    auto tr = step(env, std::vector{kDel});
    CHECK(tr.after.packet_lost);
    CHECK(tr.next.buffers[0] == 0);
    CHECK_FALSE(tr.done);
    int slots = 1;
    while (!tr.done) {
      tr = step(env, std::vector{kIdle});
      ++slots;
    }
    CHECK(slots == 5);
  }
  SUBCASE("lost is forgiven without the delivery requirement") {
    EnvConfig c = one_node(1, 0.0, 5);
    c.require_delivery = false;
    EnvState env = reset(c, 0);
    CHECK(step(env, std::vector{kDel}).done);
  }
}

TEST_CASE("erasure is idle by default and a collision symbol on request") {
  EnvConfig c = one_node(1, 1.0);
  EnvState env = reset(c, 0);
  CHECK(step(env, std::vector{kTx}).next.gateway_obs == 0);
  c.erased_looks_idle = false;
  env = reset(c, 0);
  CHECK(step(env, std::vector{kTx}).next.gateway_obs == 2);
}

TEST_CASE("two transmitters collide; grants go to requesters not being acknowledged") {
  EnvConfig c = one_node(1, 0.0);
  c.num_nodes = 2;
  EnvState env = reset(c, 3);
  auto tr = step(env, std::vector{kTx, kTx});
  CHECK(tr.next.gateway_obs == 3);
  CHECK(tr.dcms == std::vector{DownlinkControl::Null, DownlinkControl::Null});

  env = reset(c, 3);
  tr = step(env, std::vector{kSrTx, kSrIdle});
  CHECK(tr.next.gateway_obs == 1);
  CHECK(tr.dcms == std::vector{DownlinkControl::Ack, DownlinkControl::Grant});
}

TEST_CASE("a single eligible requester is granted without consuming randomness") {
  EnvConfig c = one_node(1, 0.0);
  c.num_nodes = 2;
  Rng rng(1);
  const Rng before = rng;
  const auto dcms = gateway_signaling(c, std::vector{UplinkControl::NoRequest, UplinkControl::SchedulingRequest}, 0, rng);
  CHECK(dcms == std::vector{DownlinkControl::Null, DownlinkControl::Grant});
  CHECK(rng == before);
  const auto both = gateway_signaling(c, std::vector(2, UplinkControl::SchedulingRequest), 0, rng);
  CHECK_FALSE(rng == before);
  CHECK(std::count(both.begin(), both.end(), DownlinkControl::Grant) == 1);
}

TEST_CASE("arrivals refill up to capacity") {
  EnvConfig c = one_node(2, 0.0);
  c.arrival_rate = 1.0;
  EnvState env = reset(c, 0);
  auto tr = step(env, std::vector{kTx});
  CHECK(tr.next.buffers[0] == 2);
  tr = step(env, std::vector{kDel});
  CHECK(tr.next.buffers[0] == 2);
}

TEST_CASE("windows record slot-t quantities, most recent first") {
  EnvConfig c = one_node(2, 0.0);
  c.history_window = 2;
  EnvState env = reset(c, 0);
  step(env, std::vector{kSrTx});
  step(env, std::vector{kDel});
  const auto& w = env.global.node_windows[0];
  CHECK(w[0] == NodeRecord{false, 2, kDel, DownlinkControl::Null});
  CHECK(w[1] == NodeRecord{false, 2, kSrTx, DownlinkControl::Ack});
  const auto& g = env.global.gateway_window;
  CHECK(g[0].observation == 1);  // outcome of slot 0, seen at slot 1
  CHECK(g[1].observation == 0);
  CHECK(g[1].ucms[0] == UplinkControl::SchedulingRequest);
}

TEST_CASE("window encodings round trip") {
  EnvConfig c = one_node(3, 0.5);
  c.num_nodes = 2;
  c.history_window = 3;
  EnvState env = reset(c, 8);
  Rng rng(2);
  testing::UniformPolicy policy;
  for (int i = 0; i < 2; ++i) step(env, policy.decide(env.global, rng));
  for (int u = 0; u < 2; ++u) {
    const auto& w = env.global.node_windows[static_cast<std::size_t>(u)];
    const auto enc = encode_node_window(w, c.buffer_capacity);
    CHECK(enc.size() == static_cast<std::size_t>(c.history_window * node_record_width()));
    CHECK(decode_node_window(enc, c.history_window, c.buffer_capacity) == w);
  }
  const auto genc = encode_gateway_window(env.global.gateway_window, 2);
  CHECK(decode_gateway_window(genc, 3, 2) == env.global.gateway_window);
  CHECK(encode_agent_input(c, env.global, 0).size() == agent_input_width(c));
  CHECK(encode_global_input(c, env.global).size() == global_input_width(c));
}

TEST_CASE("agent input depends only on the node's own part of the state") {
  EnvConfig c = one_node(2, 0.5);
  c.num_nodes = 2;
  EnvState env = reset(c, 4);
  step(env, std::vector{kTx, kSrIdle});
  GlobalState other = env.global;
  other.buffers[1] = 0;
  other.node_windows[1][0].decision = kDel;
  other.gateway_obs = 3;
  CHECK(encode_agent_input(c, env.global, 0) == encode_agent_input(c, other, 0));
  CHECK(encode_agent_input(c, env.global, 1) != encode_agent_input(c, other, 1));
}

TEST_CASE("trajectory lines round trip") {
  EnvConfig c = one_node(2, 0.5);
  c.num_nodes = 2;
  Rng rng(1);
  testing::UniformPolicy policy;
  const auto ep = run_episode(c, policy, 5, rng);
  std::ostringstream out;
  write_trajectory(out, ep);
  std::istringstream in(out.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    REQUIRE(i < ep.size());
    CHECK(parse_record(line) == to_record(ep[i]));
    ++i;
  }
  CHECK(i == ep.size());
  CHECK_THROWS_AS(parse_record("t=0 buffers=1"), ContractViolation);
}

TEST_CASE("episodes are reproducible from their seeds") {
  EnvConfig c = one_node(2, 0.5);
  c.num_nodes = 2;
  testing::UniformPolicy policy;
  Rng a(3), b(3);
  CHECK(run_episode(c, policy, 17, a) == run_episode(c, policy, 17, b));
}
