// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmbrl/causal/uplink.hpp"
#include "cmbrl/errors.hpp"
#include "cmbrl/mac/policy.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cmbrl;
using namespace cmbrl::causal;

namespace {

const ModelDims kSmall{8, 8, 4, 8, 8, 0.3};

mac::EnvConfig env_u(int users) {
  mac::EnvConfig c;
  c.num_nodes = users;
  c.buffer_capacity = 2;
  c.bler = 0.5;
  c.max_steps = 8;
  c.history_window = users == 1 ? 1 : 3;
  return c;
}

std::vector<mac::Transition> random_transitions(const mac::EnvConfig& c, int episodes, std::uint64_t seed) {
  testing::UniformPolicy policy;
  Rng rng(seed);
  std::vector<mac::Transition> out;
  for (int e = 0; e < episodes; ++e) {
    auto ep = mac::run_episode(c, policy, derive_seed(seed, static_cast<std::uint64_t>(e)), rng);
    out.insert(out.end(), ep.begin(), ep.end());
  }
  return out;
}

std::vector<const mac::Transition*> pointers(const std::vector<mac::Transition>& v) {
  std::vector<const mac::Transition*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

VariableBatch inputs_for(const mac::EnvConfig& c, const CausalWorldModel& m, const std::vector<mac::Transition>& ts) {
  std::vector<SlotInput> rows;
  for (const auto& t : ts) rows.push_back({&t.before, t.decisions, t.dcms});
  return uplink_inputs(c, m.graph(), rows, m.required_inputs());
}

/// s1, s2 -> y (Gaussian, 2-d) and s1 -> z (categorical, 3), actions a1, a2.
CausalGraph toy_graph(bool swap_states) {
  CausalGraph g;
  using R = VariableRole;
  const int s1 = g.add_variable({"s1", TimeLayer::Current, R::NodeState, 0});
  const int s2 = g.add_variable({"s2", TimeLayer::Current, R::NodeObservation, 0});
  const int a1 = g.add_variable({"a1", TimeLayer::Current, R::ChannelAction, 0});
  const int a2 = g.add_variable({"a2", TimeLayer::Current, R::Dcm, 0});
  const int y = g.add_variable({"y", TimeLayer::Next, R::NodeState, 0});
  const int z = g.add_variable({"z", TimeLayer::Next, R::NodeObservation, 0});
  g.set_parents(y, swap_states ? std::vector{s2, a1, s1, a2} : std::vector{s1, s2, a1, a2});
  g.set_parents(z, {s1, a1});
  return g;
}

std::map<VariableRole, std::size_t> toy_widths() {
  return {{VariableRole::NodeState, 3}, {VariableRole::NodeObservation, 2}, {VariableRole::ChannelAction, 3},
          {VariableRole::Dcm, 2}};
}

CausalWorldModel toy_model(bool swap_states, std::uint64_t seed) {
  CausalGraph g = toy_graph(swap_states);
  const int y = g.find("y"), z = g.find("z");
  return CausalWorldModel(std::move(g), toy_widths(),
                          {{y, HeadKind::Gaussian, 2}, {z, HeadKind::Categorical, 3}}, kSmall, seed);
}

VariableBatch toy_inputs(const CausalGraph& g, std::size_t batch, Rng& rng) {
  VariableBatch in;
  for (const auto& [name, width] : std::vector<std::pair<std::string, std::size_t>>{
           {"s1", 3}, {"s2", 2}, {"a1", 3}, {"a2", 2}}) {
    in[g.find(name)] = testing::random_parameter({batch, width}, rng).detach();
  }
  return in;
}

}  // namespace

TEST_CASE("default graph: parents, acyclicity and in-degree") {
  const auto g = default_graph(env_u(2));
  CHECK(g.is_acyclic());
  CHECK(g.size() == 2 * 5 + 2 + 2 + 2 + 2 + 1);
  auto names = [&](const std::string& v) {
    std::vector<std::string> out;
    for (int p : g.parents(g.find(v))) out.push_back(g.variable(p).name);
    return out;
  };
  CHECK(names("x1_t+1") == std::vector<std::string>{"x1_t", "o1_t", "d1_t", "m1_t"});
  CHECK(names("o2_t+1") == std::vector<std::string>{"x2_t", "a2_t"});
  CHECK(names("ob_t+1") == std::vector<std::string>{"xb_t", "d1_t", "d2_t"});
  CHECK(names("xb_t+1") == std::vector<std::string>{"xb_t", "ob_t", "d1_t", "d2_t", "m1_t", "m2_t"});
  CHECK(g.max_in_degree() == 10);  // reward: 2 x, xb, 2 d, 2 m, 2 o, ob
  CHECK_THROWS_AS(g.find("nope"), ContractViolation);
  CHECK(g.adjacency_listing().find("o1_t+1 <- x1_t, a1_t") != std::string::npos);
}

TEST_CASE("a cycle is detected") {
  CausalGraph g;
  const int a = g.add_variable({"a", TimeLayer::Current, VariableRole::NodeState, 0});
  const int b = g.add_variable({"b", TimeLayer::Current, VariableRole::NodeState, 0});
  g.set_parents(a, {b});
  CHECK(g.is_acyclic());
  g.set_parents(b, {a});
  CHECK_FALSE(g.is_acyclic());
}

TEST_CASE("categorical sampling frequencies") {
  Rng rng(1);
  const Categorical d{{0.2, 0.0, 0.5, 0.3}};
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample(d, rng)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.006);
  CHECK(std::abs(counts[2] / double(n) - 0.5) < 0.006);
  CHECK(argmax(d) == 2);
  CHECK(negative_log_likelihood(d, 3) == doctest::Approx(-std::log(0.3)));
}

TEST_CASE("gaussian sampling moments and likelihood") {
  Rng rng(2);
  const Gaussian d{{1.0, -2.0}, {std::log(0.5), 0.0}};
  double s0 = 0, s1 = 0, q0 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample(d, rng);
    s0 += x[0];
    s1 += x[1];
    q0 += (x[0] - 1.0) * (x[0] - 1.0);
  }
  CHECK(s0 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(s1 / n == doctest::Approx(-2.0).epsilon(0.01));
  CHECK(std::sqrt(q0 / n) == doctest::Approx(0.5).epsilon(0.01));
  const double x[] = {1.5, -2.0};
  const double expected = 0.5 * 1.0 + std::log(0.5) + 0.5 * std::log(2 * M_PI) + 0.5 * std::log(2 * M_PI);
  CHECK(negative_log_likelihood(d, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("modified softmax keeps the action share and survives large scores") {
  const double scores[] = {0.0, std::log(2.0)};
  const auto w = attention_weights(scores);
  CHECK(w.states[0] == doctest::Approx(0.25));
  CHECK(w.states[1] == doctest::Approx(0.5));
  CHECK(w.action == doctest::Approx(0.25));
  const double big[] = {800.0, 790.0};
  const auto b = attention_weights(big);
  CHECK(std::isfinite(b.action));
  CHECK(b.states[0] + b.states[1] + b.action == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(attention_weights({}).action == 1.0);
}

TEST_CASE("inference reads exactly the parents") {
  const auto c = env_u(2);
  const auto model = make_uplink_model(c, kSmall, 3);
  const auto ts = random_transitions(c, 3, 4);
  auto in = inputs_for(c, model, ts);
  const int target = node_observation_target(model.graph(), 0);
  const auto base = model.infer(target, in);

  // every non-parent perturbed: identical output
  const auto& parents = model.graph().parents(target);
  Rng rng(5);
  auto changed = in;
  for (auto& [var, tensor] : changed) {
    if (std::find(parents.begin(), parents.end(), var) != parents.end()) continue;
    tensor = testing::random_parameter(tensor.shape(), rng).detach();
  }
  const auto same = model.infer(target, changed);
  CHECK(std::equal(base.params.data().begin(), base.params.data().end(), same.params.data().begin()));

  // a parent perturbed: different output
  auto moved = in;
  moved[parents.front()] = testing::random_parameter(in[parents.front()].shape(), rng).detach();
  const auto diff = model.infer(target, moved);
  CHECK_FALSE(std::equal(base.params.data().begin(), base.params.data().end(), diff.params.data().begin()));

  auto missing = in;
  missing.erase(parents.back());
  CHECK_THROWS_WITH_AS(model.infer(target, missing), doctest::Contains(model.graph().variable(parents.back()).name.c_str()),
                       ContractViolation);
}

TEST_CASE("attention rows are normalized and the attention CSV lists every parent") {
  const auto c = env_u(2);
  const auto model = make_uplink_model(c, kSmall, 6);
  const auto ts = random_transitions(c, 2, 7);
  const auto in = inputs_for(c, model, ts);
  const int target = gateway_observation_target(model.graph());
  const auto out = model.infer(target, in);
  REQUIRE(out.attention.cols() == out.state_parents.size() + 1);
  for (std::size_t r = 0; r < out.attention.rows(); ++r) {
    double s = 0;
    for (std::size_t j = 0; j < out.attention.cols(); ++j) s += out.attention.at(r, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::ostringstream csv;
  write_attention_csv(csv, model, target, out, 0, true);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "target,parent,weight");
  std::getline(lines, line);
  CHECK(line.rfind("ob_t+1,xb_t,", 0) == 0);
  std::getline(lines, line);
  CHECK(line.rfind("ob_t+1,actions,", 0) == 0);
}

TEST_CASE("keys are shared across inference networks") {
  const auto model = toy_model(false, 8);
  const auto& g = model.graph();
  std::size_t keys = 0;
  for (const auto& [name, _] : model.parameters().items()) keys += name.rfind("keys/", 0) == 0;
  CHECK(keys == 2);  // s1 and s2, s1 serving both targets

  Rng rng(9);
  const auto in = toy_inputs(g, 4, rng);
  const auto y0 = model.infer(g.find("y"), in).attention.values();
  const auto z0 = model.infer(g.find("z"), in).attention.values();
  const std::vector<double> y_before(y0.begin(), y0.end()), z_before(z0.begin(), z0.end());
  nn::Tensor key = model.key(g.find("s1"));
  for (auto& v : key.mutable_data()) v += 0.5;
  const auto y1 = model.infer(g.find("y"), in).attention.values();
  const auto z1 = model.infer(g.find("z"), in).attention.values();
  CHECK_FALSE(std::equal(y_before.begin(), y_before.end(), y1.begin()));
  CHECK_FALSE(std::equal(z_before.begin(), z_before.end(), z1.begin()));
}

TEST_CASE("output does not depend on the order state parents are listed in") {
  auto a = toy_model(false, 10);
  auto b = toy_model(true, 11);
  CHECK(a.parameters().snapshot() != b.parameters().snapshot());
  b.parameters().restore(a.parameters().snapshot());
  Rng rng(12);
  const auto in = toy_inputs(a.graph(), 5, rng);
  const auto pa = a.infer(a.graph().find("y"), in).params.values();
  const auto pb = b.infer(b.graph().find("y"), in).params.values();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
}

TEST_CASE("gaussian head: parameter layout, loss and learnability") {
  auto model = toy_model(false, 13);
  const auto& g = model.graph();
  const int y = g.find("y"), z = g.find("z");
  Rng rng(14);
  const std::size_t batch = 64;

  auto make_batch = [&](VariableBatch& in, TargetBatch& tb) {
    in = toy_inputs(g, batch, rng);
    const auto s1 = in[g.find("s1")].data();
    std::vector<double> yv(batch * 2);
    std::vector<std::size_t> zc(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      yv[2 * i] = 2.0 * s1[3 * i] + 0.1 * rng.normal();
      yv[2 * i + 1] = -1.0 + 0.1 * rng.normal();
      zc[i] = s1[3 * i + 1] > 0 ? 2 : 0;
    }
    tb.values[y] = nn::Tensor::from({batch, 2}, yv);
    tb.classes[z] = zc;
  };

  VariableBatch in;
  TargetBatch tb;
  make_batch(in, tb);
  const auto out = model.infer(y, in);
  CHECK(out.kind == HeadKind::Gaussian);
  CHECK(out.params.cols() == 4);
  const auto zout = model.infer(z, in);

  // loss = mean of summed NLL + lambda ||phi||^2, rebuilt from the distributions
  double nll = 0;
  for (std::size_t r = 0; r < batch; ++r) {
    const auto gy = std::get<Gaussian>(out.distribution(r));
    const double obs[] = {tb.values[y].at(r, 0), tb.values[y].at(r, 1)};
    nll += negative_log_likelihood(gy, obs);
    nll += negative_log_likelihood(std::get<Categorical>(zout.distribution(r)), tb.classes[z][r]);
  }
  const double lambda = 1e-3;
  const double expected = nll / batch + lambda * model.parameters().squared_norm().item();
  CHECK(model_loss(model, in, tb, lambda).item() == doctest::Approx(expected).epsilon(1e-10));
  CHECK_THROWS_AS(model_loss(model, VariableBatch{}, TargetBatch{}, lambda), UsageError);

  nn::Adam opt(nn::AdamOptions{.lr = 3e-3});
  for (int step = 0; step < 1500; ++step) {
    make_batch(in, tb);
    model.parameters().zero_grad();
    model_loss(model, in, tb, 0.0).backward();
    opt.step(model.parameters());
  }
  make_batch(in, tb);
  const auto fit = model.infer(y, in);
  double err = 0;
  for (std::size_t r = 0; r < batch; ++r) {
    const auto gy = std::get<Gaussian>(fit.distribution(r));
    err += std::abs(gy.mean[0] - 2.0 * in[g.find("s1")].at(r, 0)) + std::abs(gy.mean[1] + 1.0);
  }
  CHECK(err / batch < 0.25);
}

TEST_CASE("model training lowers held-out NLL on uplink data") {
  const auto c = env_u(1);
  auto model = make_uplink_model(c, kSmall, 15);
  nn::Adam opt(nn::AdamOptions{.lr = 3e-3});
  rollout::ReplayBuffer buf;
  for (const auto& t : random_transitions(c, 40, 16)) buf.push(t);
  const auto held = random_transitions(c, 20, 17);
  const auto hp = pointers(held);
  const double before = mean_nll(model, c, hp);
  Rng rng(18);
  ModelTrainConfig mt;
  mt.steps = 300;
  const auto r = train_model(model, opt, c, buf, mt, rng);
  CHECK(r.losses.size() == 300);
  CHECK_FALSE(r.skipped);
  CHECK(mean_nll(model, c, hp) < 0.6 * before);

  rollout::ReplayBuffer tiny;
  tiny.push(held.front());
  CHECK(train_model(model, opt, c, tiny, mt, rng).skipped);
}

TEST_CASE("inference network gradients match finite differences") {
  for (int users : {1, 2}) {
    const auto c = env_u(users);
    auto model = make_uplink_model(c, {5, 6, 3, 4, 6, 0.5}, 19);
    Rng rng(20);
    std::vector<nn::Tensor> wrt;
    for (const auto& [_, p] : model.parameters().items()) {
      nn::Tensor t = p;
      for (auto& v : t.mutable_data()) v += 0.3 * rng.normal();  // off the ReLU kinks
      wrt.push_back(t);
    }
    const auto ts = random_transitions(c, 1, 21);
    const auto batch = pointers(ts);
    const auto r = testing::grad_check([&] { return uplink_model_loss(model, c, batch, 1e-3); }, wrt, rng, 6);
    CHECK(r.max_rel_error < 1e-4);
  }
}
