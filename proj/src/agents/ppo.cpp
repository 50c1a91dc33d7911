// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/agents/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "cmbrl/errors.hpp"

namespace cmbrl::agents {

AdvantageBatch gae(std::span<const double> rewards, std::span<const double> values, const std::vector<bool>& dones,
                   double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ContractViolation("gae: expected " + std::to_string(n) + " rewards, " + std::to_string(n + 1) +
                            " values and " + std::to_string(n) + " done flags; got " +
                            std::to_string(values.size()) + " values and " + std::to_string(dones.size()) +
                            " flags");
  }
  AdvantageBatch out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

void normalize(std::vector<double>& values) {
  if (values.empty()) return;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(values.size()));
  if (sd < 1e-12) return;
  for (double& v : values) v = (v - mean) / sd;
}

double clipped_surrogate_term(double ratio, double advantage, double clip_eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage);
}

// ---------------------------------------------------------------------------

PpoTeam::PpoTeam(const mac::EnvConfig& env, const AgentConfig& config, std::uint64_t seed)
    : env_(env),
      config_(config),
      policy_opt_({.lr = config.policy_lr}),
      value_opt_({.lr = config.value_lr}) {
  env_.validate();
  Rng rng(seed);
  const nn::Init init{config.dims.init_std, &rng};
  const std::size_t width = mac::agent_input_width(env_);
  if (config.share_policy) {
    policies_.emplace_back(policy_store_, "policy/shared", width, config.dims, init);
  } else {
    for (int u = 0; u < env_.num_nodes; ++u) {
      policies_.emplace_back(policy_store_, "policy/node" + std::to_string(u + 1), width, config.dims, init);
    }
  }
  value_ = ValueNetwork(value_store_, "value", mac::global_input_width(env_), config.dims, init);
}

const PolicyNetwork& PpoTeam::policy(int node) const {
  if (node < 0 || node >= env_.num_nodes) throw ContractViolation("policy: node index out of range");
  return policies_[config_.share_policy ? 0 : static_cast<std::size_t>(node)];
}

std::vector<mac::Decision> PpoTeam::decide(const mac::GlobalState& state, Rng& rng) const {
  std::vector<mac::Decision> out;
  out.reserve(static_cast<std::size_t>(env_.num_nodes));
  for (int u = 0; u < env_.num_nodes; ++u) {
    out.push_back(act(policy(u), mac::encode_agent_input(env_, state, u), rng, false).decision);
  }
  return out;
}

std::vector<mac::Decision> PpoTeam::decide_greedy(const mac::GlobalState& state) const {
  Rng unused(0);
  std::vector<mac::Decision> out;
  out.reserve(static_cast<std::size_t>(env_.num_nodes));
  for (int u = 0; u < env_.num_nodes; ++u) {
    out.push_back(act(policy(u), mac::encode_agent_input(env_, state, u), unused, true).decision);
  }
  return out;
}

double PpoTeam::value_of(const mac::GlobalState& state) const {
  nn::NoGradGuard no_grad;
  return value_.forward(nn::Tensor::row(mac::encode_global_input(env_, state))).item();
}

// ---------------------------------------------------------------------------

namespace {

nn::Tensor stack_rows(const std::vector<const std::vector<double>*>& rows) {
  const std::size_t width = rows.front()->size();
  std::vector<double> data;
  data.reserve(rows.size() * width);
  for (const auto* r : rows) data.insert(data.end(), r->begin(), r->end());
  return nn::Tensor::from({rows.size(), width}, std::move(data));
}

std::vector<double> values_of(const PpoTeam& team, const std::vector<const std::vector<double>*>& rows) {
  nn::NoGradGuard no_grad;
  return team.value().forward(stack_rows(rows)).values();
}

}  // namespace

std::vector<PpoSample> build_samples(const PpoTeam& team, std::span<const mac::Transition* const> transitions,
                                     double gamma, double lambda) {
  const auto& env = team.env();
  const std::size_t n = transitions.size();
  std::vector<PpoSample> samples(n);
  if (n == 0) return samples;
  const auto users = static_cast<std::size_t>(env.num_nodes);

  std::vector<std::vector<double>> after_inputs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = *transitions[i];
    auto& s = samples[i];
    s.decisions = t.decisions;
    s.inputs.reserve(users);
    for (int u = 0; u < env.num_nodes; ++u) s.inputs.push_back(mac::encode_agent_input(env, t.before, u));
    s.global_input = mac::encode_global_input(env, t.before);
    after_inputs[i] = mac::encode_global_input(env, t.after);
    s.old_log_probs.assign(users, 0.0);
  }

  {
    nn::NoGradGuard no_grad;
    std::vector<const std::vector<double>*> rows(n);
    std::vector<mac::Decision> decisions(n);
    for (std::size_t u = 0; u < users; ++u) {
      for (std::size_t i = 0; i < n; ++i) {
        rows[i] = &samples[i].inputs[u];
        decisions[i] = samples[i].decisions[u];
      }
      const auto lp = joint_log_prob(team.policy(static_cast<int>(u)).forward(stack_rows(rows)), decisions).values();
      for (std::size_t i = 0; i < n; ++i) samples[i].old_log_probs[u] = lp[i];
    }
  }

  std::vector<const std::vector<double>*> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = &samples[i].global_input;
  const auto v_before = values_of(team, rows);
  for (std::size_t i = 0; i < n; ++i) rows[i] = &after_inputs[i];
  const auto v_after = values_of(team, rows);

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = *transitions[i];
    const bool last = i + 1 == n;
    const bool breaks = last || t.done || t.truncated || transitions[i + 1]->synthetic != t.synthetic ||
                        transitions[i + 1]->before.t != t.after.t;
    if (!breaks) continue;
    const std::size_t len = i + 1 - start;
    std::vector<double> rewards(len), values(len + 1);
    std::vector<bool> dones(len, false);
    for (std::size_t j = 0; j < len; ++j) {
      rewards[j] = transitions[start + j]->reward;
      values[j] = v_before[start + j];
      dones[j] = transitions[start + j]->done;
    }
    values[len] = v_after[i];
    const auto adv = gae(rewards, values, dones, gamma, lambda);
    for (std::size_t j = 0; j < len; ++j) {
      samples[start + j].advantage = adv.advantages[j];
      samples[start + j].return_target = adv.returns[j];
    }
    start = i + 1;
  }
  return samples;
}

nn::Tensor policy_loss(const PpoTeam& team, std::span<const PpoSample* const> batch,
                       std::span<const double> advantages, const PpoConfig& config, PpoDiagnostics* diag) {
  if (batch.empty()) throw UsageError("policy loss on an empty batch");
  if (advantages.size() != batch.size()) throw ContractViolation("advantages not aligned with batch");
  const std::size_t b = batch.size();
  const std::size_t users = batch.front()->inputs.size();
  const nn::Tensor adv = nn::Tensor::from({b, 1}, std::vector<double>(advantages.begin(), advantages.end()));

  nn::Tensor total;
  nn::Tensor entropy_total;
  double ratio_sum = 0.0;
  std::size_t clipped = 0;
  std::vector<const std::vector<double>*> rows(b);
  std::vector<mac::Decision> decisions(b);
  std::vector<double> old(b);
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = 0; i < b; ++i) {
      rows[i] = &batch[i]->inputs[u];
      decisions[i] = batch[i]->decisions[u];
      old[i] = batch[i]->old_log_probs[u];
    }
    const auto heads = team.policy(static_cast<int>(u)).forward(stack_rows(rows));
    const nn::Tensor lp = joint_log_prob(heads, decisions);
    const nn::Tensor ratio = nn::exp(nn::sub(lp, nn::Tensor::from({b, 1}, old)));
    const nn::Tensor surr = nn::minimum(nn::mul(ratio, adv),
                                        nn::mul(nn::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps), adv));
    const nn::Tensor part = nn::sum(surr);
    total = total.defined() ? nn::add(total, part) : part;
    if (config.entropy_coef != 0.0 || diag) {
      const nn::Tensor h = nn::sum(joint_entropy(heads));
      entropy_total = entropy_total.defined() ? nn::add(entropy_total, h) : h;
    }
    for (double r : ratio.data()) {
      ratio_sum += r;
      if (std::abs(r - 1.0) > config.clip_eps) ++clipped;
    }
  }
  const double count = static_cast<double>(b * users);
  nn::Tensor loss = nn::scale(total, -1.0 / count);
  if (config.entropy_coef != 0.0) loss = nn::sub(loss, nn::scale(entropy_total, config.entropy_coef / count));
  if (diag) {
    diag->mean_ratio = ratio_sum / count;
    diag->clip_fraction = static_cast<double>(clipped) / count;
    diag->entropy = entropy_total.item() / count;
  }
  return loss;
}

nn::Tensor value_loss(const PpoTeam& team, std::span<const PpoSample* const> batch) {
  if (batch.empty()) throw UsageError("value loss on an empty batch");
  std::vector<const std::vector<double>*> rows(batch.size());
  std::vector<double> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    rows[i] = &batch[i]->global_input;
    targets[i] = batch[i]->return_target;
  }
  const nn::Tensor v = team.value().forward(stack_rows(rows));
  return nn::mean(nn::square(nn::sub(v, nn::Tensor::from({batch.size(), 1}, std::move(targets)))));
}

PpoDiagnostics ppo_update(PpoTeam& team, const std::vector<PpoSample>& samples, const PpoConfig& config, Rng& rng) {
  if (samples.empty()) throw UsageError("ppo_update on an empty batch");
  if (config.batch_size == 0) throw ContractViolation("ppo batch size must be positive");
  const std::size_t n = samples.size();
  const std::size_t bs = std::min(config.batch_size, n);

  PpoDiagnostics acc;
  acc.mean_ratio = 0.0;
  std::vector<const PpoSample*> batch;
  std::vector<double> adv;
  auto run_minibatch = [&](std::span<const std::size_t> idx) {
    batch.clear();
    adv.clear();
    for (std::size_t i : idx) {
      batch.push_back(&samples[i]);
      adv.push_back(samples[i].advantage);
    }
    if (config.normalize_advantages && adv.size() > 1) normalize(adv);

    PpoDiagnostics d;
    team.policy_store().zero_grad();
    const nn::Tensor pl = policy_loss(team, batch, adv, config, &d);
    pl.backward();
    team.policy_optimizer().step(team.policy_store());

    team.value_store().zero_grad();
    const nn::Tensor vl = value_loss(team, batch);
    vl.backward();
    team.value_optimizer().step(team.value_store());

    acc.mean_ratio += d.mean_ratio;
    acc.clip_fraction += d.clip_fraction;
    acc.entropy += d.entropy;
    acc.policy_loss += pl.item();
    acc.value_loss += vl.item();
    ++acc.updates;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.minibatches_per_epoch == 0) {
      const auto order = permutation(n, rng);
      for (std::size_t begin = 0; begin < n; begin += bs) {
        run_minibatch(std::span(order).subspan(begin, std::min(bs, n - begin)));
      }
    } else {
      for (int m = 0; m < config.minibatches_per_epoch; ++m) {
        const auto idx = sample_without_replacement(n, bs, rng);
        run_minibatch(idx);
      }
    }
  }
  if (acc.updates > 0) {
    const double k = acc.updates;
    acc.mean_ratio /= k;
    acc.clip_fraction /= k;
    acc.entropy /= k;
    acc.policy_loss /= k;
    acc.value_loss /= k;
  } else {
    acc.mean_ratio = 1.0;
  }
  return acc;
}

}  // namespace cmbrl::agents
