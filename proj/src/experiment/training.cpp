// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/experiment/training.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "cmbrl/errors.hpp"

namespace cmbrl::experiment {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

EvalResult evaluate(const mac::JointPolicy& policy, const mac::EnvConfig& env, int episodes,
                    std::span<const std::uint64_t> seeds) {
  EvalResult r;
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t s : seeds) {
    Rng policy_rng(s);
    for (int i = 0; i < episodes; ++i) {
      const double ret = mac::episode_return(
          mac::run_episode(env, policy, derive_seed(s, static_cast<std::uint64_t>(i)), policy_rng));
      sum += ret;
      sum_sq += ret * ret;
      ++r.episodes;
    }
  }
  if (r.episodes == 0) return r;
  const double n = static_cast<double>(r.episodes);
  r.mean = sum / n;
  r.std = std::sqrt(std::max(0.0, sum_sq / n - r.mean * r.mean));
  return r;
}

SeedRun::SeedRun(const TrainConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      buffer_(config.real_buffer_capacity),
      policy_rng_(derive_seed(seed, streams::kPolicy)),
      model_rng_(derive_seed(seed, streams::kModelBatches)),
      rollout_rng_(derive_seed(seed, streams::kRollouts)),
      ppo_rng_(derive_seed(seed, streams::kPpo)) {
  config_.validate();
  switch (config_.method) {
    case Method::CausalMbrl: {
      agents::AgentConfig ac;
      ac.dims.init_std = config_.model.init_std;
      ac.dims.value_scale = config_.value_scale > 0.0 ? config_.value_scale : config_.env.max_steps;
      ac.share_policy = config_.share_policy;
      ac.policy_lr = config_.lr;
      ac.value_lr = config_.lr;
      team_ = std::make_unique<agents::PpoTeam>(config_.env, ac, derive_seed(seed, streams::kAgentInit));
      greedy_team_ = std::make_unique<agents::GreedyTeam>(*team_);
      model_ = std::make_unique<causal::CausalWorldModel>(
          causal::make_uplink_model(config_.env, config_.model, derive_seed(seed, streams::kModelInit)));
      model_opt_ = std::make_unique<nn::Adam>(nn::AdamOptions{.lr = config_.model_lr});
      break;
    }
    case Method::TabularQ:
      q_ = std::make_unique<baselines::QLearningTeam>(config_.env, config_.qlearning);
      greedy_q_ = std::make_unique<baselines::GreedyQTeam>(*q_);
      break;
    case Method::Predefined:
      predefined_ = std::make_unique<baselines::PredefinedTeam>();
      break;
  }
}

SeedRun::~SeedRun() = default;

const mac::JointPolicy& SeedRun::greedy_policy() const {
  if (greedy_team_) return *greedy_team_;
  if (greedy_q_) return *greedy_q_;
  return *predefined_;
}

std::uint64_t SeedRun::eval_seed() const { return derive_seed(seed_, streams::kEval); }

void SeedRun::phase_one(MetricsRecord&) {
  const int count = config_.episodes_in_epoch(epoch_);
  const std::uint64_t env_base = derive_seed(seed_, streams::kTrainEnv);
  for (int e = 0; e < count; ++e) {
    const std::uint64_t env_seed = derive_seed(env_base, static_cast<std::uint64_t>(episodes_));
    if (q_) {
      q_->set_epsilon(baselines::epsilon_at(config_.qlearning, episodes_, config_.episode_budget()));
      mac::EnvState env = mac::reset(config_.env, env_seed);
      while (!mac::is_terminal(config_.env, env.global)) {
        const auto decisions = q_->decide(env.global, policy_rng_);
        mac::Transition t = mac::step(env, decisions);
        q_->learn(t);
        ++real_steps_;
        const bool done = t.done;
        buffer_.push(std::move(t));
        if (done) break;
      }
    } else {
      const mac::JointPolicy& behaviour =
          team_ ? static_cast<const mac::JointPolicy&>(*team_) : static_cast<const mac::JointPolicy&>(*predefined_);
      auto episode = mac::run_episode(config_.env, behaviour, env_seed, policy_rng_);
      real_steps_ += static_cast<long>(episode.size());
      buffer_.extend(std::make_move_iterator(episode.begin()), std::make_move_iterator(episode.end()));
    }
    ++episodes_;
  }
}

void SeedRun::phase_two(MetricsRecord& rec) {
  if (!model_ || epoch_ % config_.n_graph != 0) return;
  causal::ModelTrainConfig mt;
  mt.steps = config_.n_model;
  mt.batch_size = config_.batch_size;
  mt.lambda = config_.l2_lambda;
  const auto result = causal::train_model(*model_, *model_opt_, config_.env, buffer_, mt, model_rng_);
  if (!result.losses.empty()) {
    rec.model_loss = std::accumulate(result.losses.begin(), result.losses.end(), 0.0) /
                     static_cast<double>(result.losses.size());
    ++model_updates_;
  }
}

void SeedRun::phase_three(MetricsRecord& rec) {
  if (!team_) return;
  const rollout::LearnedModel observation_model(*model_, config_.env);
  agents::PpoConfig pc;
  pc.clip_eps = config_.clip_eps;
  pc.epochs = config_.n_ppo;
  pc.batch_size = config_.batch_size;
  pc.minibatches_per_epoch = config_.ppo_minibatches;
  pc.entropy_coef = config_.entropy_coef;

  agents::PpoDiagnostics sum;
  sum.mean_ratio = 0.0;
  int rounds_with_updates = 0;
  for (int round = 0; round < config_.n_round; ++round) {
    const auto synthetic = rollout::generate_synthetic(observation_model, *team_, config_.env, buffer_,
                                                       config_.n_rollout, config_.k_rollout, rollout_rng_);
    rec.synthetic_transitions += static_cast<long>(synthetic.size());
    std::vector<const mac::Transition*> combined;
    const std::size_t real_count = config_.ppo_real_window == 0
                                       ? buffer_.size()
                                       : std::min(buffer_.size(), config_.ppo_real_window);
    combined.reserve(real_count + synthetic.size());
    for (std::size_t i = buffer_.size() - real_count; i < buffer_.size(); ++i) combined.push_back(&buffer_[i]);
    for (const auto& t : synthetic) combined.push_back(&t);
    ++ppo_rounds_;
    if (combined.empty() || config_.n_ppo == 0) continue;
    const auto samples = agents::build_samples(*team_, combined, config_.gamma, config_.gae_lambda);
    const auto d = agents::ppo_update(*team_, samples, pc, ppo_rng_);
    sum.mean_ratio += d.mean_ratio;
    sum.clip_fraction += d.clip_fraction;
    sum.policy_loss += d.policy_loss;
    sum.value_loss += d.value_loss;
    ++rounds_with_updates;
  }
  if (rounds_with_updates > 0) {
    const double k = rounds_with_updates;
    rec.mean_ratio = sum.mean_ratio / k;
    rec.clip_fraction = sum.clip_fraction / k;
    rec.policy_loss = sum.policy_loss / k;
    rec.value_loss = sum.value_loss / k;
  }
}

const MetricsRecord& SeedRun::run_epoch() {
  if (finished()) throw UsageError("all epochs of this run are done");
  MetricsRecord rec;
  rec.epoch = epoch_ + 1;
  rec.model_loss = kNaN;
  rec.mean_ratio = rec.clip_fraction = rec.policy_loss = rec.value_loss = kNaN;

  phase_one(rec);
  phase_two(rec);
  phase_three(rec);

  rec.real_env_steps = real_steps_;
  const std::uint64_t es = eval_seed();
  const auto ev = evaluate(greedy_policy(), config_.env, config_.eval_episodes, std::span(&es, 1));
  rec.eval_mean_reward = ev.mean;
  rec.eval_std = ev.std;
  ++epoch_;
  trace_.push_back(rec);
  return trace_.back();
}

void SeedRun::save_checkpoint(const std::string& prefix) const {
  if (!team_) return;
  team_->policy_store().save_file(prefix + "_policy.params");
  team_->value_store().save_file(prefix + "_value.params");
  model_->parameters().save_file(prefix + "_model.params");
}

MetricsTrace train_seed(const TrainConfig& config, std::uint64_t seed, const std::atomic<bool>* stop) {
  SeedRun run(config, seed);
  while (!run.finished() && !(stop && stop->load())) run.run_epoch();
  return run.trace();
}

std::vector<MetricsTrace> train_all_seeds(const TrainConfig& config, const std::atomic<bool>* stop) {
  std::vector<MetricsTrace> traces(config.seeds.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), config.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) traces[i] = train_seed(config, config.seeds[i], stop);
    return traces;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= config.seeds.size() || failure) return;
        i = next++;
      }
      try {
        traces[i] = train_seed(config, config.seeds[i], stop);
      } catch (...) {
        std::lock_guard lock(mu);
        failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return traces;
}

}  // namespace cmbrl::experiment
