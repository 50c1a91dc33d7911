// SPDX-License-Identifier: Apache-2.0
//
// cmbrl train | evaluate | compare | bound
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure or
// interruption (metrics and checkpoints are flushed first).
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "cmbrl/errors.hpp"
#include "cmbrl/experiment/training.hpp"
#include "cmbrl/mac/trajectory.hpp"

namespace fs = std::filesystem;
using namespace cmbrl;
using namespace cmbrl::experiment;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seeds;
  std::string out_dir = "out";
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Experiment config file (INI)");
  cmd->add_option("--set", o.overrides, "Override, e.g. train.n_epoch=10 (repeatable)");
  cmd->add_option("--seeds", o.seeds, "Comma-separated seed list, overrides train.seeds");
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
  cmd->add_flag("-q,--quiet", o.quiet, "No per-epoch progress on stderr");
}

TrainConfig build_config(const CommonOptions& o, const std::string& method) {
  TrainConfig c = o.config_path.empty() ? TrainConfig{} : load_config(o.config_path);
  for (const auto& s : o.overrides) apply_override(c, s);
  if (!o.seeds.empty()) apply_override(c, "train.seeds=" + o.seeds);
  if (!method.empty()) apply_override(c, "train.method=" + method);
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_trace(const fs::path& path, const MetricsTrace& trace) {
  std::ofstream out(path);
  write_metrics_csv(out, trace);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Dumps one greedy evaluation episode and, for causal-mbrl, the attention
/// weights of every learned head along it.
void dump_episode(const SeedRun& run, const fs::path& prefix) {
  const auto& cfg = run.config();
  Rng rng(run.eval_seed());
  const auto episode = mac::run_episode(cfg.env, run.greedy_policy(), derive_seed(run.eval_seed(), 0), rng);
  {
    std::ofstream out(prefix.string() + "_trajectory.txt");
    mac::write_trajectory(out, episode);
  }
  if (const auto* model = run.model()) {
    std::ofstream out(prefix.string() + "_attention.csv");
    bool header = true;
    for (const auto& t : episode) {
      const causal::SlotInput row{&t.before, t.decisions, t.dcms};
      const auto inputs = causal::uplink_inputs(cfg.env, model->graph(), std::span(&row, 1), model->required_inputs());
      nn::NoGradGuard no_grad;
      for (const auto& spec : model->targets()) {
        const auto o = model->infer(spec.variable, inputs);
        causal::write_attention_csv(out, *model, spec.variable, o, 0, header);
        header = false;
      }
    }
  }
}

/// Trains every seed of `config`, writing per-seed metrics, checkpoints and
/// dumps under `dir`. Returns the traces in seed order.
std::vector<MetricsTrace> run_method(const TrainConfig& config, const fs::path& dir, bool quiet) {
  fs::create_directories(dir);
  const std::string name = method_name(config.method);
  std::vector<MetricsTrace> traces(config.seeds.size());
  std::mutex log_mu;
  auto one = [&](std::size_t i) {
    SeedRun run(config, config.seeds[i]);
    while (!run.finished() && !g_stop.load()) {
      const auto& r = run.run_epoch();
      if (!quiet) {
        std::lock_guard lock(log_mu);
        std::cerr << name << " seed " << run.seed() << " epoch " << r.epoch << "/" << config.epochs()
                  << " steps " << r.real_env_steps << " eval " << r.eval_mean_reward << "\n";
      }
    }
    const fs::path prefix = dir / (name + "_seed" + std::to_string(run.seed()));
    write_trace(prefix.string() + ".csv", run.trace());
    run.save_checkpoint(prefix.string());
    if (!g_stop.load()) dump_episode(run, prefix);
    traces[i] = run.trace();
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), config.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex fail_mu;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < config.seeds.size();) {
          try {
            one(i);
          } catch (...) {
            std::lock_guard lock(fail_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  bool complete = !g_stop.load();
  for (const auto& t : traces) complete = complete && t.size() == traces.front().size();
  if (complete) write_trace(dir / (name + "_mean.csv"), average_traces(traces));
  return traces;
}

std::map<std::string, std::string> setup_of(const TrainConfig& c) {
  return {{"num_nodes", std::to_string(c.env.num_nodes)},
          {"buffer_capacity", std::to_string(c.env.buffer_capacity)},
          {"max_steps", std::to_string(c.env.max_steps)},
          {"bler", std::to_string(c.env.bler)},
          {"episodes", std::to_string(c.episode_budget())},
          {"seeds", std::to_string(c.seeds.size())}};
}

int cmd_train(const CommonOptions& o, const std::string& method) {
  const TrainConfig config = build_config(o, method);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_file(dir / "config.ini", format_config(config));
  run_method(config, dir, o.quiet);
  return g_stop.load() ? 2 : 0;
}

int cmd_compare(const CommonOptions& o, const std::vector<std::string>& methods, double fraction) {
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  std::vector<std::pair<std::string, MetricsTrace>> means;
  TrainConfig base = build_config(o, "");
  write_file(dir / "config.ini", format_config(base));
  for (const auto& m : methods) {
    TrainConfig c = base;
    c.method = parse_method(m);
    auto traces = run_method(c, dir, o.quiet);
    if (g_stop.load()) return 2;
    means.emplace_back(m, average_traces(traces));
  }
  std::vector<const MetricsTrace*> all;
  for (const auto& [_, t] : means) all.push_back(&t);
  const double target = best_reward(all);
  std::vector<MethodSummary> summaries;
  for (const auto& [m, t] : means) {
    MethodSummary s;
    s.method = m;
    s.samples_to_threshold = samples_to_threshold(t, fraction, target, base.env.max_steps);
    s.final_eval_mean = t.empty() ? 0.0 : t.back().eval_mean_reward;
    s.best_eval_mean = best_reward({&t});
    s.total_real_steps = t.empty() ? 0 : t.back().real_env_steps;
    summaries.push_back(s);
  }
  const std::string json = summary_json(summaries, fraction, target, base.env.max_steps, setup_of(base));
  write_file(dir / "summary.json", json);
  std::cout << json << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& method, const std::string& checkpoint, int episodes,
                 const std::string& trajectory_path) {
  TrainConfig config = build_config(o, method);
  const int n = episodes > 0 ? episodes : config.eval_episodes;
  std::unique_ptr<agents::PpoTeam> team;
  std::unique_ptr<mac::JointPolicy> policy;
  switch (config.method) {
    case Method::Predefined:
      policy = std::make_unique<baselines::PredefinedTeam>();
      break;
    case Method::CausalMbrl: {
      if (checkpoint.empty()) throw ConfigError("evaluate causal-mbrl needs --checkpoint <prefix>");
      agents::AgentConfig ac;
      ac.share_policy = config.share_policy;
      team = std::make_unique<agents::PpoTeam>(config.env, ac, 0);
      team->policy_store().load_file(checkpoint + "_policy.params");
      policy = std::make_unique<agents::GreedyTeam>(*team);
      break;
    }
    case Method::TabularQ:
      throw ConfigError("tabular-q tables are not checkpointed; use train or compare");
  }
  const auto result = evaluate(*policy, config.env, n, config.seeds);
  std::cout << "method " << method_name(config.method) << " episodes " << result.episodes << " mean "
            << result.mean << " std " << result.std << "\n";
  if (!trajectory_path.empty()) {
    Rng rng(config.seeds.front());
    const auto ep = mac::run_episode(config.env, *policy, derive_seed(config.seeds.front(), 0), rng);
    std::ofstream out(trajectory_path);
    mac::write_trajectory(out, ep);
  }
  return 0;
}

int cmd_bound(double vars, double vmax, double din, const std::string& config_path) {
  if (!config_path.empty()) {
    const TrainConfig c = load_config(config_path);
    const auto g = causal::default_graph(c.env);
    vars = static_cast<double>(g.size());
    din = static_cast<double>(g.max_in_degree());
    vmax = std::max({3.0, static_cast<double>(c.env.buffer_capacity + 1), static_cast<double>(c.env.num_nodes + 2)});
    std::cout << g.adjacency_listing();
  }
  std::cout.precision(17);
  std::cout << "num_vars " << vars << " v_max " << vmax << " d_in " << din << "\n"
            << "log_ratio " << theorem1_log_ratio(vars, vmax, din) << "\n"
            << "ratio " << theorem1_ratio(vars, vmax, din) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal model-based multi-agent RL for uplink channel access"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, cmp_opts;
  std::string train_method, eval_method, checkpoint, trajectory;
  int eval_episodes = 0;
  std::vector<std::string> methods{"causal-mbrl", "tabular-q", "predefined"};
  double fraction = 0.95;
  double vars = 0, vmax = 0, din = 0;
  std::string bound_config;

  auto* train = app.add_subcommand("train", "Train one method over the configured seeds");
  add_common(train, train_opts);
  train->add_option("-m,--method", train_method, "causal-mbrl, tabular-q or predefined");

  auto* eval = app.add_subcommand("evaluate", "Greedy evaluation of a policy");
  add_common(eval, eval_opts);
  eval->add_option("-m,--method", eval_method, "causal-mbrl or predefined")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint prefix written by train");
  eval->add_option("-n,--episodes", eval_episodes, "Episodes per seed");
  eval->add_option("--trajectory", trajectory, "Write the first episode here");

  auto* cmp = app.add_subcommand("compare", "Train several methods and summarize sample efficiency");
  add_common(cmp, cmp_opts);
  cmp->add_option("--methods", methods, "Methods to compare")->delimiter(',');
  cmp->add_option("--fraction", fraction, "Threshold on the slots-saved scale");

  auto* bound = app.add_subcommand("bound", "Evaluate V_max^(|V|-d_in) / |V|^2");
  bound->add_option("--vars", vars, "|V|");
  bound->add_option("--vmax", vmax, "V_max");
  bound->add_option("--din", din, "d_in");
  bound->add_option("-c,--config", bound_config, "Take |V|, d_in and V_max from the default graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::signal(SIGINT, on_sigint);
  try {
    if (*train) return cmd_train(train_opts, train_method);
    if (*eval) return cmd_evaluate(eval_opts, eval_method, checkpoint, eval_episodes, trajectory);
    if (*cmp) return cmd_compare(cmp_opts, methods, fraction);
    if (*bound) return cmd_bound(vars, vmax, din, bound_config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
