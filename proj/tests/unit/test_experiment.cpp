// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "cmbrl/errors.hpp"
#include "cmbrl/experiment/config.hpp"
#include "cmbrl/experiment/metrics.hpp"
#include "cmbrl/experiment/training.hpp"
#include "doctest.h"

using namespace cmbrl;
using namespace cmbrl::experiment;

namespace {
TrainConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

TrainConfig tiny(Method m) {
  TrainConfig c;
  c.method = m;
  c.n_epoch = 2;
  c.n_model = 3;
  c.n_rollout = 4;
  c.batch_size = 16;
  c.eval_episodes = 4;
  c.seeds = {7};
  c.model = {8, 8, 4, 8, 8, 0.3};
  return c;
}

MetricsRecord rec(int epoch, long steps, double reward) {
  MetricsRecord r;
  r.epoch = epoch;
  r.real_env_steps = steps;
  r.eval_mean_reward = reward;
  return r;
}
}  // namespace

TEST_CASE("config files: defaults, sections and errors") {
  auto c = parse("[env]\nnum_nodes = 2\n[train]\nmethod = tabular-q\nseeds = 3, 5\n");
  CHECK(c.env.num_nodes == 2);
  CHECK(c.env.history_window == 3);
  CHECK(c.method == Method::TabularQ);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 5});
  CHECK(parse("[env]\nnum_nodes = 2\nhistory_window = 1\n").env.history_window == 1);
  CHECK(parse("").env.history_window == 1);

  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("[train]\nlearning_rate = 1\n").find("train.learning_rate") != std::string::npos);
  CHECK(message("[env]\nbler = lots\n").find("env.bler") != std::string::npos);
  CHECK(message("[env]\nbler = 1.5\n").find("bler") != std::string::npos);
  CHECK(message("[train]\nmethod = sarsa\n").find("sarsa") != std::string::npos);
  CHECK(message("[nonsense]\nx = 1\n").find("nonsense") != std::string::npos);
  CHECK(message("[train]\nshare_policy = maybe\n").find("share_policy") != std::string::npos);
  CHECK_FALSE(message("[train]\nseeds =\n").empty());
}

TEST_CASE("overrides and the printed config") {
  TrainConfig c;
  apply_override(c, "train.n_round=2");
  apply_override(c, "env.bler=0.25");
  CHECK(c.n_round == 2);
  CHECK(c.env.bler == 0.25);
  CHECK_THROWS_AS(apply_override(c, "n_round=2"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.lr=-1"), ConfigError);
  CHECK(c.lr == 1e-4);
  c.seeds = {1, 9};
  c.value_scale = 4.5;
  c.share_policy = true;
  const auto back = parse(format_config(c));
  CHECK(format_config(back) == format_config(c));
  CHECK(back.seeds == c.seeds);
  CHECK(back.value_scale == 4.5);
  CHECK(back.env.bler == 0.25);
}

TEST_CASE("episode budgets") {
  TrainConfig c;
  CHECK(c.epochs() == 50);
  CHECK(c.episode_budget() == 1000);
  c.total_episodes = 1024;
  CHECK(c.epochs() == 52);
  CHECK(c.episodes_in_epoch(0) == 20);
  CHECK(c.episodes_in_epoch(51) == 4);
  CHECK(c.episode_budget() == 1024);
  c.total_episodes = 4096;
  CHECK(c.epochs() == 205);
  CHECK(c.episodes_in_epoch(204) == 16);
}

TEST_CASE("metrics csv round trip keeps nan") {
  MetricsTrace t{rec(1, 30, -16), rec(2, 61, -7.25)};
  t[0].model_loss = std::numeric_limits<double>::quiet_NaN();
  t[1].model_loss = 0.1234567890123456789;
  t[1].synthetic_transitions = 1200;
  std::stringstream s;
  write_metrics_csv(s, t);
  CHECK(s.str().rfind("epoch,real_env_steps,eval_mean_reward,eval_std,model_loss,", 0) == 0);
  const auto back = read_metrics_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(std::isnan(back[0].model_loss));
  CHECK(back[1].model_loss == t[1].model_loss);
  CHECK(back[1].synthetic_transitions == 1200);
  CHECK(back[1].eval_mean_reward == -7.25);
}

TEST_CASE("averaging traces over seeds") {
  MetricsTrace a{rec(1, 10, -16)}, b{rec(1, 20, -8)};
  a[0].model_loss = std::numeric_limits<double>::quiet_NaN();
  b[0].model_loss = 2.0;
  const auto m = average_traces({a, b});
  CHECK(m[0].eval_mean_reward == -12);
  CHECK(m[0].real_env_steps == 15);
  CHECK(m[0].model_loss == 2.0);
  CHECK_THROWS(average_traces({a, {rec(1, 1, 1), rec(2, 2, 2)}}));
}

TEST_CASE("threshold, early area and summary") {
  const MetricsTrace t{rec(1, 100, -16), rec(2, 200, -10), rec(3, 300, -6.5), rec(4, 400, -6)};
  CHECK(slots_saved_fraction(-6, -6, 16) == 1.0);
  CHECK(slots_saved_fraction(-16, -6, 16) == 0.0);
  CHECK(samples_to_threshold(t, 0.95, -6, 16) == 300);
  CHECK(samples_to_threshold(t, 1.0, -6, 16) == 400);
  CHECK_FALSE(samples_to_threshold(t, 1.0, -5, 16).has_value());
  CHECK(best_reward({&t}) == -6);
  CHECK(early_area(t, 0.5) == doctest::Approx(-13.0));
  CHECK(early_area(t, 1.0) == doctest::Approx((-13.0 - 8.25 - 6.25) / 3.0));
  CHECK(early_area(t, 0.1) == -16);

  std::vector<MethodSummary> ms{{"causal-mbrl", 300, -6, -6, 400}, {"tabular-q", 1000, -7, -6.5, 2000}};
  auto doc = nlohmann::json::parse(summary_json(ms, 0.95, -6, 16, {{"episodes", "1024"}}));
  CHECK(doc["efficiency"].get<double>() == doctest::Approx(0.7));
  CHECK(doc["setup"]["episodes"] == "1024");
  CHECK(doc["methods"][0]["samples_to_threshold"] == 300);
  CHECK_FALSE(doc.contains("efficiency_lower_bound"));
  ms[1].samples_to_threshold.reset();
  doc = nlohmann::json::parse(summary_json(ms, 0.95, -6, 16, {}));
  CHECK(doc["methods"][1]["samples_to_threshold"] == "not reached");
  CHECK(doc["efficiency"].is_null());
  CHECK(doc["efficiency_lower_bound"].get<double>() == doctest::Approx(1.0 - 300.0 / 2000.0));
}

TEST_CASE("sample-complexity ratio spot values") {
  CHECK(theorem1_ratio(4, 2, 4) == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(theorem1_ratio(10, 3, 4) == doctest::Approx(7.29).epsilon(1e-12));
  CHECK(theorem1_log_ratio(10, 3, 4) == doctest::Approx(6 * std::log(3.0) - 2 * std::log(10.0)));
  CHECK_THROWS_AS(theorem1_ratio(4, 2, 5), ContractViolation);
  CHECK_THROWS_AS(theorem1_ratio(4, 1, 2), ContractViolation);
  // f(n + 1) / f(n) = v n^2 / (n + 1)^2 >= 1 once n >= 3 for every v >= 2
  for (double v : {2.0, 3.0, 7.5}) {
    for (double d : {0.0, 2.0, 3.0}) {
      for (double n = std::max(3.0, d); n < 60; ++n) CHECK(theorem1_ratio(n + 1, v, d) > theorem1_ratio(n, v, d));
    }
  }
}

TEST_CASE("one epoch runs every phase the configured number of times") {
  SeedRun run(tiny(Method::CausalMbrl), 7);
  const auto r = run.run_epoch();
  CHECK(run.episodes_collected() == 20);
  CHECK(run.model_updates() == 1);
  CHECK(run.ppo_rounds() == 4);
  CHECK(r.epoch == 1);
  CHECK(r.real_env_steps == static_cast<long>(run.buffer().size()));
  CHECK(r.synthetic_transitions > 0);
  CHECK(r.synthetic_transitions <= 4L * 4 * 6);
  CHECK_FALSE(std::isnan(r.model_loss));
  CHECK(r.eval_mean_reward <= -1.0);
  CHECK(r.eval_mean_reward >= -16.0);

  auto cfg = tiny(Method::CausalMbrl);
  cfg.n_graph = 2;
  SeedRun every_other(cfg, 7);
  every_other.run_epoch();
  every_other.run_epoch();
  CHECK(every_other.model_updates() == 1);
  CHECK(every_other.finished());
  CHECK_THROWS_AS(every_other.run_epoch(), UsageError);
}

TEST_CASE("runs are reproducible per seed") {
  for (Method m : {Method::CausalMbrl, Method::TabularQ, Method::Predefined}) {
    CAPTURE(method_name(m));
    const auto cfg = tiny(m);
    const auto a = train_seed(cfg, 7), b = train_seed(cfg, 7);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].real_env_steps == b[i].real_env_steps);
      CHECK(a[i].eval_mean_reward == b[i].eval_mean_reward);
    }
  }
  auto cfg = tiny(Method::TabularQ);
  cfg.seeds = {1, 2, 3};
  const auto serial = train_all_seeds(cfg);
  cfg.threads = 3;
  const auto parallel = train_all_seeds(cfg);
  for (std::size_t s = 0; s < 3; ++s) CHECK(serial[s].back().eval_mean_reward == parallel[s].back().eval_mean_reward);
}

TEST_CASE("the predefined policy scores the same every epoch") {
  auto cfg = tiny(Method::Predefined);
  cfg.env.bler = 0.0;
  const auto t = train_seed(cfg, 3);
  CHECK(t[0].eval_mean_reward == -5.0);
  CHECK(t[1].eval_mean_reward == -5.0);
  CHECK(std::isnan(t[0].policy_loss));
}
