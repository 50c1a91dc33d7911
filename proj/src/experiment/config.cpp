// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/experiment/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl::experiment {

namespace pt = boost::property_tree;

std::string method_name(Method m) {
  switch (m) {
    case Method::CausalMbrl: return "causal-mbrl";
    case Method::TabularQ: return "tabular-q";
    case Method::Predefined: return "predefined";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "causal-mbrl") return Method::CausalMbrl;
  if (name == "tabular-q") return Method::TabularQ;
  if (name == "predefined") return Method::Predefined;
  throw ConfigError("unknown method '" + name + "' (expected causal-mbrl, tabular-q or predefined)");
}

int default_history_window(int num_nodes) { return num_nodes <= 1 ? 1 : 3; }

void TrainConfig::validate() const {
  env.validate();
  auto positive = [](bool ok, const char* field) {
    if (!ok) throw ConfigError(std::string("train.") + field + " must be positive");
  };
  positive(n_epoch > 0 || total_episodes > 0, "n_epoch");
  positive(total_episodes >= 0, "total_episodes");
  positive(episodes_per_epoch > 0, "episodes_per_epoch");
  positive(n_graph > 0, "n_graph");
  positive(n_round >= 0, "n_round");
  positive(k_rollout > 0, "k_rollout");
  positive(n_rollout >= 0, "n_rollout");
  positive(n_model >= 0, "n_model");
  positive(n_ppo >= 0, "n_ppo");
  positive(batch_size > 0, "batch_size");
  positive(lr > 0.0, "lr");
  positive(model_lr > 0.0, "model_lr");
  positive(eval_episodes > 0, "eval_episodes");
  positive(threads > 0, "threads");
  positive(ppo_minibatches >= 0, "ppo_minibatches");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("train.gae_lambda must lie in [0, 1]");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("train.clip_eps must lie in (0, 1)");
  if (l2_lambda < 0.0) throw ConfigError("train.l2_lambda must be nonnegative");
  if (entropy_coef < 0.0) throw ConfigError("train.entropy_coef must be nonnegative");
  if (value_scale < 0.0) throw ConfigError("train.value_scale must be nonnegative");
  if (seeds.empty()) throw ConfigError("train.seeds must list at least one seed");
  if (model.embed == 0 || model.value == 0 || model.query == 0 || model.gru_hidden == 0 ||
      model.decoder_hidden == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (!(model.init_std > 0.0)) throw ConfigError("model.init_std must be positive");
  const auto& q = qlearning;
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) throw ConfigError("qlearning.alpha must lie in [0, 1]");
  if (!(q.epsilon_start >= 0.0 && q.epsilon_start <= 1.0 && q.epsilon_end >= 0.0 && q.epsilon_end <= 1.0)) {
    throw ConfigError("qlearning epsilons must lie in [0, 1]");
  }
  if (!(q.anneal_fraction >= 0.0 && q.anneal_fraction <= 1.0)) {
    throw ConfigError("qlearning.anneal_fraction must lie in [0, 1]");
  }
}

int TrainConfig::epochs() const {
  if (total_episodes > 0) {
    return static_cast<int>((total_episodes + episodes_per_epoch - 1) / episodes_per_epoch);
  }
  return n_epoch;
}

int TrainConfig::episodes_in_epoch(int epoch) const {
  if (total_episodes <= 0) return episodes_per_epoch;
  const long done = static_cast<long>(epoch) * episodes_per_epoch;
  return static_cast<int>(std::min<long>(episodes_per_epoch, total_episodes - done));
}

long TrainConfig::episode_budget() const {
  return total_episodes > 0 ? total_episodes : static_cast<long>(n_epoch) * episodes_per_epoch;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || text.empty()) {
    throw ConfigError("cannot parse '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("cannot parse '" + text + "' for " + key + " (expected true or false)");
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in " + key);
    out.push_back(parse_number<std::uint64_t>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const TrainConfig&)>;
struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field number_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename S, typename T>
Field nested_number(S TrainConfig::*outer, T S::*member) {
  return {[outer, member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*outer.*member = parse_number<T>(k, v);
          },
          [outer, member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*outer.*member);
            else return std::to_string(c.*outer.*member);
          }};
}

template <typename S>
Field nested_bool(S TrainConfig::*outer, bool S::*member) {
  return {[outer, member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*outer.*member = parse_bool(k, v);
          },
          [outer, member](const TrainConfig& c) { return std::string(c.*outer.*member ? "true" : "false"); }};
}

const std::map<std::string, std::map<std::string, Field>>& schema() {
  static const std::map<std::string, std::map<std::string, Field>> s = [] {
    using C = TrainConfig;
    std::map<std::string, std::map<std::string, Field>> m;
    auto& env = m["env"];
    env["num_nodes"] = nested_number(&C::env, &mac::EnvConfig::num_nodes);
    env["buffer_capacity"] = nested_number(&C::env, &mac::EnvConfig::buffer_capacity);
    env["max_steps"] = nested_number(&C::env, &mac::EnvConfig::max_steps);
    env["bler"] = nested_number(&C::env, &mac::EnvConfig::bler);
    env["history_window"] = nested_number(&C::env, &mac::EnvConfig::history_window);
    env["erased_looks_idle"] = nested_bool(&C::env, &mac::EnvConfig::erased_looks_idle);
    env["arrival_rate"] = nested_number(&C::env, &mac::EnvConfig::arrival_rate);
    env["require_delivery"] = nested_bool(&C::env, &mac::EnvConfig::require_delivery);

    auto& tr = m["train"];
    tr["method"] = {[](C& c, const std::string&, const std::string& v) { c.method = parse_method(v); },
                    [](const C& c) { return method_name(c.method); }};
    tr["n_epoch"] = number_field(&C::n_epoch);
    tr["total_episodes"] = number_field(&C::total_episodes);
    tr["episodes_per_epoch"] = number_field(&C::episodes_per_epoch);
    tr["n_graph"] = number_field(&C::n_graph);
    tr["n_round"] = number_field(&C::n_round);
    tr["k_rollout"] = number_field(&C::k_rollout);
    tr["n_rollout"] = number_field(&C::n_rollout);
    tr["n_model"] = number_field(&C::n_model);
    tr["n_ppo"] = number_field(&C::n_ppo);
    tr["batch_size"] = number_field(&C::batch_size);
    tr["lr"] = number_field(&C::lr);
    tr["model_lr"] = number_field(&C::model_lr);
    tr["gamma"] = number_field(&C::gamma);
    tr["gae_lambda"] = number_field(&C::gae_lambda);
    tr["clip_eps"] = number_field(&C::clip_eps);
    tr["entropy_coef"] = number_field(&C::entropy_coef);
    tr["value_scale"] = number_field(&C::value_scale);
    tr["l2_lambda"] = number_field(&C::l2_lambda);
    tr["ppo_minibatches"] = number_field(&C::ppo_minibatches);
    tr["ppo_real_window"] = number_field(&C::ppo_real_window);
    tr["real_buffer_capacity"] = number_field(&C::real_buffer_capacity);
    tr["share_policy"] = {[](C& c, const std::string& k, const std::string& v) { c.share_policy = parse_bool(k, v); },
                          [](const C& c) { return std::string(c.share_policy ? "true" : "false"); }};
    tr["eval_episodes"] = number_field(&C::eval_episodes);
    tr["seeds"] = {[](C& c, const std::string& k, const std::string& v) { c.seeds = parse_seeds(k, v); },
                   [](const C& c) { return join_seeds(c.seeds); }};
    tr["threads"] = number_field(&C::threads);

    auto& md = m["model"];
    md["embed"] = nested_number(&C::model, &causal::ModelDims::embed);
    md["value"] = nested_number(&C::model, &causal::ModelDims::value);
    md["query"] = nested_number(&C::model, &causal::ModelDims::query);
    md["gru_hidden"] = nested_number(&C::model, &causal::ModelDims::gru_hidden);
    md["decoder_hidden"] = nested_number(&C::model, &causal::ModelDims::decoder_hidden);
    md["init_std"] = nested_number(&C::model, &causal::ModelDims::init_std);

    auto& q = m["qlearning"];
    q["alpha"] = nested_number(&C::qlearning, &baselines::QLearningConfig::alpha);
    q["gamma"] = nested_number(&C::qlearning, &baselines::QLearningConfig::gamma);
    q["epsilon_start"] = nested_number(&C::qlearning, &baselines::QLearningConfig::epsilon_start);
    q["epsilon_end"] = nested_number(&C::qlearning, &baselines::QLearningConfig::epsilon_end);
    q["anneal_fraction"] = nested_number(&C::qlearning, &baselines::QLearningConfig::anneal_fraction);
    return m;
  }();
  return s;
}

void set_field(TrainConfig& config, const std::string& section, const std::string& key, const std::string& value) {
  const auto& s = schema();
  auto sec = s.find(section);
  if (sec == s.end()) throw ConfigError("unknown section [" + section + "]");
  auto f = sec->second.find(key);
  if (f == sec->second.end()) throw ConfigError("unknown key " + section + "." + key);
  f->second.set(config, section + "." + key, value);
}

TrainConfig finish(TrainConfig c, bool history_given) {
  if (!history_given) c.env.history_window = default_history_window(c.env.num_nodes);
  c.validate();
  return c;
}

}  // namespace

TrainConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  TrainConfig c;
  bool history_given = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' outside of any section");
    }
    for (const auto& [key, value] : body) {
      set_field(c, section, key, value.data());
      if (section == "env" && key == "history_window") history_given = true;
    }
  }
  return finish(c, history_given);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  TrainConfig changed = config;
  set_field(changed, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1), assignment.substr(eq + 1));
  changed.validate();
  config = std::move(changed);
}

std::string format_config(const TrainConfig& config) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, fields] : schema()) {
    out << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& [key, field] : fields) out << key << " = " << field.get(config) << '\n';
  }
  return out.str();
}

}  // namespace cmbrl::experiment
