// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/experiment/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cmbrl/errors.hpp"
#include "json.hpp"

namespace cmbrl::experiment {

namespace {

constexpr const char* kHeader =
    "epoch,real_env_steps,eval_mean_reward,eval_std,model_loss,mean_ratio,clip_fraction,policy_loss,"
    "value_loss,synthetic_transitions";

std::string real(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "' in metrics CSV");
  return v;
}

long parse_long(const std::string& s) {
  std::size_t used = 0;
  const long v = std::stol(s, &used);
  if (used != s.size()) throw std::runtime_error("bad integer '" + s + "' in metrics CSV");
  return v;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsTrace& trace) {
  out << kHeader << '\n';
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.real_env_steps << ',' << real(r.eval_mean_reward) << ',' << real(r.eval_std) << ','
        << real(r.model_loss) << ',' << real(r.mean_ratio) << ',' << real(r.clip_fraction) << ','
        << real(r.policy_loss) << ',' << real(r.value_loss) << ',' << r.synthetic_transitions << '\n';
  }
}

MetricsTrace read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("metrics CSV header mismatch");
  MetricsTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error("metrics CSV row has " + std::to_string(f.size()) + " fields");
    MetricsRecord r;
    r.epoch = static_cast<int>(parse_long(f[0]));
    r.real_env_steps = parse_long(f[1]);
    r.eval_mean_reward = parse_real(f[2]);
    r.eval_std = parse_real(f[3]);
    r.model_loss = parse_real(f[4]);
    r.mean_ratio = parse_real(f[5]);
    r.clip_fraction = parse_real(f[6]);
    r.policy_loss = parse_real(f[7]);
    r.value_loss = parse_real(f[8]);
    r.synthetic_transitions = parse_long(f[9]);
    trace.push_back(r);
  }
  return trace;
}

MetricsTrace average_traces(const std::vector<MetricsTrace>& traces) {
  if (traces.empty()) return {};
  const std::size_t len = traces.front().size();
  for (const auto& t : traces) {
    if (t.size() != len) throw ContractViolation("cannot average traces of different lengths");
  }
  auto avg = [&](std::size_t i, auto field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& t : traces) {
      const double v = static_cast<double>(t[i].*field);
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  };
  MetricsTrace out(len);
  for (std::size_t i = 0; i < len; ++i) {
    auto& r = out[i];
    r.epoch = traces.front()[i].epoch;
    r.real_env_steps = std::lround(avg(i, &MetricsRecord::real_env_steps));
    r.eval_mean_reward = avg(i, &MetricsRecord::eval_mean_reward);
    r.eval_std = avg(i, &MetricsRecord::eval_std);
    r.model_loss = avg(i, &MetricsRecord::model_loss);
    r.mean_ratio = avg(i, &MetricsRecord::mean_ratio);
    r.clip_fraction = avg(i, &MetricsRecord::clip_fraction);
    r.policy_loss = avg(i, &MetricsRecord::policy_loss);
    r.value_loss = avg(i, &MetricsRecord::value_loss);
    r.synthetic_transitions = std::lround(avg(i, &MetricsRecord::synthetic_transitions));
  }
  return out;
}

double slots_saved_fraction(double reward, double best, int max_steps) {
  const double denom = best + max_steps;
  if (denom <= 0.0) return reward + max_steps >= 0.0 ? 1.0 : 0.0;
  return (reward + max_steps) / denom;
}

std::optional<long> samples_to_threshold(const MetricsTrace& trace, double fraction, double best, int max_steps) {
  for (const auto& r : trace) {
    // A hair of slack absorbs rounding when a trace sits exactly on the target.
    if (slots_saved_fraction(r.eval_mean_reward, best, max_steps) >= fraction - 1e-12) return r.real_env_steps;
  }
  return std::nullopt;
}

double best_reward(const std::vector<const MetricsTrace*>& traces) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto* t : traces) {
    for (const auto& r : *t) best = std::max(best, r.eval_mean_reward);
  }
  return best;
}

double early_area(const MetricsTrace& trace, double fraction) {
  if (trace.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(trace.size()))));
  if (n == 1) return trace.front().eval_mean_reward;
  double area = 0.0;
  for (std::size_t i = 1; i < n; ++i) area += 0.5 * (trace[i - 1].eval_mean_reward + trace[i].eval_mean_reward);
  return area / static_cast<double>(n - 1);
}

double theorem1_log_ratio(double num_vars, double v_max, double d_in) {
  if (!(num_vars >= 1.0)) throw ContractViolation("theorem1: need at least one variable");
  if (!(v_max >= 2.0)) throw ContractViolation("theorem1: maximum support must be at least 2");
  if (!(d_in >= 0.0 && d_in <= num_vars)) throw ContractViolation("theorem1: need 0 <= d_in <= |V|");
  return (num_vars - d_in) * std::log(v_max) - 2.0 * std::log(num_vars);
}

double theorem1_ratio(double num_vars, double v_max, double d_in) {
  return std::exp(theorem1_log_ratio(num_vars, v_max, d_in));
}

std::string summary_json(const std::vector<MethodSummary>& methods, double fraction, double target_reward,
                         int max_steps, const std::map<std::string, std::string>& setup) {
  using nlohmann::json;
  json doc;
  doc["threshold"] = {
      {"fraction", fraction},
      {"target_reward", target_reward},
      {"max_steps", max_steps},
      {"definition",
       "first epoch with (R + T_max) / (R_target + T_max) >= fraction, R_target = best seed-averaged "
       "eval reward of any method"},
  };
  doc["setup"] = setup;
  json list = json::array();
  std::optional<long> mbrl, q;
  long q_total = 0;
  for (const auto& m : methods) {
    json e;
    e["method"] = m.method;
    e["samples_to_threshold"] = m.samples_to_threshold ? json(*m.samples_to_threshold) : json("not reached");
    e["final_eval_mean"] = m.final_eval_mean;
    e["best_eval_mean"] = m.best_eval_mean;
    e["total_real_steps"] = m.total_real_steps;
    list.push_back(e);
    if (m.method == "causal-mbrl") mbrl = m.samples_to_threshold;
    if (m.method == "tabular-q") {
      q = m.samples_to_threshold;
      q_total = m.total_real_steps;
    }
  }
  doc["methods"] = list;
  if (mbrl && q && *q > 0) {
    doc["efficiency"] = 1.0 - static_cast<double>(*mbrl) / static_cast<double>(*q);
  } else {
    doc["efficiency"] = nullptr;
  }
  // Q needs more than its whole budget when it never gets there.
  if (mbrl && !q && q_total > 0) {
    doc["efficiency_lower_bound"] = 1.0 - static_cast<double>(*mbrl) / static_cast<double>(q_total);
  }
  return doc.dump(2);
}

}  // namespace cmbrl::experiment
