// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cmbrl::experiment {

struct MetricsRecord {
  int epoch = 0;                // 1-based
  long real_env_steps = 0;      // cumulative Phase-1 slots
  double eval_mean_reward = 0.0;
  double eval_std = 0.0;
  double model_loss = 0.0;      // NaN when the model was not trained
  double mean_ratio = 0.0;      // PPO diagnostics, NaN without PPO
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  long synthetic_transitions = 0;

  bool operator==(const MetricsRecord&) const = default;
};

using MetricsTrace = std::vector<MetricsRecord>;

/// Header, in this order:
///   epoch,real_env_steps,eval_mean_reward,eval_std,model_loss,
///   mean_ratio,clip_fraction,policy_loss,value_loss,synthetic_transitions
/// Reals are written with 17 significant digits, NaN as "nan".
void write_metrics_csv(std::ostream& out, const MetricsTrace& trace);
MetricsTrace read_metrics_csv(std::istream& in);

/// Epoch-wise mean over seeds. Traces must have equal length; NaN fields
/// stay NaN only when every seed is NaN.
MetricsTrace average_traces(const std::vector<MetricsTrace>& traces);

/// Fraction of the "slots saved" scale reached by reward r:
/// (r + T_max) / (r_best + T_max).
double slots_saved_fraction(double reward, double best_reward, int max_steps);

/// Real steps at the first epoch whose eval reward reaches `fraction` of
/// `best_reward` on the slots-saved scale; nullopt if never reached.
std::optional<long> samples_to_threshold(const MetricsTrace& trace, double fraction, double best_reward,
                                         int max_steps);

/// Best eval_mean_reward over the given traces.
double best_reward(const std::vector<const MetricsTrace*>& traces);

/// Normalized trapezoid area under eval_mean_reward over the epochs whose
/// cumulative episode index lies in the first `fraction` of the run.
double early_area(const MetricsTrace& trace, double fraction);

/// V_max^(|V| - d_in) / |V|^2, computed as exp of its logarithm.
double theorem1_ratio(double num_vars, double v_max, double d_in);
double theorem1_log_ratio(double num_vars, double v_max, double d_in);

struct MethodSummary {
  std::string method;
  std::optional<long> samples_to_threshold;
  double final_eval_mean = 0.0;
  double best_eval_mean = 0.0;
  long total_real_steps = 0;
};

/// JSON document with per-method summaries, the threshold definition and,
/// when both are present and reached, efficiency = 1 - steps(mbrl) / steps(q).
/// If only MBRL reaches the threshold, efficiency_lower_bound uses Q's total
/// real steps in place of steps(q).
std::string summary_json(const std::vector<MethodSummary>& methods, double fraction, double target_reward,
                         int max_steps, const std::map<std::string, std::string>& setup);

}  // namespace cmbrl::experiment
