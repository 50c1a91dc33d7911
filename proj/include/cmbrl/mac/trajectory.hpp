// SPDX-License-Identifier: Apache-2.0
//
// Trajectory dumps: one transition per line, whitespace-separated
// `key=value` fields in this fixed order
//
//   t=<slot> buffers=<b1,..,bU> gobs=<o_b> decisions=<n1:a1,..,nU:aU>
//   dcms=<m1,..,mU> reward=<decimal> next_buffers=<..> next_gobs=<o_b>
//   done=<0|1> synthetic=<0|1>
//
// Symbols are the integer codes of the protocol enumerations.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cmbrl/mac/env.hpp"

namespace cmbrl::mac {

struct TrajectoryRecord {
  int t = 0;
  std::vector<int> buffers;
  int gateway_obs = 0;
  std::vector<Decision> decisions;
  std::vector<DownlinkControl> dcms;
  double reward = 0.0;
  std::vector<int> next_buffers;
  int next_gateway_obs = 0;
  bool done = false;
  bool synthetic = false;

  bool operator==(const TrajectoryRecord&) const = default;
};

TrajectoryRecord to_record(const Transition& tr);
std::string format_record(const TrajectoryRecord& record);
/// Throws ContractViolation on malformed lines.
TrajectoryRecord parse_record(const std::string& line);

void write_trajectory(std::ostream& out, const std::vector<Transition>& transitions);

}  // namespace cmbrl::mac
