// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/mac/trajectory.hpp"

#include <charconv>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl::mac {

namespace {

template <class T, class F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  if (s.empty()) return parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

int to_int(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ContractViolation("trajectory record: bad integer '" + s + "'");
  }
  return v;
}

std::vector<int> to_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split(s, ',')) out.push_back(to_int(p));
  return out;
}

}  // namespace

TrajectoryRecord to_record(const Transition& tr) {
  TrajectoryRecord r;
  r.t = tr.before.t;
  r.buffers = tr.before.buffers;
  r.gateway_obs = tr.before.gateway_obs;
  r.decisions = tr.decisions;
  r.dcms = tr.dcms;
  r.reward = tr.reward;
  r.next_buffers = tr.next.buffers;
  r.next_gateway_obs = tr.next.gateway_obs;
  r.done = tr.done;
  r.synthetic = tr.synthetic;
  return r;
}

std::string format_record(const TrajectoryRecord& r) {
  auto num = [](int v) { return std::to_string(v); };
  std::ostringstream reward;
  reward << std::setprecision(17) << r.reward;
  std::ostringstream line;
  line << "t=" << r.t << " buffers=" << join(r.buffers, num) << " gobs=" << r.gateway_obs
       << " decisions="
       << join(r.decisions,
               [](const Decision& d) {
                 return std::to_string(static_cast<int>(d.ucm)) + ":" +
                        std::to_string(static_cast<int>(d.action));
               })
       << " dcms=" << join(r.dcms, [](DownlinkControl m) { return std::to_string(static_cast<int>(m)); })
       << " reward=" << reward.str() << " next_buffers=" << join(r.next_buffers, num)
       << " next_gobs=" << r.next_gateway_obs << " done=" << (r.done ? 1 : 0)
       << " synthetic=" << (r.synthetic ? 1 : 0);
  return line.str();
}

TrajectoryRecord parse_record(const std::string& line) {
  static const char* const kKeys[] = {"t",     "buffers",      "gobs",      "decisions", "dcms",
                                      "reward", "next_buffers", "next_gobs", "done",      "synthetic"};
  std::istringstream in(line);
  std::string field;
  TrajectoryRecord r;
  std::size_t i = 0;
  while (in >> field) {
    if (i >= std::size(kKeys)) throw ContractViolation("trajectory record: too many fields");
    const auto eq = field.find('=');
    if (eq == std::string::npos || field.substr(0, eq) != kKeys[i]) {
      throw ContractViolation("trajectory record: expected field '" + std::string(kKeys[i]) + "'");
    }
    const std::string value = field.substr(eq + 1);
    switch (i) {
      case 0: r.t = to_int(value); break;
      case 1: r.buffers = to_ints(value); break;
      case 2: r.gateway_obs = to_int(value); break;
      case 3:
        for (const auto& p : split(value, ',')) {
          const auto c = p.find(':');
          if (c == std::string::npos) throw ContractViolation("trajectory record: bad decision");
          r.decisions.push_back(Decision{static_cast<UplinkControl>(to_int(p.substr(0, c))),
                                         static_cast<NodeAction>(to_int(p.substr(c + 1)))});
        }
        break;
      case 4:
        for (int m : to_ints(value)) r.dcms.push_back(static_cast<DownlinkControl>(m));
        break;
      case 5: r.reward = std::stod(value); break;
      case 6: r.next_buffers = to_ints(value); break;
      case 7: r.next_gateway_obs = to_int(value); break;
      case 8: r.done = to_int(value) != 0; break;
      case 9: r.synthetic = to_int(value) != 0; break;
    }
    ++i;
  }
  if (i != std::size(kKeys)) throw ContractViolation("trajectory record: missing fields");
  return r;
}

void write_trajectory(std::ostream& out, const std::vector<Transition>& transitions) {
  for (const auto& tr : transitions) out << format_record(to_record(tr)) << '\n';
}

}  // namespace cmbrl::mac
