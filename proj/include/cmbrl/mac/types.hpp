// SPDX-License-Identifier: Apache-2.0
//
// Protocol alphabets and per-slot records of the multi-node TDMA uplink.
#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace cmbrl::mac {

enum class NodeAction : std::uint8_t { Idle = 0, Transmit = 1, DeleteOldest = 2 };
enum class UplinkControl : std::uint8_t { NoRequest = 0, SchedulingRequest = 1 };
enum class DownlinkControl : std::uint8_t { Null = 0, Grant = 1, Ack = 2 };

inline constexpr int kNumActions = 3;
inline constexpr int kNumUplinkControls = 2;
inline constexpr int kNumDownlinkControls = 3;
inline constexpr int kNumDecisions = kNumActions * kNumUplinkControls;

/// Combined per-slot decision of one node: control message plus channel action.
///
/// The joint index used by tabular agents is `ucm * 3 + action`, so indices
/// 0..2 carry no request and 3..5 carry a scheduling request.
struct Decision {
  UplinkControl ucm = UplinkControl::NoRequest;
  NodeAction action = NodeAction::Idle;

  int index() const { return static_cast<int>(ucm) * kNumActions + static_cast<int>(action); }
  static Decision from_index(int index);

  auto operator<=>(const Decision&) const = default;
};

/// One slot of a node's history: buffer count at the start of the slot, the
/// decision taken in it and the downlink message the gateway issued in it.
/// `pad` marks pre-episode history; all other fields are then zero.
struct NodeRecord {
  bool pad = true;
  int buffer = 0;
  Decision decision{};
  DownlinkControl dcm = DownlinkControl::Null;

  bool operator==(const NodeRecord&) const = default;
};

/// One slot of the gateway's history: its channel observation, the uplink
/// control messages of every node and the downlink messages it sent.
struct GatewayRecord {
  bool pad = true;
  int observation = 0;
  std::vector<UplinkControl> ucms;
  std::vector<DownlinkControl> dcms;

  bool operator==(const GatewayRecord&) const = default;
};

/// Windows hold exactly N records, index 0 is the most recent slot.
using NodeWindow = std::vector<NodeRecord>;
using GatewayWindow = std::vector<GatewayRecord>;

}  // namespace cmbrl::mac
