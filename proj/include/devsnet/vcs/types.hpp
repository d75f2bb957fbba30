#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "devsnet/core/time.hpp"
#include "devsnet/manet/packet.hpp"
#include "devsnet/manet/routing_table.hpp"

namespace devsnet::vcs {

using manet::NodeId;

enum class Mode { execution, emulation, simulation };
enum class StackAbstraction { full_stack, direct_route };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::execution: return "execution";
    case Mode::emulation: return "emulation";
    case Mode::simulation: return "simulation";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "execution") return Mode::execution;
  if (s == "emulation") return Mode::emulation;
  if (s == "simulation") return Mode::simulation;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

inline std::string_view to_string(StackAbstraction s) {
  return s == StackAbstraction::full_stack ? "full_stack" : "direct_route";
}

inline StackAbstraction parse_stack(std::string_view s) {
  if (s == "full_stack") return StackAbstraction::full_stack;
  if (s == "direct_route") return StackAbstraction::direct_route;
  throw std::invalid_argument("unknown stack abstraction '" + std::string(s) + "'");
}

class VcsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VirtualSocket {
  std::uint32_t socket_id = 0;
  NodeId node_id = 0;
  std::uint16_t port = 0;
  Mode mode = Mode::simulation;

  bool operator==(const VirtualSocket&) const = default;
};

struct Datagram {
  NodeId src_node = 0;
  std::uint16_t src_port = 0;
  Bytes payload;

  bool operator==(const Datagram&) const = default;
};

struct SendReceipt {
  std::uint32_t seq = 0;
  std::size_t bytes = 0;
};

/// What the VCS of one node observed: an application send or receive, or a
/// change of the routing table.
struct VcsEvent {
  enum class Kind { send, receive, routing_update };

  Kind kind = Kind::send;
  std::optional<std::uint32_t> socket;
  std::optional<manet::Packet> packet;
  std::optional<manet::RoutingTableEntry> route_change;
  SimTime time;

  /// Exactly the fields required by the kind are present.
  bool well_formed() const {
    if (kind == Kind::routing_update) return route_change.has_value() && !packet.has_value();
    return packet.has_value() && !route_change.has_value();
  }
};

inline std::string_view to_string(VcsEvent::Kind k) {
  switch (k) {
    case VcsEvent::Kind::send: return "send";
    case VcsEvent::Kind::receive: return "receive";
    case VcsEvent::Kind::routing_update: return "routing_update";
  }
  return "?";
}

/// Packet view of an application record as it enters or leaves a node.
inline manet::Packet app_packet(const manet::AppRecord& rec, const Bytes& encoded, SimTime at) {
  manet::Packet p;
  p.src = rec.src;
  p.dst = rec.dst;
  p.target = rec.dst;
  p.seq = rec.seq;
  p.kind = manet::PacketKind::data;
  p.payload_len = static_cast<std::uint32_t>(encoded.size());
  p.created = at;
  p.tx = rec.src;
  p.body = encoded;
  return p;
}

}  // namespace devsnet::vcs
