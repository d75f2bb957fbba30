#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "devsnet/core/bytes.hpp"
#include "devsnet/core/time.hpp"
#include "devsnet/manet/node.hpp"

namespace devsnet::manet {

/// Schema tags carried on MANET model ports.
namespace schema {
inline constexpr std::string_view packet = "manet.packet";
inline constexpr std::string_view frame = "manet.frame";
inline constexpr std::string_view app_record = "manet.app_record";
inline constexpr std::string_view send_request = "manet.send_request";
inline constexpr std::string_view position = "manet.position";
inline constexpr std::string_view control = "manet.control";
inline constexpr std::string_view route = "manet.route";
}  // namespace schema

enum class PacketKind : std::uint8_t { data = 0, rreq = 1, rrep = 2, rerr = 3 };

inline std::string_view to_string(PacketKind k) {
  switch (k) {
    case PacketKind::data: return "data";
    case PacketKind::rreq: return "rreq";
    case PacketKind::rrep: return "rrep";
    case PacketKind::rerr: return "rerr";
  }
  return "?";
}

inline bool is_broadcast_kind(PacketKind k) { return k == PacketKind::rreq || k == PacketKind::rerr; }

/// Network-layer packet. `src`/`dst` are the end points of the whole journey
/// (an RREP goes from the replying node to the originator); `tx`/`next_hop`
/// describe the current hop. `target` is the destination a route request or
/// reply is about.
struct Packet {
  NodeId src = 0;
  NodeId dst = 0;
  NodeId target = 0;
  std::uint32_t seq = 0;
  PacketKind kind = PacketKind::data;
  std::uint8_t ttl = 32;
  std::uint32_t payload_len = 0;
  SimTime created;

  NodeId tx = 0;
  NodeId next_hop = kBroadcast;

  std::uint32_t hop_count = 0;
  std::uint32_t origin_seq = 0;
  std::uint32_t dest_seq = 0;
  bool dest_seq_known = false;
  /// RERR: (destination, sequence number) pairs now unreachable.
  std::vector<std::pair<NodeId, std::uint32_t>> unreachable;
  /// DATA: encoded AppRecord.
  Bytes body;

  bool operator==(const Packet&) const = default;
};

/// On-air size of control packets, following the usual AODV message sizes.
inline std::uint32_t control_size(PacketKind k, std::size_t unreachable = 0) {
  switch (k) {
    case PacketKind::rreq: return 24;
    case PacketKind::rrep: return 20;
    case PacketKind::rerr: return static_cast<std::uint32_t>(4 + 8 * unreachable);
    case PacketKind::data: return 0;
  }
  return 0;
}

inline Bytes encode(const Packet& p) {
  ByteWriter w;
  w.u32(p.src).u32(p.dst).u32(p.target).u32(p.seq).u8(static_cast<std::uint8_t>(p.kind)).u8(p.ttl);
  w.u32(p.payload_len).u64(p.created.raw()).u32(p.tx).u32(p.next_hop);
  w.u32(p.hop_count).u32(p.origin_seq).u32(p.dest_seq).u8(p.dest_seq_known ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(p.unreachable.size()));
  for (const auto& [d, s] : p.unreachable) w.u32(d).u32(s);
  w.blob(p.body);
  return w.bytes();
}

inline Packet read_packet(ByteReader& r) {
  Packet p;
  p.src = r.u32();
  p.dst = r.u32();
  p.target = r.u32();
  p.seq = r.u32();
  const auto kind = r.u8();
  if (kind > 3) throw DecodeError("packet: bad kind " + std::to_string(kind));
  p.kind = static_cast<PacketKind>(kind);
  p.ttl = r.u8();
  p.payload_len = r.u32();
  p.created = SimTime::from_raw(r.u64());
  p.tx = r.u32();
  p.next_hop = r.u32();
  p.hop_count = r.u32();
  p.origin_seq = r.u32();
  p.dest_seq = r.u32();
  p.dest_seq_known = r.u8() != 0;
  const auto n = r.u32();
  if (n > r.remaining() / 8) throw DecodeError("packet: unreachable list truncated");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto d = r.u32();
    p.unreachable.emplace_back(d, r.u32());
  }
  p.body = r.blob();
  return p;
}

inline Packet decode_packet(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  auto p = read_packet(r);
  r.expect_end();
  return p;
}

/// What an application sent or received: end points, per-socket sequence
/// number, and data. Identical bytes appear at send and at delivery.
struct AppRecord {
  NodeId src = 0;
  std::uint16_t src_port = 0;
  NodeId dst = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  Bytes data;

  bool operator==(const AppRecord&) const = default;
};

inline Bytes encode(const AppRecord& a) {
  ByteWriter w;
  w.u32(a.src).u16(a.src_port).u32(a.dst).u16(a.dst_port).u32(a.seq).blob(a.data);
  return w.bytes();
}

inline AppRecord decode_app_record(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  AppRecord a;
  a.src = r.u32();
  a.src_port = r.u16();
  a.dst = r.u32();
  a.dst_port = r.u16();
  a.seq = r.u32();
  a.data = r.blob();
  r.expect_end();
  return a;
}

/// Application-level send request from a traffic source to its node's stack.
struct SendRequest {
  std::uint16_t src_port = 0;
  NodeId dst = 0;
  std::uint16_t dst_port = 0;
  Bytes data;

  bool operator==(const SendRequest&) const = default;
};

inline Bytes encode(const SendRequest& s) {
  ByteWriter w;
  w.u16(s.src_port).u32(s.dst).u16(s.dst_port).blob(s.data);
  return w.bytes();
}

inline SendRequest decode_send_request(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  SendRequest s;
  s.src_port = r.u16();
  s.dst = r.u32();
  s.dst_port = r.u16();
  s.data = r.blob();
  r.expect_end();
  return s;
}

/// Channel to node delivery: a received packet, or a notice that a unicast
/// the node sent could not reach its next hop.
struct Frame {
  enum class Kind : std::uint8_t { packet = 0, link_failure = 1 };
  Kind kind = Kind::packet;
  Packet packet;

  bool operator==(const Frame&) const = default;
};

inline Bytes encode(const Frame& f) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.raw(encode(f.packet));
  return w.bytes();
}

inline Frame decode_frame(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  Frame f;
  const auto k = r.u8();
  if (k > 1) throw DecodeError("frame: bad kind");
  f.kind = static_cast<Frame::Kind>(k);
  f.packet = read_packet(r);
  r.expect_end();
  return f;
}

struct PositionUpdate {
  NodeId node = 0;
  Vec2 position;
  bool enabled = true;
};

inline Bytes encode(const PositionUpdate& p) {
  ByteWriter w;
  w.u32(p.node).f64(p.position.x).f64(p.position.y).u8(p.enabled ? 1 : 0);
  return w.bytes();
}

inline PositionUpdate decode_position(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  PositionUpdate p;
  p.node = r.u32();
  p.position.x = r.f64();
  p.position.y = r.f64();
  p.enabled = r.u8() != 0;
  r.expect_end();
  return p;
}

/// Scenario script action: a node leaves or (re)joins the network.
struct ControlEvent {
  NodeId node = 0;
  bool enable = true;
};

inline Bytes encode(const ControlEvent& c) {
  ByteWriter w;
  w.u32(c.node).u8(c.enable ? 1 : 0);
  return w.bytes();
}

inline ControlEvent decode_control(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  ControlEvent c;
  c.node = r.u32();
  c.enable = r.u8() != 0;
  r.expect_end();
  return c;
}

}  // namespace devsnet::manet
