#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "devsnet/core/bytes.hpp"
#include "devsnet/core/time.hpp"

namespace devsnet::bus {

enum class MsgType : std::uint8_t {
  event = 0,
  next_time_request = 1,
  next_time_grant = 2,
  ack = 3,
  fault = 4,
};

inline std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::event: return "event";
    case MsgType::next_time_request: return "next_time_request";
    case MsgType::next_time_grant: return "next_time_grant";
    case MsgType::ack: return "ack";
    case MsgType::fault: return "fault";
  }
  return "?";
}

struct BusMessage {
  MsgType type = MsgType::event;
  SimTime time;
  std::uint32_t endpoint_id = 0;
  std::string port;
  Bytes payload;

  bool operator==(const BusMessage&) const = default;
};

inline constexpr std::uint8_t kMagic0 = 0xDE;
inline constexpr std::uint8_t kMagic1 = 0x55;
inline constexpr std::uint8_t kWireVersion = 1;
/// magic(2) version(1) type(1) endpoint(4) time(8) port_len(2)
inline constexpr std::size_t kFixedPrefix = 18;
/// Frame size with empty port name and empty payload.
inline constexpr std::size_t kMinFrame = kFixedPrefix + 4;
inline constexpr std::size_t kMaxPayload = 64u << 20;

inline Bytes encode(const BusMessage& m) {
  if (m.port.size() > 0xFFFF) throw std::invalid_argument("bus: port name longer than 65535 bytes");
  if (m.payload.size() > kMaxPayload) throw std::invalid_argument("bus: payload too large");
  ByteWriter w;
  w.u8(kMagic0).u8(kMagic1).u8(kWireVersion).u8(static_cast<std::uint8_t>(m.type));
  w.u32(m.endpoint_id).u64(m.time.raw()).str16(m.port).blob(m.payload);
  return w.bytes();
}

namespace detail {

inline BusMessage read_message(ByteReader& r) {
  if (r.remaining() < kMinFrame) throw DecodeError("bus: truncated frame");
  const auto m0 = r.u8();
  const auto m1 = r.u8();
  if (m0 != kMagic0 || m1 != kMagic1) throw DecodeError("bus: bad magic");
  if (const auto v = r.u8(); v != kWireVersion) {
    throw DecodeError("bus: unsupported version " + std::to_string(v));
  }
  const auto type = r.u8();
  if (type > static_cast<std::uint8_t>(MsgType::fault)) {
    throw DecodeError("bus: unknown msg_type " + std::to_string(type));
  }
  BusMessage m;
  m.type = static_cast<MsgType>(type);
  m.endpoint_id = r.u32();
  m.time = SimTime::from_raw(r.u64());
  m.port = r.str16();
  const auto len = r.u32();
  if (len > kMaxPayload) throw DecodeError("bus: payload length over limit");
  m.payload = r.raw(len);
  return m;
}

}  // namespace detail

inline BusMessage decode(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  auto m = detail::read_message(r);
  if (r.remaining() != 0) throw DecodeError("bus: over-length frame");
  return m;
}

/// Reassembles frames from a byte stream. Frames delimit themselves through
/// their port and payload length fields.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  /// Next complete message, or nullopt if more bytes are needed.
  std::optional<BusMessage> next() {
    const auto avail = buf_.size() - head_;
    if (avail < kFixedPrefix) return std::nullopt;
    const auto* p = buf_.data() + head_;
    if (p[0] != kMagic0 || p[1] != kMagic1) throw DecodeError("bus: bad magic in stream");
    const std::size_t port_len = p[16] | (static_cast<std::size_t>(p[17]) << 8);
    if (avail < kFixedPrefix + port_len + 4) return std::nullopt;
    const auto* q = p + kFixedPrefix + port_len;
    const std::size_t payload_len = q[0] | (static_cast<std::size_t>(q[1]) << 8) |
                                    (static_cast<std::size_t>(q[2]) << 16) |
                                    (static_cast<std::size_t>(q[3]) << 24);
    if (payload_len > kMaxPayload) throw DecodeError("bus: payload length over limit");
    const std::size_t total = kFixedPrefix + port_len + 4 + payload_len;
    if (avail < total) return std::nullopt;
    auto m = decode({p, total});
    head_ += total;
    if (head_ > 4096 && head_ * 2 > buf_.size()) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
    return m;
  }

  std::size_t buffered() const { return buf_.size() - head_; }

 private:
  Bytes buf_;
  std::size_t head_ = 0;
};

}  // namespace devsnet::bus
