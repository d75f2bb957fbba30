#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "devsnet/core/rng.hpp"
#include "devsnet/devs/model.hpp"
#include "devsnet/manet/packet.hpp"

namespace devsnet::manet {

enum class TrafficKind { cbr, bursty, trace };

struct TraceEntry {
  SimTime time;
  NodeId dst = 0;
  std::uint32_t payload_len = 0;
};

struct TrafficSpec {
  TrafficKind kind = TrafficKind::cbr;
  /// packets / second (cbr)
  double rate = 1.0;
  /// bursty: packets per burst, spacing inside a burst, silence between bursts
  std::uint32_t burst_len = 1;
  SimTime inter_packet = SimTime::ms(10);
  SimTime idle_gap = SimTime::sec(1);
  std::vector<TraceEntry> schedule;
  std::uint32_t payload_len = 64;
  SimTime start;
  /// No packet fires after this instant.
  SimTime stop = kInfinity;

  void validate() const {
    switch (kind) {
      case TrafficKind::cbr:
        if (!(rate > 0) || !std::isfinite(rate)) throw std::invalid_argument("cbr rate must be > 0");
        break;
      case TrafficKind::bursty:
        if (burst_len == 0) throw std::invalid_argument("bursty burst_len must be >= 1");
        if (inter_packet == SimTime::zero() && idle_gap == SimTime::zero()) {
          throw std::invalid_argument("bursty traffic needs a nonzero inter_packet or idle_gap");
        }
        break;
      case TrafficKind::trace:
        for (std::size_t i = 1; i < schedule.size(); ++i) {
          if (!(schedule[i - 1].time < schedule[i].time)) {
            throw std::invalid_argument("trace schedule must be strictly increasing in time");
          }
        }
        break;
    }
  }
};

struct TrafficState {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t count = 0;
  SimTime next;
};

/// Firing instant of the k-th packet (0-based), or INFINITY.
inline SimTime traffic_firing(const TrafficSpec& spec, std::uint64_t k) {
  SimTime t;
  switch (spec.kind) {
    case TrafficKind::cbr:
      t = spec.start + SimTime::us(static_cast<std::uint64_t>(
                           std::llround(static_cast<double>(k + 1) * 1e6 / spec.rate)));
      break;
    case TrafficKind::bursty: {
      const SimTime cycle = spec.inter_packet * spec.burst_len + spec.idle_gap;
      t = spec.start + cycle * (k / spec.burst_len) + spec.inter_packet * (k % spec.burst_len + 1);
      break;
    }
    case TrafficKind::trace:
      if (k >= spec.schedule.size()) return kInfinity;
      t = spec.schedule[k].time;
      break;
  }
  return t > spec.stop ? kInfinity : t;
}

inline TrafficState traffic_start(const TrafficSpec& spec, NodeId src, NodeId dst) {
  spec.validate();
  return {src, dst, 0, traffic_firing(spec, 0)};
}

struct TrafficStep {
  std::optional<Packet> packet;
  SimTime next;
};

/// Fires the packet due at st.next and advances to the following firing.
inline TrafficStep traffic_next(const TrafficSpec& spec, TrafficState& st) {
  if (st.next.is_infinite()) return {std::nullopt, kInfinity};
  Packet p;
  p.src = st.src;
  p.dst = st.dst;
  p.target = st.dst;
  p.seq = static_cast<std::uint32_t>(st.count);
  p.kind = PacketKind::data;
  p.payload_len = spec.payload_len;
  p.created = st.next;
  if (spec.kind == TrafficKind::trace) {
    p.dst = p.target = spec.schedule[st.count].dst;
    p.payload_len = spec.schedule[st.count].payload_len;
  }
  ++st.count;
  st.next = traffic_firing(spec, st.count);
  return {std::move(p), st.next};
}

/// Deterministic application data for packet `seq` of node `src`.
inline Bytes traffic_payload(NodeId src, std::uint64_t seq, std::uint32_t len) {
  Rng rng(splitmix64((static_cast<std::uint64_t>(src) << 40) ^ seq));
  Bytes out(len);
  for (std::uint32_t i = 0; i < len; i += 8) {
    auto v = rng.next();
    for (std::uint32_t j = i; j < len && j < i + 8; ++j, v >>= 8) out[j] = static_cast<std::uint8_t>(v);
  }
  return out;
}

/// Application traffic source bound to one (src_port, dst_port) flow. Emits a
/// SendRequest on "send" at each firing.
class TrafficGenerator : public devs::AtomicModel<TrafficGenerator> {
 public:
  TrafficGenerator(TrafficSpec spec, NodeId src, NodeId dst, std::uint16_t src_port,
                   std::uint16_t dst_port)
      : spec_(std::move(spec)), src_port_(src_port), dst_port_(dst_port) {
    st_ = traffic_start(spec_, src, dst);
    add_output("send", std::string(schema::send_request));
  }

  SimTime time_advance() const override {
    return st_.next.is_infinite() ? kInfinity : st_.next - now_;
  }

  std::vector<devs::EventMsg> output() const override {
    auto copy = st_;
    auto step = traffic_next(spec_, copy);
    if (!step.packet) return {};
    SendRequest req{src_port_, step.packet->dst, dst_port_,
                    traffic_payload(st_.src, st_.count, step.packet->payload_len)};
    return {emit("send", encode(req))};
  }

  void internal_transition() override {
    now_ = st_.next;
    traffic_next(spec_, st_);
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg>) override {
    now_ = now_ + elapsed;
  }

  const TrafficState& state() const { return st_; }

 private:
  TrafficSpec spec_;
  std::uint16_t src_port_;
  std::uint16_t dst_port_;
  TrafficState st_;
  SimTime now_;
};

}  // namespace devsnet::manet
