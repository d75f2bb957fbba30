#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "devsnet/core/rng.hpp"
#include "devsnet/devs/model.hpp"
#include "devsnet/manet/packet.hpp"
#include "devsnet/manet/radio.hpp"

namespace devsnet::manet {

struct ChannelParams {
  RadioModel radio;
  std::uint64_t bitrate_bps = 2'000'000;
  SimTime propagation_delay = SimTime::us(1);
};

/// Per-hop latency: serialization time of payload_len bytes (rounded up to a
/// microsecond) plus the propagation delay.
inline SimTime hop_latency(std::uint32_t payload_len, const ChannelParams& p) {
  const std::uint64_t bits = static_cast<std::uint64_t>(payload_len) * 8 * 1'000'000;
  return SimTime::us((bits + p.bitrate_bps - 1) / p.bitrate_bps) + p.propagation_delay;
}

struct Arrival {
  NodeId receiver = 0;
  SimTime time;
  Frame frame;
};

struct TransmitResult {
  std::vector<Arrival> arrivals;
  /// The unicast next hop was out of range or disabled; the sender is told
  /// through a link_failure arrival.
  bool link_failure = false;
  /// A unicast data packet did not reach its next hop.
  bool data_lost = false;
};

inline std::string rx_port(NodeId n) { return "rx" + std::to_string(n); }

/// Transmits `pkt` from `sender` at `now`. Broadcast kinds reach every node
/// whose Bernoulli draw succeeds; unicast kinds only consider pkt.next_hop.
/// States are indexed by node id.
inline TransmitResult channel_transmit(const Packet& pkt, NodeId sender,
                                       std::span<const NodeState> states,
                                       const ChannelParams& params, Rng& rng, SimTime now) {
  TransmitResult res;
  const SimTime at = now + hop_latency(pkt.payload_len, params);
  if (sender >= states.size()) throw std::out_of_range("channel_transmit: unknown sender");
  const NodeState& from = states[sender];
  auto attempt = [&](const NodeState& to) {
    const double p = delivery_probability(from, to, params.radio);
    if (p <= 0) return -1;
    if (p >= 1) return 1;
    return rng.bernoulli(p) ? 1 : 0;
  };
  if (pkt.next_hop == kBroadcast) {
    for (const auto& to : states) {
      if (to.node_id == sender) continue;
      if (attempt(to) == 1) res.arrivals.push_back({to.node_id, at, {Frame::Kind::packet, pkt}});
    }
    return res;
  }
  const int outcome = pkt.next_hop < states.size() ? attempt(states[pkt.next_hop]) : -1;
  if (outcome == 1) {
    res.arrivals.push_back({pkt.next_hop, at, {Frame::Kind::packet, pkt}});
    return res;
  }
  if (outcome < 0 && from.enabled) {
    res.link_failure = true;
    res.arrivals.push_back({sender, at, {Frame::Kind::link_failure, pkt}});
  }
  res.data_lost = pkt.kind == PacketKind::data;
  return res;
}

/// Shared wireless medium. Transmissions arrive on port "tx", node positions
/// on "pos"; frames leave on "rx<node>". Lost data packets are reported on
/// "drop_loss" when the loss is decided.
class Channel : public devs::AtomicModel<Channel> {
 public:
  Channel(std::vector<NodeState> initial, ChannelParams params, Rng rng)
      : states_(std::move(initial)), params_(std::move(params)), rng_(std::move(rng)) {
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i].node_id != i) throw std::invalid_argument("Channel: node ids must match index");
    }
    add_input("tx", std::string(schema::packet));
    add_input("pos", std::string(schema::position));
    for (const auto& s : states_) add_output(rx_port(s.node_id), std::string(schema::frame));
    add_output("drop_loss", std::string(schema::app_record));
  }

  SimTime time_advance() const override {
    if (pending_.empty()) return kInfinity;
    return pending_.begin()->first - now_;
  }

  std::vector<devs::EventMsg> output() const override {
    std::vector<devs::EventMsg> out;
    if (pending_.empty()) return out;
    const SimTime t = pending_.begin()->first;
    for (auto it = pending_.begin(); it != pending_.end() && it->first == t; ++it) {
      out.push_back(emit(it->second.port, it->second.payload));
    }
    return out;
  }

  void internal_transition() override {
    now_ = pending_.begin()->first;
    pending_.erase(pending_.begin(), pending_.upper_bound(now_));
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg> bag) override {
    now_ = now_ + elapsed;
    for (const auto& m : bag) {
      if (m.port != "pos") continue;
      const auto u = decode_position(m.payload);
      if (u.node >= states_.size()) continue;
      states_[u.node].position = u.position;
      states_[u.node].enabled = u.enabled;
    }
    for (const auto& m : bag) {
      if (m.port != "tx") continue;
      const auto pkt = decode_packet(m.payload);
      if (pkt.tx >= states_.size()) continue;
      const auto res = channel_transmit(pkt, pkt.tx, states_, params_, rng_, now_);
      for (const auto& a : res.arrivals) {
        pending_.emplace(a.time, Pending{rx_port(a.receiver), encode(a.frame),
                                         a.frame.kind == Frame::Kind::packet &&
                                             a.frame.packet.kind == PacketKind::data});
      }
      if (res.data_lost) pending_.emplace(now_, Pending{"drop_loss", pkt.body, false});
      ++transmissions_;
    }
  }

  const std::vector<NodeState>& states() const { return states_; }
  std::uint64_t transmissions() const { return transmissions_; }

  /// Data packets currently on the air.
  std::size_t in_flight() const {
    return static_cast<std::size_t>(
        std::count_if(pending_.begin(), pending_.end(), [](const auto& kv) { return kv.second.data; }));
  }

 private:
  struct Pending {
    std::string port;
    Bytes payload;
    bool data = false;
  };

  std::vector<NodeState> states_;
  ChannelParams params_;
  Rng rng_;
  SimTime now_;
  std::multimap<SimTime, Pending> pending_;
  std::uint64_t transmissions_ = 0;
};

}  // namespace devsnet::manet
