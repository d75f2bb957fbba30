#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "devsnet/devs/model.hpp"
#include "devsnet/manet/packet.hpp"
#include "devsnet/manet/routing_table.hpp"

namespace devsnet::manet {

struct AodvParams {
  /// Retransmissions of an unanswered RREQ after the first attempt.
  std::uint32_t rreq_retries = 2;
  SimTime route_lifetime = SimTime::sec(3);
  std::size_t buffer_capacity = 64;
  std::uint8_t ttl = 32;
  /// Wait for the first RREP; doubled on every retry.
  SimTime discovery_timeout = SimTime::sec(1);
  /// Let intermediate nodes with a fresh route answer RREQs.
  bool intermediate_replies = false;
};

/// Per-node AODV state. `now` is maintained by the owner before each
/// transition.
struct AodvState {
  struct Discovery {
    std::uint32_t retries = 0;
    SimTime deadline;
  };

  NodeId self = 0;
  AodvParams params;
  SimTime now;
  bool enabled = true;

  std::uint32_t own_seq = 0;
  std::uint32_t rreq_id = 0;
  std::uint32_t data_seq = 0;
  std::uint32_t rrep_seq = 0;
  std::uint32_t rerr_seq = 0;

  RoutingTable table;
  std::set<std::pair<NodeId, std::uint32_t>> seen_rreq;
  std::map<NodeId, Discovery> pending;
  std::deque<Packet> buffer;

  SimTime next_timer() const {
    SimTime t = kInfinity;
    for (const auto& [d, disc] : pending) t = std::min(t, disc.deadline);
    return t;
  }
};

namespace aodv_port {
inline constexpr std::string_view app_in = "app_in";
inline constexpr std::string_view rx = "rx";
inline constexpr std::string_view control = "control";
inline constexpr std::string_view timer = "timer";

inline constexpr std::string_view tx_data = "tx_data";
inline constexpr std::string_view tx_ctl = "tx_ctl";
inline constexpr std::string_view deliver = "deliver";
inline constexpr std::string_view route = "route";
inline constexpr std::string_view drop_ttl = "drop_ttl";
inline constexpr std::string_view drop_buffer = "drop_buffer";
inline constexpr std::string_view drop_noroute = "drop_noroute";
inline constexpr std::string_view drop_disabled = "drop_disabled";
}  // namespace aodv_port

namespace detail {

class AodvStep {
 public:
  explicit AodvStep(AodvState& st) : st_(st) {}

  std::vector<devs::EventMsg> take() { return std::move(out_); }

  void send(const Bytes& record) {
    if (!st_.enabled) return emit_drop(aodv_port::drop_disabled, record);
    const auto rec = decode_app_record(record);
    Packet p;
    p.src = st_.self;
    p.dst = rec.dst;
    p.target = rec.dst;
    p.seq = st_.data_seq++;
    p.kind = PacketKind::data;
    p.ttl = st_.params.ttl;
    p.payload_len = static_cast<std::uint32_t>(record.size());
    p.created = st_.now;
    p.tx = st_.self;
    p.body = record;
    if (p.dst == st_.self) return emit(aodv_port::deliver, schema::app_record, p.body);
    route_or_buffer(std::move(p));
  }

  void frame(const Frame& f) {
    if (f.kind == Frame::Kind::link_failure) {
      if (st_.enabled) link_break(f.packet.next_hop);
      return;
    }
    const Packet& p = f.packet;
    if (!st_.enabled) {
      if (p.kind == PacketKind::data) emit_drop(aodv_port::drop_disabled, p.body);
      return;
    }
    switch (p.kind) {
      case PacketKind::rreq: return on_rreq(p);
      case PacketKind::rrep: return on_rrep(p);
      case PacketKind::rerr: return on_rerr(p);
      case PacketKind::data: return on_data(p);
    }
  }

  void control(const ControlEvent& c) {
    if (c.enable) {
      st_.enabled = true;
      return;
    }
    if (!st_.enabled) return;
    st_.enabled = false;
    for (auto& p : st_.buffer) emit_drop(aodv_port::drop_disabled, p.body);
    st_.buffer.clear();
    st_.pending.clear();
    std::vector<NodeId> dests;
    for (const auto& [d, e] : st_.table.entries()) dests.push_back(d);
    for (NodeId d : dests) {
      if (auto e = st_.table.invalidate(d, st_.now)) emit_route(*e);
    }
  }

  void timer() {
    std::vector<NodeId> due;
    for (const auto& [d, disc] : st_.pending) {
      if (disc.deadline <= st_.now) due.push_back(d);
    }
    for (NodeId d : due) {
      const auto retries = st_.pending[d].retries;
      if (retries < st_.params.rreq_retries) {
        start_discovery(d, retries + 1);
        continue;
      }
      st_.pending.erase(d);
      std::deque<Packet> keep;
      for (auto& p : st_.buffer) {
        if (p.dst == d) emit_drop(aodv_port::drop_noroute, p.body);
        else keep.push_back(std::move(p));
      }
      st_.buffer = std::move(keep);
    }
  }

 private:
  void emit(std::string_view port, std::string_view schema_tag, Bytes payload) {
    out_.push_back({std::string(port), std::string(schema_tag), std::move(payload), st_.now});
  }
  void emit_drop(std::string_view port, const Bytes& record) {
    emit(port, schema::app_record, record);
  }
  void emit_route(const RoutingTableEntry& e) { emit(aodv_port::route, schema::route, encode(e)); }
  void emit_packet(const Packet& p) {
    emit(p.kind == PacketKind::data ? aodv_port::tx_data : aodv_port::tx_ctl, schema::packet,
         encode(p));
  }

  SimTime expiry() const { return st_.now + st_.params.route_lifetime; }

  bool offer_route(NodeId dest, NodeId next_hop, std::uint32_t hops, std::uint32_t seq) {
    if (dest == st_.self) return false;
    RoutingTableEntry e{dest, next_hop, hops, seq, expiry(), true};
    if (st_.table.offer(e, st_.now)) {
      emit_route(e);
      return true;
    }
    if (auto cur = st_.table.lookup(dest, st_.now);
        cur && cur->next_hop == next_hop && cur->dest_seq == seq) {
      st_.table.refresh(dest, expiry(), st_.now);
    }
    return false;
  }

  void forward_data(Packet p, const RoutingTableEntry& r) {
    p.tx = st_.self;
    p.next_hop = r.next_hop;
    st_.table.refresh(p.dst, expiry(), st_.now);
    st_.table.refresh(p.src, expiry(), st_.now);
    emit_packet(p);
  }

  void route_or_buffer(Packet p) {
    if (auto r = st_.table.lookup(p.dst, st_.now)) return forward_data(std::move(p), *r);
    const NodeId dst = p.dst;
    if (st_.params.buffer_capacity == 0) {
      emit_drop(aodv_port::drop_buffer, p.body);
    } else {
      if (st_.buffer.size() >= st_.params.buffer_capacity) {
        emit_drop(aodv_port::drop_buffer, st_.buffer.front().body);
        st_.buffer.pop_front();
      }
      st_.buffer.push_back(std::move(p));
    }
    if (!st_.pending.contains(dst)) start_discovery(dst, 0);
  }

  void start_discovery(NodeId dst, std::uint32_t retries) {
    ++st_.own_seq;
    ++st_.rreq_id;
    st_.seen_rreq.insert({st_.self, st_.rreq_id});
    Packet q;
    q.src = st_.self;
    q.dst = dst;
    q.target = dst;
    q.seq = st_.rreq_id;
    q.kind = PacketKind::rreq;
    q.ttl = st_.params.ttl;
    q.payload_len = control_size(PacketKind::rreq);
    q.created = st_.now;
    q.tx = st_.self;
    q.next_hop = kBroadcast;
    q.origin_seq = st_.own_seq;
    if (const auto* e = st_.table.find(dst)) {
      q.dest_seq = e->dest_seq;
      q.dest_seq_known = true;
    }
    st_.pending[dst] = {retries, st_.now + st_.params.discovery_timeout * (1ULL << std::min(retries, 20u))};
    emit_packet(q);
  }

  void reply(NodeId origin, NodeId target, std::uint32_t hops, std::uint32_t seq) {
    const auto rev = st_.table.lookup(origin, st_.now);
    if (!rev) return;
    Packet r;
    r.src = st_.self;
    r.dst = origin;
    r.target = target;
    r.seq = st_.rrep_seq++;
    r.kind = PacketKind::rrep;
    r.ttl = st_.params.ttl;
    r.payload_len = control_size(PacketKind::rrep);
    r.created = st_.now;
    r.tx = st_.self;
    r.next_hop = rev->next_hop;
    r.hop_count = hops;
    r.dest_seq = seq;
    r.dest_seq_known = true;
    emit_packet(r);
  }

  void broadcast_rerr(std::vector<std::pair<NodeId, std::uint32_t>> unreachable) {
    if (unreachable.empty()) return;
    Packet e;
    e.src = st_.self;
    e.dst = kBroadcast;
    e.seq = st_.rerr_seq++;
    e.kind = PacketKind::rerr;
    e.ttl = 1;
    e.payload_len = control_size(PacketKind::rerr, unreachable.size());
    e.created = st_.now;
    e.tx = st_.self;
    e.next_hop = kBroadcast;
    e.unreachable = std::move(unreachable);
    emit_packet(e);
  }

  void link_break(NodeId next_hop) {
    std::vector<std::pair<NodeId, std::uint32_t>> lost;
    for (NodeId d : st_.table.routes_via(next_hop, st_.now)) {
      if (auto e = st_.table.invalidate(d, st_.now)) {
        emit_route(*e);
        lost.emplace_back(d, e->dest_seq);
      }
    }
    broadcast_rerr(std::move(lost));
  }

  static bool seq_greater(std::uint32_t a, std::uint32_t b) {
    return static_cast<std::int32_t>(a - b) > 0;
  }

  void on_rreq(const Packet& p) {
    if (p.src == st_.self) return;
    if (!st_.seen_rreq.insert({p.src, p.seq}).second) return;
    const std::uint32_t hops = p.hop_count + 1;
    offer_route(p.src, p.tx, hops, p.origin_seq);
    if (p.target == st_.self) {
      if (p.dest_seq_known && seq_greater(p.dest_seq, st_.own_seq)) st_.own_seq = p.dest_seq;
      return reply(p.src, st_.self, 0, st_.own_seq);
    }
    if (st_.params.intermediate_replies && p.dest_seq_known) {
      if (auto r = st_.table.lookup(p.target, st_.now);
          r && !seq_greater(p.dest_seq, r->dest_seq)) {
        return reply(p.src, p.target, r->hop_count, r->dest_seq);
      }
    }
    if (p.ttl <= 1) return;
    Packet fwd = p;
    fwd.ttl = static_cast<std::uint8_t>(p.ttl - 1);
    fwd.hop_count = hops;
    fwd.tx = st_.self;
    fwd.next_hop = kBroadcast;
    emit_packet(fwd);
  }

  void on_rrep(const Packet& p) {
    if (p.next_hop != st_.self) return;
    const std::uint32_t hops = p.hop_count + 1;
    offer_route(p.target, p.tx, hops, p.dest_seq);
    if (p.dst == st_.self) {
      st_.pending.erase(p.target);
      return flush(p.target);
    }
    const auto rev = st_.table.lookup(p.dst, st_.now);
    if (!rev || p.ttl <= 1) return;
    Packet fwd = p;
    fwd.ttl = static_cast<std::uint8_t>(p.ttl - 1);
    fwd.hop_count = hops;
    fwd.tx = st_.self;
    fwd.next_hop = rev->next_hop;
    st_.table.refresh(p.dst, expiry(), st_.now);
    emit_packet(fwd);
  }

  void flush(NodeId dest) {
    const auto r = st_.table.lookup(dest, st_.now);
    if (!r) return;
    std::deque<Packet> keep;
    for (auto& p : st_.buffer) {
      if (p.dst == dest) forward_data(std::move(p), *r);
      else keep.push_back(std::move(p));
    }
    st_.buffer = std::move(keep);
  }

  void on_rerr(const Packet& p) {
    if (p.tx == st_.self) return;
    std::vector<std::pair<NodeId, std::uint32_t>> lost;
    for (const auto& [d, seq] : p.unreachable) {
      const auto cur = st_.table.lookup(d, st_.now);
      if (!cur || cur->next_hop != p.tx) continue;
      if (auto e = st_.table.invalidate(d, st_.now, seq)) {
        emit_route(*e);
        lost.emplace_back(d, e->dest_seq);
      }
    }
    broadcast_rerr(std::move(lost));
  }

  void on_data(const Packet& p) {
    if (p.dst == st_.self) return emit(aodv_port::deliver, schema::app_record, p.body);
    if (p.ttl <= 1) return emit_drop(aodv_port::drop_ttl, p.body);
    Packet fwd = p;
    fwd.ttl = static_cast<std::uint8_t>(p.ttl - 1);
    fwd.hop_count = p.hop_count + 1;
    if (auto r = st_.table.lookup(p.dst, st_.now)) return forward_data(std::move(fwd), *r);
    emit_drop(aodv_port::drop_noroute, p.body);
    const auto* e = st_.table.find(p.dst);
    broadcast_rerr({{p.dst, e != nullptr ? e->dest_seq + (e->valid ? 1 : 0) : 0}});
  }

  AodvState& st_;
  std::vector<devs::EventMsg> out_;
};

}  // namespace detail

/// One AODV reaction. `ev.port` selects the input: app_in (encoded AppRecord
/// to send), rx (encoded Frame), control (encoded ControlEvent) or timer.
/// Returns the output bag; every message is stamped with st.now.
inline std::vector<devs::EventMsg> aodv_transition(AodvState& st, const devs::EventMsg& ev) {
  detail::AodvStep step(st);
  if (ev.port == aodv_port::app_in) step.send(ev.payload);
  else if (ev.port == aodv_port::rx) step.frame(decode_frame(ev.payload));
  else if (ev.port == aodv_port::control) step.control(decode_control(ev.payload));
  else if (ev.port == aodv_port::timer) step.timer();
  else throw std::invalid_argument("aodv_transition: unexpected port '" + ev.port + "'");
  return step.take();
}

/// AODV routing agent of one node as a DEVS atomic. Reactions are emitted
/// after zero delay; discovery timers schedule internal events.
class AodvRouter : public devs::AtomicModel<AodvRouter> {
 public:
  AodvRouter(NodeId self, AodvParams params) {
    st_.self = self;
    st_.params = params;
    add_input(std::string(aodv_port::app_in), std::string(schema::app_record));
    add_input(std::string(aodv_port::rx), std::string(schema::frame));
    add_input(std::string(aodv_port::control), std::string(schema::control));
    add_output(std::string(aodv_port::tx_data), std::string(schema::packet));
    add_output(std::string(aodv_port::tx_ctl), std::string(schema::packet));
    add_output(std::string(aodv_port::deliver), std::string(schema::app_record));
    add_output(std::string(aodv_port::route), std::string(schema::route));
    for (auto p : {aodv_port::drop_ttl, aodv_port::drop_buffer, aodv_port::drop_noroute,
                   aodv_port::drop_disabled}) {
      add_output(std::string(p), std::string(schema::app_record));
    }
  }

  SimTime time_advance() const override {
    if (!out_.empty()) return SimTime::zero();
    const SimTime t = st_.next_timer();
    if (t.is_infinite()) return kInfinity;
    return t > st_.now ? t - st_.now : SimTime::zero();
  }

  std::vector<devs::EventMsg> output() const override { return out_; }

  void internal_transition() override {
    st_.now = st_.now + time_advance();
    out_.clear();
    if (st_.next_timer() <= st_.now) {
      devs::EventMsg tick{std::string(aodv_port::timer), "", {}, st_.now};
      out_ = aodv_transition(st_, tick);
    }
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg> bag) override {
    st_.now = st_.now + elapsed;
    for (const auto& msg : bag) {
      auto produced = aodv_transition(st_, msg);
      out_.insert(out_.end(), std::make_move_iterator(produced.begin()),
                  std::make_move_iterator(produced.end()));
    }
  }

  const AodvState& state() const { return st_; }
  const RoutingTable& table() const { return st_.table; }

  /// Data packets held here: buffered for discovery or queued for output.
  std::size_t in_flight() const {
    std::size_t n = st_.buffer.size();
    for (const auto& m : out_) {
      if (m.port == aodv_port::tx_data || m.port == aodv_port::deliver) ++n;
    }
    return n;
  }

 private:
  AodvState st_;
  std::vector<devs::EventMsg> out_;
};

}  // namespace devsnet::manet
