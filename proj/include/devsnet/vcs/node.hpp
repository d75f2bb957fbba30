#pragma once

#include <map>
#include <string>
#include <vector>

#include "devsnet/devs/model.hpp"
#include "devsnet/manet/packet.hpp"
#include "devsnet/manet/routing_table.hpp"
#include "devsnet/vcs/types.hpp"

namespace devsnet::vcs {

struct VcsNodeState {
  NodeId node = 0;
  manet::RoutingTable table;
  std::vector<VcsEvent> events;
  std::uint64_t ignored_updates = 0;
  bool record_events = true;
};

/// Mirrors a routing change into the node's table. Stale changes (that fail
/// the freshness rule) are ignored and counted. Returns whether it applied.
inline bool apply_routing_update(VcsNodeState& st, const manet::RoutingTableEntry& delta,
                                 SimTime now) {
  if (!st.table.offer(delta, now)) {
    ++st.ignored_updates;
    return false;
  }
  if (st.record_events) {
    VcsEvent ev;
    ev.kind = VcsEvent::Kind::routing_update;
    ev.route_change = delta;
    ev.time = now;
    st.events.push_back(std::move(ev));
  }
  return true;
}

struct VcsNodeConfig {
  /// Largest application payload accepted, in bytes.
  std::size_t mtu = 1500;
  bool record_events = true;
};

/// The VCS of one node as a DEVS atomic. Send requests on "app" become
/// AppRecords published on "app_sent" and handed down on "net_out"; records
/// arriving on "net_in" are published on "app_recv"; "route" carries routing
/// changes. Reactions take zero time.
class VcsNode : public devs::AtomicModel<VcsNode> {
 public:
  VcsNode(NodeId node, VcsNodeConfig cfg = {}) : cfg_(cfg) {
    st_.node = node;
    st_.record_events = cfg.record_events;
    using manet::schema::app_record;
    add_input("app", std::string(manet::schema::send_request));
    add_input("net_in", std::string(app_record));
    add_input("route", std::string(manet::schema::route));
    add_input("control", std::string(manet::schema::control));
    add_output("net_out", std::string(app_record));
    add_output("app_sent", std::string(app_record));
    add_output("app_recv", std::string(app_record));
    add_output("drop_disabled", std::string(app_record));
  }

  SimTime time_advance() const override { return out_.empty() ? kInfinity : SimTime::zero(); }
  std::vector<devs::EventMsg> output() const override { return out_; }
  void internal_transition() override { out_.clear(); }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg> bag) override {
    now_ = now_ + elapsed;
    for (const auto& m : bag) {
      if (m.port == "app") on_send(manet::decode_send_request(m.payload));
      else if (m.port == "net_in") on_receive(m.payload);
      else if (m.port == "route") apply_routing_update(st_, manet::decode_route(m.payload), now_);
      else if (m.port == "control") enabled_ = manet::decode_control(m.payload).enable;
    }
  }

  const VcsNodeState& state() const { return st_; }
  std::uint64_t rejected() const { return rejected_; }
  std::size_t in_flight() const {
    std::size_t n = 0;
    for (const auto& m : out_) n += m.port == "net_out";
    return n;
  }

 private:
  void on_send(const manet::SendRequest& req) {
    if (req.data.size() > cfg_.mtu) {
      ++rejected_;
      return;
    }
    manet::AppRecord rec{st_.node, req.src_port, req.dst, req.dst_port, seq_[req.src_port]++,
                         req.data};
    auto bytes = manet::encode(rec);
    log(VcsEvent::Kind::send, rec, bytes);
    out_.push_back(emit("app_sent", bytes));
    out_.push_back(emit(enabled_ ? "net_out" : "drop_disabled", std::move(bytes)));
  }

  void on_receive(const Bytes& bytes) {
    log(VcsEvent::Kind::receive, manet::decode_app_record(bytes), bytes);
    out_.push_back(emit("app_recv", bytes));
  }

  void log(VcsEvent::Kind kind, const manet::AppRecord& rec, const Bytes& bytes) {
    if (!st_.record_events) return;
    VcsEvent ev;
    ev.kind = kind;
    ev.socket = kind == VcsEvent::Kind::send ? rec.src_port : rec.dst_port;
    ev.packet = app_packet(rec, bytes, now_);
    ev.time = now_;
    st_.events.push_back(std::move(ev));
  }

  VcsNodeConfig cfg_;
  VcsNodeState st_;
  SimTime now_;
  bool enabled_ = true;
  std::map<std::uint16_t, std::uint32_t> seq_;
  std::uint64_t rejected_ = 0;
  std::vector<devs::EventMsg> out_;
};

struct OsStackConfig {
  std::uint32_t layers = 2;
  SimTime per_layer_latency = SimTime::us(50);
  std::size_t mtu = 1500;
};

/// Modeled OS network stack between the VCS and the router. Each traversal
/// (down at the sender, up at the receiver) costs layers x per_layer_latency;
/// records whose data exceeds the MTU are dropped on the way down.
class OsStack : public devs::AtomicModel<OsStack> {
 public:
  explicit OsStack(OsStackConfig cfg = {}) : cfg_(cfg) {
    using manet::schema::app_record;
    add_input("down_in", std::string(app_record));
    add_input("up_in", std::string(app_record));
    add_output("down_out", std::string(app_record));
    add_output("up_out", std::string(app_record));
    add_output("drop_mtu", std::string(app_record));
  }

  SimTime traversal() const { return cfg_.per_layer_latency * cfg_.layers; }

  SimTime time_advance() const override {
    return pending_.empty() ? kInfinity : pending_.begin()->first - now_;
  }

  std::vector<devs::EventMsg> output() const override {
    std::vector<devs::EventMsg> out;
    if (pending_.empty()) return out;
    const SimTime t = pending_.begin()->first;
    for (auto it = pending_.begin(); it != pending_.end() && it->first == t; ++it) {
      out.push_back(emit(it->second.first, it->second.second));
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
      if (m.port == "down_in") {
        if (manet::decode_app_record(m.payload).data.size() > cfg_.mtu) {
          pending_.emplace(now_, std::pair{std::string("drop_mtu"), m.payload});
        } else {
          pending_.emplace(now_ + traversal(), std::pair{std::string("down_out"), m.payload});
        }
      } else {
        pending_.emplace(now_ + traversal(), std::pair{std::string("up_out"), m.payload});
      }
    }
  }

  std::size_t in_flight() const {
    std::size_t n = 0;
    for (const auto& [t, p] : pending_) n += p.first != "drop_mtu";
    return n;
  }

 private:
  OsStackConfig cfg_;
  SimTime now_;
  std::multimap<SimTime, std::pair<std::string, Bytes>> pending_;
};

}  // namespace devsnet::vcs
