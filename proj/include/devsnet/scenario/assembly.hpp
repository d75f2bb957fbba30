#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "devsnet/core/rng.hpp"
#include "devsnet/devs/model.hpp"
#include "devsnet/manet/aodv.hpp"
#include "devsnet/manet/channel.hpp"
#include "devsnet/manet/mobility_driver.hpp"
#include "devsnet/manet/traffic.hpp"
#include "devsnet/scenario/config.hpp"
#include "devsnet/vcs/node.hpp"

namespace devsnet::scenario {

inline std::string node_name(NodeId n) { return "n" + std::to_string(n); }

/// Emits the scenario's enable/disable actions on "ctl<node>".
class ControlScript : public devs::AtomicModel<ControlScript> {
 public:
  explicit ControlScript(std::vector<ScriptEvent> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const ScriptEvent& a, const ScriptEvent& b) { return a.time < b.time; });
    std::set<NodeId> nodes;
    for (const auto& e : events_) nodes.insert(e.node);
    for (NodeId n : nodes) add_output(port(n), std::string(manet::schema::control));
  }

  static std::string port(NodeId n) { return "ctl" + std::to_string(n); }

  SimTime time_advance() const override {
    return next_ < events_.size() ? events_[next_].time - now_ : kInfinity;
  }

  std::vector<devs::EventMsg> output() const override {
    std::vector<devs::EventMsg> out;
    const SimTime t = events_[next_].time;
    for (auto i = next_; i < events_.size() && events_[i].time == t; ++i) {
      out.push_back(emit(port(events_[i].node), manet::encode(manet::ControlEvent{events_[i].node, events_[i].enable})));
    }
    return out;
  }

  void internal_transition() override {
    now_ = events_[next_].time;
    while (next_ < events_.size() && events_[next_].time == now_) ++next_;
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg>) override { now_ = now_ + elapsed; }

 private:
  std::vector<ScriptEvent> events_;
  std::size_t next_ = 0;
  SimTime now_;
};

/// Starting state of every node, indexed by id.
inline std::vector<manet::NodeState> initial_nodes(const ScenarioConfig& c) {
  std::vector<manet::NodeState> out(c.node_count);
  const std::uint32_t cols =
      c.columns > 0 ? c.columns : static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(c.node_count))));
  Rng rng = Rng::stream(c.seed, "placement");
  for (NodeId i = 0; i < c.node_count; ++i) {
    auto& s = out[i];
    s.node_id = i;
    switch (c.placement) {
      case Placement::line:
        s.position = {c.spacing * i, 0};
        break;
      case Placement::grid:
        s.position = {c.spacing * (i % cols), c.spacing * (i / cols)};
        break;
      case Placement::random:
        s.position = {rng.uniform(0, c.box.width), rng.uniform(0, c.box.height)};
        break;
      case Placement::explicit_list:
        s.position = c.positions[i];
        break;
    }
    if (c.mobility.kind == manet::MobilityKind::manhattan) {
      s.position = {std::round(s.position.x / c.mobility.manhattan.pitch) * c.mobility.manhattan.pitch,
                    std::round(s.position.y / c.mobility.manhattan.pitch) * c.mobility.manhattan.pitch};
      s.position = c.box.clamp(s.position);
    }
  }
  return out;
}

inline std::map<NodeId, std::vector<manet::TracePoint>> load_mobility_trace(const ScenarioConfig& c) {
  if (c.mobility.kind != manet::MobilityKind::trace) return {};
  std::ifstream in(c.mobility_trace);
  if (!in) throw ConfigError({"mobility.trace: cannot read " + c.mobility_trace});
  try {
    auto t = manet::parse_mobility_trace(in);
    for (const auto& [n, pts] : t) {
      if (n >= c.node_count) throw ConfigError({"mobility.trace: node " + std::to_string(n) + " out of range"});
    }
    return t;
  } catch (const std::invalid_argument& e) {
    throw ConfigError({std::string("mobility.trace: ") + e.what()});
  }
}

/// Builds the coupled model of a scenario:
///
///   scenario
///     channel, script
///     n<i>: mob, vcs, aodv, [os], traffic<k>
///
/// Inside n<i> the ports are rx/ctl/app in and tx/pos/recv out. The root
/// exposes "app<i>" (send requests into node i) and "recv" (every record an
/// application received).
inline devs::CoupledSpec build_scenario(const ScenarioConfig& c) {
  c.validate();
  using namespace manet;
  const auto nodes = initial_nodes(c);
  auto traces = load_mobility_trace(c);
  const bool os = c.stack == vcs::StackAbstraction::full_stack;

  devs::CoupledSpec root("scenario");
  root.add_output("recv", std::string(schema::app_record));
  root.add("channel", std::make_shared<Channel>(nodes, c.channel(), Rng::stream(c.seed, "channel")));
  if (!c.events.empty()) root.add("script", std::make_shared<ControlScript>(c.events));

  std::map<NodeId, std::vector<std::size_t>> flows_of;
  for (std::size_t k = 0; k < c.traffic.size(); ++k) flows_of[c.traffic[k].src].push_back(k);

  for (const auto& init : nodes) {
    const NodeId i = init.node_id;
    devs::CoupledSpec n(node_name(i));
    n.add_input("rx", std::string(schema::frame));
    n.add_input("ctl", std::string(schema::control));
    n.add_input("app", std::string(schema::send_request));
    n.add_output("tx", std::string(schema::packet));
    n.add_output("pos", std::string(schema::position));
    n.add_output("recv", std::string(schema::app_record));

    n.add("mob", std::make_shared<MobilityDriver>(init, c.mobility, Rng::stream(c.seed, "mobility", i),
                                                  traces.contains(i) ? traces[i] : std::vector<TracePoint>{}));
    n.add("vcs", std::make_shared<vcs::VcsNode>(i, vcs::VcsNodeConfig{c.mtu, false}));
    n.add("aodv", std::make_shared<AodvRouter>(i, c.aodv));

    n.couple_input("rx", "aodv", "rx");
    n.couple_input("app", "vcs", "app");
    for (const char* t : {"mob", "vcs", "aodv"}) n.couple_input("ctl", t, "control");
    n.couple_output("mob", "pos", "pos");
    n.couple_output("aodv", "tx_data", "tx");
    n.couple_output("aodv", "tx_ctl", "tx");
    n.couple_output("vcs", "app_recv", "recv");
    n.couple("aodv", "route", "vcs", "route");
    if (os) {
      n.add("os", std::make_shared<vcs::OsStack>(c.os));
      n.couple("vcs", "net_out", "os", "down_in");
      n.couple("os", "down_out", "aodv", "app_in");
      n.couple("aodv", "deliver", "os", "up_in");
      n.couple("os", "up_out", "vcs", "net_in");
    } else {
      n.couple("vcs", "net_out", "aodv", "app_in");
      n.couple("aodv", "deliver", "vcs", "net_in");
    }
    for (std::size_t k : flows_of[i]) {
      const auto& f = c.traffic[k];
      const std::string g = "traffic" + std::to_string(k);
      n.add(g, std::make_shared<TrafficGenerator>(f.spec, f.src, f.dst, f.src_port, f.dst_port));
      n.couple(g, "send", "vcs", "app");
    }

    const std::string name = node_name(i);
    root.add(name, std::move(n));
    root.add_input("app" + std::to_string(i), std::string(schema::send_request));
    root.couple_input("app" + std::to_string(i), name, "app");
    root.couple("channel", rx_port(i), name, "rx");
    root.couple(name, "tx", "channel", "tx");
    root.couple(name, "pos", "channel", "pos");
    root.couple_output(name, "recv", "recv");
  }
  if (!c.events.empty()) {
    std::set<NodeId> seen;
    for (const auto& e : c.events) {
      if (seen.insert(e.node).second) root.couple("script", ControlScript::port(e.node), node_name(e.node), "ctl");
    }
  }
  return root;
}

}  // namespace devsnet::scenario
