#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "devsnet/devs/model.hpp"
#include "devsnet/devs/trace.hpp"
#include "devsnet/devs/validate.hpp"

namespace devsnet::devs {

/// Runtime failure inside a model or during routing; carries the model path and time.
class SimulationFault : public std::runtime_error {
public:
  SimulationFault(std::string path, SimTime time, const std::string& what)
      : std::runtime_error(path + " at " + time.str() + "us: " + what),
        path_(std::move(path)),
        time_(time) {}
  const std::string& path() const { return path_; }
  SimTime time() const { return time_; }

private:
  std::string path_;
  SimTime time_;
};

/// An injected event arrived with a timestamp in the kernel's past.
class SyncFault : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The event-count ceiling per simulated second was exceeded.
class LegitimacyFault : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RootOptions {
  /// 0 disables the guard.
  std::uint64_t max_events_per_second = 0;
};

/// Thread-safe hand-off for events produced outside the kernel loop.
/// The kernel drains it at loop boundaries.
class InjectQueue {
public:
  void post(EventMsg ev) {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(ev));
  }
  std::deque<EventMsg> drain() {
    std::lock_guard lock(mu_);
    return std::exchange(queue_, {});
  }

private:
  std::mutex mu_;
  std::deque<EventMsg> queue_;
};

/// Root of the Classic-DEVS abstract simulator tree.
///
/// One coordinator per coupled model and one simulator leaf per atomic.
/// Each step processes exactly one internal transition (or one injected
/// event); simultaneous candidates are ordered by the depth-first select
/// order of the hierarchy.
class RootCoordinator {
public:
  explicit RootCoordinator(const CoupledSpec& model, RootOptions opts = {})
      : name_(model.name()), opts_(opts), inbox_(std::make_unique<InjectQueue>()) {
    if (auto errors = validate_coupling(model); !errors.empty()) {
      throw ModelError(std::move(errors));
    }
    for (const auto& p : model.ports()) root_ports_.add(p);
    depth_ = build(model, std::nullopt, 0, model.name()).second;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      leaf_index_.emplace(leaves_[i].path, i);
      leaves_[i].tn = leaves_[i].model->time_advance();
      reschedule(i);
    }
  }

  const std::string& name() const { return name_; }
  SimTime clock() const { return clock_; }
  std::size_t depth() const { return depth_; }
  std::size_t leaf_count() const { return leaves_.size(); }
  std::size_t coordinator_count() const { return coords_.size(); }

  /// Leaf paths in select (depth-first) order.
  std::vector<std::string> leaf_paths() const {
    std::vector<std::string> out;
    out.reserve(leaves_.size());
    for (const auto& l : leaves_) out.push_back(l.path);
    return out;
  }

  const Atomic& atomic(std::string_view path) const { return *leaves_[leaf(path)].model; }
  template <typename T>
  const T& model(std::string_view path) const {
    const auto* p = dynamic_cast<const T*>(&atomic(path));
    if (p == nullptr) throw std::invalid_argument("model type mismatch at " + std::string(path));
    return *p;
  }
  template <typename F>
  void for_each_atomic(F&& f) const {
    for (const auto& l : leaves_) f(l.path, *l.model);
  }

  /// Earliest pending time among leaves and queued injections; INFINITY if none.
  SimTime next_event_time() {
    drain_inbox();
    SimTime t = best(coords_[0]).first;
    if (!pending_.empty()) t = std::min(t, std::get<0>(pending_.begin()->first));
    return t;
  }

  void step(const TraceSink& sink) {
    drain_inbox();
    const auto [tree_t, tree_rank] = best(coords_[0]);
    const bool have_inj = !pending_.empty();
    if (tree_t.is_infinite() && !have_inj) {
      throw std::logic_error("step: no pending event");
    }
    bool take_injection = false;
    if (have_inj) {
      const auto& [it, ir, iseq] = pending_.begin()->first;
      take_injection = std::tie(it, ir) < std::tie(tree_t, tree_rank);
    }
    if (take_injection) {
      auto node = pending_.extract(pending_.begin());
      advance_clock(std::get<0>(node.key()));
      process_injection(std::move(node.mapped()), sink);
    } else {
      advance_clock(tree_t);
      process_internal(tree_rank, sink);
    }
  }

  std::vector<TraceRecord> step() {
    std::vector<TraceRecord> out;
    step([&](const TraceRecord& r) { out.push_back(r); });
    return out;
  }

  /// Steps while the next event time is <= t_end.
  void run_until(SimTime t_end, const TraceSink& sink) {
    if (t_end < clock_) {
      throw std::invalid_argument("run_until: horizon " + t_end.str() + " precedes clock " +
                                  clock_.str());
    }
    while (next_event_time() <= t_end) step(sink);
  }

  std::vector<TraceRecord> run_until(SimTime t_end) {
    std::vector<TraceRecord> out;
    run_until(t_end, [&](const TraceRecord& r) { out.push_back(r); });
    return out;
  }

  /// Enqueues an external event on a top-level input port.
  void inject(EventMsg ev) {
    const Port* p = root_ports_.find(ev.port, PortDirection::input);
    if (p == nullptr) {
      throw std::invalid_argument("inject: '" + ev.port + "' is not a top-level input port");
    }
    if (p->schema != ev.schema) {
      throw std::invalid_argument("inject: schema '" + ev.schema + "' does not match port '" +
                                  ev.port + "' (" + p->schema + ")");
    }
    if (ev.time.is_infinite()) throw std::invalid_argument("inject: time must be finite");
    if (ev.time < clock_) {
      throw SyncFault("inject: stale timestamp " + ev.time.str() + "us behind clock " +
                      clock_.str() + "us on port " + ev.port);
    }
    Injection inj;
    if (auto it = coords_[0].eic.find(ev.port); it != coords_[0].eic.end()) {
      for (const auto& t : it->second) descend(0, t.slot, t.port, 0, inj.deliveries);
    }
    std::size_t rank = kNoRank;
    for (const auto& d : inj.deliveries) rank = std::min(rank, d.leaf);
    const SimTime t = ev.time;
    inj.event = std::move(ev);
    pending_.emplace(std::make_tuple(t, rank, next_seq_++), std::move(inj));
  }

  /// Cross-thread entry point; drained into inject() at the next loop boundary.
  InjectQueue& inbox() { return *inbox_; }

  /// Events that reached top-level output ports since the last call.
  std::vector<EventMsg> take_outputs() { return std::exchange(outbox_, {}); }

private:
  static constexpr std::size_t kNoRank = std::numeric_limits<std::size_t>::max();

  struct Target {
    bool up = false;
    std::size_t slot = 0;
    std::string port;
  };
  using RouteMap = std::unordered_map<std::string, std::vector<Target>>;
  struct ChildRef {
    bool leaf = true;
    std::size_t index = 0;
  };
  using Key = std::tuple<SimTime, std::size_t, std::size_t>;  // (tn, dfs rank, slot)

  struct Coord {
    std::string path;
    std::optional<std::size_t> parent;
    std::size_t slot = 0;
    std::vector<ChildRef> children;
    std::vector<RouteMap> routes;  // by child slot: output port -> targets
    RouteMap eic;
    std::set<Key> schedule;
    std::vector<Key> child_keys;
  };
  struct Leaf {
    std::string path;
    std::unique_ptr<Atomic> model;
    std::size_t parent = 0;
    std::size_t slot = 0;
    SimTime tl;
    SimTime tn;
    std::vector<EventMsg> deferred;
  };
  struct Delivery {
    std::size_t leaf;
    std::size_t msg;
    std::string port;
  };
  struct Injection {
    EventMsg event;
    std::vector<Delivery> deliveries;
  };

  // Returns (coordinator index, subtree depth in levels).
  std::pair<std::size_t, std::size_t> build(const CoupledSpec& spec,
                                            std::optional<std::size_t> parent, std::size_t slot,
                                            std::string path) {
    const std::size_t ci = coords_.size();
    coords_.emplace_back();
    const std::size_t n = spec.components().size();
    {
      Coord& co = coords_[ci];
      co.path = path;
      co.parent = parent;
      co.slot = slot;
      co.children.resize(n);
      co.routes.resize(n);
      for (std::size_t s = 0; s < n; ++s) {
        co.child_keys.emplace_back(kInfinity, kNoRank, s);
        co.schedule.insert(co.child_keys.back());
      }
    }
    auto index_of = [&](const std::string& name) {
      const auto& cs = spec.components();
      return static_cast<std::size_t>(
          std::find_if(cs.begin(), cs.end(), [&](const Component& c) { return c.name == name; }) -
          cs.begin());
    };
    std::size_t depth = 1;
    for (const auto& name : spec.select_order()) {
      const std::size_t idx = index_of(name);
      const Component& comp = spec.components()[idx];
      if (comp.is_atomic()) {
        const std::size_t li = leaves_.size();
        leaves_.push_back(Leaf{path + "/" + name, comp.atomic().clone(), ci, idx, SimTime::zero(),
                               kInfinity, {}});
        coords_[ci].children[idx] = {true, li};
        depth = std::max<std::size_t>(depth, 2);
      } else {
        auto [sub, sub_depth] = build(comp.coupled(), ci, idx, path + "/" + name);
        coords_[ci].children[idx] = {false, sub};
        depth = std::max(depth, sub_depth + 1);
      }
    }
    Coord& co = coords_[ci];
    for (const auto& c : spec.ic()) {
      co.routes[index_of(c.from)][c.from_port].push_back({false, index_of(c.to), c.to_port});
    }
    for (const auto& c : spec.eoc()) {
      co.routes[index_of(c.from)][c.from_port].push_back({true, 0, c.to_port});
    }
    for (const auto& c : spec.eic()) {
      co.eic[c.from_port].push_back({false, index_of(c.to), c.to_port});
    }
    return {ci, depth};
  }

  static std::pair<SimTime, std::size_t> best(const Coord& co) {
    if (co.schedule.empty()) return {kInfinity, kNoRank};
    const auto& k = *co.schedule.begin();
    return {std::get<0>(k), std::get<1>(k)};
  }

  void reschedule(std::size_t li) {
    std::pair<SimTime, std::size_t> key{leaves_[li].tn, li};
    std::size_t c = leaves_[li].parent;
    std::size_t slot = leaves_[li].slot;
    for (;;) {
      Coord& co = coords_[c];
      const auto before = best(co);
      co.schedule.erase(co.child_keys[slot]);
      co.child_keys[slot] = Key{key.first, key.second, slot};
      co.schedule.insert(co.child_keys[slot]);
      const auto after = best(co);
      if (after == before || !co.parent) break;
      key = after;
      slot = co.slot;
      c = *co.parent;
    }
  }

  std::size_t leaf(std::string_view path) const {
    auto it = leaf_index_.find(std::string(path));
    if (it == leaf_index_.end()) {
      throw std::out_of_range("no atomic model at path '" + std::string(path) + "'");
    }
    return it->second;
  }

  void drain_inbox() {
    for (auto& ev : inbox_->drain()) inject(std::move(ev));
  }

  void advance_clock(SimTime t) {
    if (t < clock_) throw std::logic_error("kernel clock would decrease");
    clock_ = t;
    if (opts_.max_events_per_second == 0) return;
    const auto window = t.micros() / 1000000;
    if (window != guard_window_) {
      guard_window_ = window;
      guard_count_ = 0;
    }
    if (++guard_count_ > opts_.max_events_per_second) {
      throw LegitimacyFault("more than " + std::to_string(opts_.max_events_per_second) +
                            " events in simulated second " + std::to_string(window));
    }
  }

  void descend(std::size_t coord, std::size_t slot, const std::string& port, std::size_t msg,
               std::vector<Delivery>& out) const {
    const ChildRef ch = coords_[coord].children[slot];
    if (ch.leaf) {
      out.push_back({ch.index, msg, port});
      return;
    }
    const auto& eic = coords_[ch.index].eic;
    if (auto it = eic.find(port); it != eic.end()) {
      for (const auto& t : it->second) descend(ch.index, t.slot, t.port, msg, out);
    }
  }

  void route_up(std::size_t coord, std::size_t slot, const std::string& port, std::size_t msg,
                std::vector<Delivery>& out, std::vector<std::pair<std::size_t, std::string>>& top) {
    const auto& routes = coords_[coord].routes[slot];
    auto it = routes.find(port);
    if (it == routes.end()) return;
    for (const auto& t : it->second) {
      if (!t.up) {
        descend(coord, t.slot, t.port, msg, out);
      } else if (coords_[coord].parent) {
        route_up(*coords_[coord].parent, coords_[coord].slot, t.port, msg, out, top);
      } else {
        top.emplace_back(msg, t.port);
      }
    }
  }

  void process_internal(std::size_t li, const TraceSink& sink) {
    Leaf& l = leaves_[li];
    const SimTime t = clock_;
    std::vector<EventMsg> outs = l.model->output();
    for (auto& m : outs) {
      const Port* p = l.model->ports().find(m.port, PortDirection::output);
      if (p == nullptr) {
        throw SimulationFault(l.path, t, "output on undeclared port '" + m.port + "'");
      }
      if (p->schema != m.schema) {
        throw SimulationFault(l.path, t,
                              "payload schema '" + m.schema + "' violates port '" + m.port +
                                  "' (" + p->schema + ")");
      }
      m.time = t;
      sink({t, l.path, TraceKind::output, m.port, m.digest()});
    }
    l.model->internal_transition();
    sink({t, l.path, TraceKind::internal, "", 0});
    l.tl = t;
    if (!l.deferred.empty()) {
      auto bag = std::exchange(l.deferred, {});
      for (auto& m : bag) {
        m.time = t;
        sink({t, l.path, TraceKind::external, m.port, m.digest()});
      }
      l.model->external_transition(SimTime::zero(), bag);
    }
    l.tn = t + l.model->time_advance();
    reschedule(li);

    std::vector<Delivery> deliveries;
    std::vector<std::pair<std::size_t, std::string>> top;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      route_up(l.parent, l.slot, outs[i].port, i, deliveries, top);
    }
    emit_top(outs, top);
    deliver(outs, std::move(deliveries), sink);
  }

  void process_injection(Injection inj, const TraceSink& sink) {
    const SimTime t = clock_;
    inj.event.time = t;
    sink({t, name_, TraceKind::injected, inj.event.port, inj.event.digest()});
    std::vector<EventMsg> msgs{std::move(inj.event)};
    deliver(msgs, std::move(inj.deliveries), sink);
  }

  void emit_top(const std::vector<EventMsg>& outs,
                std::vector<std::pair<std::size_t, std::string>>& top) {
    std::sort(top.begin(), top.end());
    top.erase(std::unique(top.begin(), top.end()), top.end());
    for (const auto& [msg, port] : top) {
      EventMsg m = outs[msg];
      m.port = port;
      outbox_.push_back(std::move(m));
    }
  }

  // Applies routed messages as external transitions, one bag per receiving
  // leaf, receivers in select order. A receiver that is itself imminent keeps
  // the bag until its own internal transition at this time has run.
  void deliver(const std::vector<EventMsg>& msgs, std::vector<Delivery> deliveries,
               const TraceSink& sink) {
    const SimTime t = clock_;
    std::sort(deliveries.begin(), deliveries.end(), [](const Delivery& a, const Delivery& b) {
      return std::tie(a.leaf, a.msg, a.port) < std::tie(b.leaf, b.msg, b.port);
    });
    deliveries.erase(std::unique(deliveries.begin(), deliveries.end(),
                                 [](const Delivery& a, const Delivery& b) {
                                   return a.leaf == b.leaf && a.msg == b.msg && a.port == b.port;
                                 }),
                     deliveries.end());
    std::size_t i = 0;
    while (i < deliveries.size()) {
      const std::size_t li = deliveries[i].leaf;
      Leaf& l = leaves_[li];
      std::vector<EventMsg> bag;
      for (; i < deliveries.size() && deliveries[i].leaf == li; ++i) {
        EventMsg m = msgs[deliveries[i].msg];
        m.port = deliveries[i].port;
        m.time = t;
        const Port* p = l.model->ports().find(m.port, PortDirection::input);
        if (p == nullptr || p->schema != m.schema) {
          throw SimulationFault(l.path, t,
                                "payload schema '" + m.schema + "' violates input port '" +
                                    m.port + "'");
        }
        bag.push_back(std::move(m));
      }
      if (l.tn == t) {
        for (auto& m : bag) l.deferred.push_back(std::move(m));
        continue;
      }
      if (l.tn < t) throw SimulationFault(l.path, t, "elapsed time exceeds time advance");
      const SimTime elapsed = t - l.tl;
      for (const auto& m : bag) sink({t, l.path, TraceKind::external, m.port, m.digest()});
      l.model->external_transition(elapsed, bag);
      l.tl = t;
      l.tn = t + l.model->time_advance();
      reschedule(li);
    }
  }

  std::string name_;
  RootOptions opts_;
  PortSet root_ports_;
  std::vector<Coord> coords_;
  std::vector<Leaf> leaves_;
  std::unordered_map<std::string, std::size_t> leaf_index_;
  std::size_t depth_ = 1;
  SimTime clock_;
  std::map<std::tuple<SimTime, std::size_t, std::uint64_t>, Injection> pending_;
  std::uint64_t next_seq_ = 0;
  std::unique_ptr<InjectQueue> inbox_;
  std::vector<EventMsg> outbox_;
  std::uint64_t guard_window_ = 0;
  std::uint64_t guard_count_ = 0;
};

inline RootCoordinator build_root(const CoupledSpec& model, RootOptions opts = {}) {
  return RootCoordinator(model, opts);
}

}  // namespace devsnet::devs
