#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <vector>

#include "devsnet/bus/converter.hpp"

namespace devsnet::bus {

/// Conservative barrier over several endpoints. Each step asks every endpoint
/// for its next local time and grants the minimum of those and the kernel's
/// own next event time to all of them.
class DevsBus {
 public:
  explicit DevsBus(std::chrono::milliseconds timeout = std::chrono::seconds(5)) : timeout_(timeout) {}

  void attach(std::uint32_t endpoint_id, std::unique_ptr<Transport> t) {
    if (links_.count(endpoint_id) != 0) {
      throw std::invalid_argument("endpoint " + std::to_string(endpoint_id) + " already attached");
    }
    links_.emplace(endpoint_id, std::make_unique<BusLink>(std::move(t), endpoint_id, timeout_));
  }

  /// Forwards a kernel event to an endpoint; applied at the next request.
  void post(std::uint32_t endpoint_id, SimTime t, const std::string& port, const Bytes& payload) {
    if (t < now_) {
      throw CausalityFault(endpoint_id, t, now_);
    }
    link(endpoint_id).send_event(t, port, payload);
    pending_input_ = std::max(pending_input_, t);
  }

  struct Step {
    SimTime grant;
    /// Events from this step, ordered by (time, endpoint id).
    std::vector<BusMessage> events;
  };

  Step sync_advance(SimTime kernel_next) {
    Step step;
    const SimTime at = std::max(now_, pending_input_);
    SimTime g = kernel_next;
    for (auto& [id, l] : links_) {
      auto r = l->request(at);
      collect(id, r.events, at, step.events);
      next_[id] = r.next;
      g = std::min(g, r.next);
    }
    if (!step.events.empty()) g = std::min(g, at);
    step.grant = g;
    if (g.is_infinite()) return step;
    if (g < now_) throw CausalityFault(0, g, now_);
    for (auto& [id, l] : links_) {
      auto r = l->grant(g);
      collect(id, r.events, g, step.events);
      next_[id] = r.next;
    }
    now_ = g;
    ++grants_;
    std::stable_sort(step.events.begin(), step.events.end(),
                     [](const BusMessage& a, const BusMessage& b) { return a.time < b.time; });
    return step;
  }

  SimTime now() const { return now_; }
  std::uint64_t grants() const { return grants_; }
  std::uint64_t messages() const {
    std::uint64_t n = 0;
    for (const auto& [id, l] : links_) n += l->messages();
    return n;
  }

 private:
  BusLink& link(std::uint32_t id) {
    auto it = links_.find(id);
    if (it == links_.end()) throw std::invalid_argument("unknown endpoint " + std::to_string(id));
    return *it->second;
  }

  void collect(std::uint32_t id, std::vector<BusMessage>& in, SimTime floor, std::vector<BusMessage>& out) {
    for (auto& e : in) {
      if (e.time.is_infinite() || e.time < floor) {
        link(id).fault("causality violation");
        throw CausalityFault(id, e.time, floor);
      }
      e.endpoint_id = id;
      out.push_back(std::move(e));
    }
  }

  std::chrono::milliseconds timeout_;
  std::map<std::uint32_t, std::unique_ptr<BusLink>> links_;
  std::map<std::uint32_t, SimTime> next_;
  SimTime now_;
  SimTime pending_input_;
  std::uint64_t grants_ = 0;
};

}  // namespace devsnet::bus
