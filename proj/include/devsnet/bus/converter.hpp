#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "devsnet/bus/endpoint.hpp"
#include "devsnet/devs/model.hpp"

namespace devsnet::bus {

/// Client end of one endpoint session: request/grant exchanges with timeout.
class BusLink {
 public:
  BusLink(std::unique_ptr<Transport> t, std::uint32_t endpoint_id,
          std::chrono::milliseconds timeout = std::chrono::seconds(5))
      : t_(std::move(t)), id_(endpoint_id), timeout_(timeout) {}

  std::uint32_t endpoint_id() const { return id_; }

  void send_event(SimTime t, const std::string& port, const Bytes& payload) {
    t_->send({MsgType::event, t, id_, port, payload});
    ++messages_;
  }

  struct Reply {
    std::vector<BusMessage> events;
    SimTime next;
  };

  Reply request(SimTime t) { return exchange({MsgType::next_time_request, t, id_, {}, {}}); }
  Reply grant(SimTime g) { return exchange({MsgType::next_time_grant, g, id_, {}, {}}); }

  void fault(const std::string& why) {
    try {
      t_->send({MsgType::fault, {}, id_, {}, to_bytes(why)});
    } catch (const TransportError&) {
    }
  }

  std::uint64_t messages() const { return messages_; }

 private:
  Reply exchange(const BusMessage& m) {
    t_->send(m);
    ++messages_;
    Reply r;
    for (;;) {
      std::optional<BusMessage> in;
      try {
        in = t_->receive(timeout_);
      } catch (const TransportError& e) {
        throw BusFault("endpoint " + std::to_string(id_) + ": " + e.what());
      }
      if (!in) {
        throw BusFault("endpoint " + std::to_string(id_) + " timed out after " +
                       std::to_string(timeout_.count()) + " ms");
      }
      ++messages_;
      switch (in->type) {
        case MsgType::event:
          r.events.push_back(std::move(*in));
          break;
        case MsgType::ack:
          r.next = in->time;
          return r;
        case MsgType::fault:
          throw BusFault("endpoint " + std::to_string(id_) + " reported fault: " +
                         std::string(in->payload.begin(), in->payload.end()));
        default:
          throw BusFault("endpoint " + std::to_string(id_) + " sent unexpected " +
                         std::string(to_string(in->type)));
      }
    }
  }

  std::unique_ptr<Transport> t_;
  std::uint32_t id_;
  std::chrono::milliseconds timeout_;
  std::uint64_t messages_ = 0;
};

/// Protocol converter: presents a bus endpoint as a DEVS atomic so it can be
/// coupled like any other leaf. Clones share the link, so a converter must
/// back exactly one simulator leaf.
class Converter : public devs::AtomicModel<Converter> {
 public:
  Converter(ConverterContract contract, std::shared_ptr<BusLink> link)
      : contract_(std::move(contract)), link_(std::move(link)) {
    contract_.validate();
    for (const auto& p : contract_.ports) {
      if (p.direction == devs::PortDirection::input) add_input(p.name, p.schema);
      else add_output(p.name, p.schema);
    }
  }

  SimTime time_advance() const override {
    const SimTime t = next_event();
    return t.is_infinite() ? kInfinity : t - now_;
  }

  std::vector<devs::EventMsg> output() const override {
    fire();
    return fired_;
  }

  void internal_transition() override {
    fire();
    now_ = fired_at_;
    fired_.clear();
    fired_valid_ = false;
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg> bag) override {
    now_ = now_ + elapsed;
    for (const auto& m : bag) link_->send_event(now_, m.port, m.payload);
    absorb(link_->request(now_), now_);
  }

  SimTime last_grant() const { return last_grant_; }
  const ConverterContract& contract() const { return contract_; }

 private:
  SimTime rounded(SimTime t) const {
    if (t.is_infinite() || contract_.nature != TimeNature::discrete_time) return t;
    const auto step = contract_.step.micros();
    const auto us = t.micros();
    return SimTime::us((us + step - 1) / step * step);
  }

  SimTime next_event() const {
    if (!endpoint_next_) absorb(link_->request(now_), now_);
    SimTime t = rounded(*endpoint_next_);
    if (contract_.nature == TimeNature::untimed) t = kInfinity;
    if (!held_.empty()) t = std::min(t, held_.begin()->first);
    return t;
  }

  // Files reply events by timestamp; `at` is the instant of the exchange.
  void absorb(BusLink::Reply r, SimTime at) const {
    for (auto& e : r.events) {
      // The kernel clock `at` is never behind the last grant, so an event
      // stamped before it would land in the past.
      const SimTime stamp = contract_.nature == TimeNature::untimed ? at : rounded(e.time);
      if (stamp < at) {
        link_->fault("causality violation");
        throw CausalityFault(link_->endpoint_id(), e.time, std::max(at, last_grant_));
      }
      const auto* p = ports().find(e.port, devs::PortDirection::output);
      if (p == nullptr) {
        link_->fault("unknown port");
        throw BusFault("endpoint " + std::to_string(link_->endpoint_id()) +
                       " emitted on undeclared port '" + e.port + "'");
      }
      held_.emplace(stamp, devs::EventMsg{p->name, p->schema, std::move(e.payload), stamp});
    }
    endpoint_next_ = r.next;
  }

  // Grants the imminent instant once and collects what fires there.
  void fire() const {
    if (fired_valid_) return;
    const SimTime t = next_event();
    fired_at_ = t;
    if (contract_.nature != TimeNature::untimed && rounded(*endpoint_next_) == t) {
      last_grant_ = t;
      absorb(link_->grant(t), t);
    }
    auto end = held_.upper_bound(t);
    for (auto it = held_.begin(); it != end; ++it) fired_.push_back(std::move(it->second));
    held_.erase(held_.begin(), end);
    fired_valid_ = true;
  }

  ConverterContract contract_;
  std::shared_ptr<BusLink> link_;
  SimTime now_;
  mutable std::optional<SimTime> endpoint_next_;
  mutable std::multimap<SimTime, devs::EventMsg> held_;
  mutable std::vector<devs::EventMsg> fired_;
  mutable bool fired_valid_ = false;
  mutable SimTime fired_at_;
  mutable SimTime last_grant_;
};

/// Wraps an endpoint reachable through `t` as a DEVS leaf prototype.
inline std::shared_ptr<Converter> wrap(ConverterContract contract, std::unique_ptr<Transport> t,
                                       std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
  auto link = std::make_shared<BusLink>(std::move(t), contract.endpoint_id, timeout);
  return std::make_shared<Converter>(std::move(contract), std::move(link));
}

}  // namespace devsnet::bus
