#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "devsnet/bus/transport.hpp"
#include "devsnet/devs/model.hpp"

namespace devsnet::bus {

/// Failure of the bus protocol: causality violation, timeout, malformed
/// exchange or a fault reported by the peer.
class BusFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CausalityFault : public BusFault {
 public:
  CausalityFault(std::uint32_t endpoint, SimTime event_time, SimTime grant)
      : BusFault("causality violation: endpoint " + std::to_string(endpoint) + " emitted an event at " +
                 event_time.str() + " after grant " + grant.str()),
        endpoint_(endpoint), event_time_(event_time), grant_(grant) {}

  std::uint32_t endpoint() const { return endpoint_; }
  SimTime event_time() const { return event_time_; }
  SimTime grant() const { return grant_; }

 private:
  std::uint32_t endpoint_;
  SimTime event_time_;
  SimTime grant_;
};

enum class TimeNature { untimed, discrete_time, discrete_event };

/// What a converter needs to know about the endpoint it wraps.
struct ConverterContract {
  std::uint32_t endpoint_id = 0;
  std::vector<devs::Port> ports;
  TimeNature nature = TimeNature::discrete_event;
  /// discrete_time only.
  SimTime step;

  void validate() const {
    if (nature == TimeNature::discrete_time && step == SimTime::zero()) {
      throw std::invalid_argument("discrete_time contract needs a positive step");
    }
    for (const auto& p : ports) {
      if (p.name.empty() || p.schema.empty()) {
        throw std::invalid_argument("contract ports need a name and a schema");
      }
      if (p.name.find_first_of(" \t\n") != std::string::npos) {
        throw std::invalid_argument("contract port name '" + p.name + "' contains whitespace");
      }
    }
  }
};

/// Endpoint side of the bus protocol.
///
/// Requests and grants are answered with zero or more events followed by an
/// ack carrying the endpoint's next local event time. Input events get no
/// reply; they are applied as one bag when the next request arrives.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual SimTime next_time() const = 0;
  virtual void input(const BusMessage& ev) = 0;
  /// Applies buffered inputs at t and returns the events they provoke.
  virtual std::vector<BusMessage> settle(SimTime t) = 0;
  /// Runs local events due at g and returns their outputs.
  virtual std::vector<BusMessage> advance(SimTime g) = 0;
};

/// Serves one endpoint over a transport until a fault or disconnect.
class EndpointServer {
 public:
  EndpointServer(Endpoint& ep, Transport& t, std::uint32_t id) : ep_(ep), t_(t), id_(id) {}

  /// Handles one message; returns false once the session is over.
  bool handle(const BusMessage& m) {
    switch (m.type) {
      case MsgType::event:
        ep_.input(m);
        return true;
      case MsgType::next_time_request:
        reply(ep_.settle(m.time), m.time);
        return true;
      case MsgType::next_time_grant: {
        auto out = ep_.advance(m.time);
        auto more = ep_.settle(m.time);
        out.insert(out.end(), more.begin(), more.end());
        reply(std::move(out), m.time);
        return true;
      }
      case MsgType::fault:
        fault_ = std::string(m.payload.begin(), m.payload.end());
        return false;
      case MsgType::ack:
        return true;
    }
    return true;
  }

  void run(std::chrono::milliseconds poll = std::chrono::milliseconds(50)) {
    try {
      while (!stop_) {
        auto m = t_.receive(poll);
        if (m && !handle(*m)) return;
      }
    } catch (const TransportError&) {
    }
  }

  void stop() { stop_ = true; }
  const std::string& fault() const { return fault_; }

 private:
  void reply(std::vector<BusMessage> events, SimTime) {
    for (auto& e : events) {
      e.type = MsgType::event;
      e.endpoint_id = id_;
      t_.send(e);
    }
    t_.send({MsgType::ack, ep_.next_time(), id_, {}, {}});
  }

  Endpoint& ep_;
  Transport& t_;
  std::uint32_t id_;
  std::atomic<bool> stop_{false};
  std::string fault_;
};

// ------------------------------------------------------------ sample endpoints

/// Untimed: echoes every input on port "out".
class EchoEndpoint : public Endpoint {
 public:
  SimTime next_time() const override { return kInfinity; }
  void input(const BusMessage& ev) override { inbox_.push_back(ev); }
  std::vector<BusMessage> settle(SimTime t) override {
    std::vector<BusMessage> out;
    for (auto& m : inbox_) out.push_back({MsgType::event, t, 0, "out", m.payload});
    inbox_.clear();
    return out;
  }
  std::vector<BusMessage> advance(SimTime) override { return {}; }

 private:
  std::vector<BusMessage> inbox_;
};

/// Discrete time: emits an incrementing counter on "out" every `step`.
class TickerEndpoint : public Endpoint {
 public:
  explicit TickerEndpoint(SimTime step) : step_(step) {}
  SimTime next_time() const override { return step_ * (count_ + 1); }
  void input(const BusMessage&) override {}
  std::vector<BusMessage> settle(SimTime) override { return {}; }
  std::vector<BusMessage> advance(SimTime g) override {
    std::vector<BusMessage> out;
    while (next_time() <= g) {
      ++count_;
      ByteWriter w;
      w.u64(count_);
      out.push_back({MsgType::event, step_ * count_, 0, "out", w.bytes()});
    }
    return out;
  }

 private:
  SimTime step_;
  std::uint64_t count_ = 0;
};

/// Replays a fixed list of events. Each entry fires when granted `due` and is
/// stamped `stamp`, which lets tests script causality violations.
class ScriptedEndpoint : public Endpoint {
 public:
  struct Entry {
    SimTime due;
    SimTime stamp;
    std::string port;
    Bytes payload;
  };

  explicit ScriptedEndpoint(std::vector<Entry> script) : script_(std::move(script)) {}

  SimTime next_time() const override {
    return idx_ < script_.size() ? script_[idx_].due : kInfinity;
  }
  void input(const BusMessage& ev) override { received_.push_back(ev); }
  std::vector<BusMessage> settle(SimTime) override { return {}; }
  std::vector<BusMessage> advance(SimTime g) override {
    std::vector<BusMessage> out;
    while (idx_ < script_.size() && script_[idx_].due <= g) {
      const auto& e = script_[idx_++];
      out.push_back({MsgType::event, e.stamp, 0, e.port, e.payload});
    }
    return out;
  }

  const std::vector<BusMessage>& received() const { return received_; }

 private:
  std::vector<Entry> script_;
  std::size_t idx_ = 0;
  std::vector<BusMessage> received_;
};

/// Discrete event: hosts a DEVS atomic behind the bus protocol.
class AutomatonEndpoint : public Endpoint {
 public:
  explicit AutomatonEndpoint(std::unique_ptr<devs::Atomic> model) : model_(std::move(model)) {}

  SimTime next_time() const override { return tl_ + model_->time_advance(); }

  void input(const BusMessage& ev) override {
    const auto* p = model_->ports().find(ev.port, devs::PortDirection::input);
    if (p == nullptr) throw BusFault("automaton endpoint: unknown input port '" + ev.port + "'");
    bag_.push_back({ev.port, p->schema, ev.payload, ev.time});
  }

  std::vector<BusMessage> settle(SimTime t) override {
    if (bag_.empty()) return {};
    model_->external_transition(t - tl_, bag_);
    tl_ = t;
    bag_.clear();
    return {};
  }

  std::vector<BusMessage> advance(SimTime g) override {
    std::vector<BusMessage> out;
    if (next_time() != g) return out;
    for (auto& m : model_->output()) out.push_back({MsgType::event, g, 0, m.port, std::move(m.payload)});
    model_->internal_transition();
    tl_ = g;
    return out;
  }

 private:
  std::unique_ptr<devs::Atomic> model_;
  SimTime tl_;
  std::vector<devs::EventMsg> bag_;
};

/// Contract mirroring the ports of a hosted atomic.
inline ConverterContract contract_for(const devs::Atomic& model, std::uint32_t id,
                                      TimeNature nature = TimeNature::discrete_event) {
  return {id, model.ports().all(), nature, {}};
}

}  // namespace devsnet::bus
