#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "devsnet/bus/endpoint.hpp"
#include "devsnet/manet/packet.hpp"
#include "devsnet/vcs/loopback.hpp"
#include "devsnet/vcs/types.hpp"

namespace devsnet::bus {

enum class BusRole { vcs_side, simulator_side };

/// A VCS output travelling toward the network, stamped with the time it was
/// produced (simulated clock in simulation mode, wall offset otherwise).
struct Outbound {
  SimTime time;
  manet::AppRecord record;
};

/// Bus between the VCS and the kernel. In simulation mode outputs are held
/// until the granted time reaches their stamp; in the other modes they pass
/// through untouched and in submission order.
class VcsSideBus {
 public:
  explicit VcsSideBus(vcs::Mode mode) : mode_(mode) {}

  vcs::Mode mode() const { return mode_; }

  void submit(Outbound o) {
    std::lock_guard lock(mu_);
    if (mode_ == vcs::Mode::simulation) {
      if (o.time < grant_) {
        throw CausalityFault(o.record.src, o.time, grant_);
      }
      held_.emplace(o.time, std::move(o));
    } else {
      ready_.push_back(std::move(o));
    }
  }

  /// Outputs whose stamp is at or before `grant`.
  std::vector<Outbound> release(SimTime grant) {
    std::lock_guard lock(mu_);
    std::vector<Outbound> out;
    if (mode_ == vcs::Mode::simulation) {
      grant_ = std::max(grant_, grant);
      auto end = held_.upper_bound(grant);
      for (auto it = held_.begin(); it != end; ++it) out.push_back(std::move(it->second));
      held_.erase(held_.begin(), end);
    } else {
      out.swap(ready_);
    }
    forwarded_ += out.size();
    return out;
  }

  std::size_t held() const {
    std::lock_guard lock(mu_);
    return held_.size() + ready_.size();
  }
  std::uint64_t forwarded() const { return forwarded_; }

 private:
  vcs::Mode mode_;
  mutable std::mutex mu_;
  std::multimap<SimTime, Outbound> held_;
  std::vector<Outbound> ready_;
  SimTime grant_;
  std::uint64_t forwarded_ = 0;
};

/// Bus between the kernel and the network medium. Simulation routes into the
/// simulated channel, emulation writes to the loopback path, and execution
/// leaves it inert because no simulator takes part.
class SimulatorSideBus {
 public:
  using Sink = std::function<void(const Outbound&)>;

  SimulatorSideBus(vcs::Mode mode, Sink simulated, Sink physical)
      : mode_(mode), simulated_(std::move(simulated)), physical_(std::move(physical)) {}

  bool inert() const { return mode_ == vcs::Mode::execution; }

  void route(const Outbound& o) {
    switch (mode_) {
      case vcs::Mode::simulation:
        simulated_(o);
        break;
      case vcs::Mode::emulation:
        physical_(o);
        break;
      case vcs::Mode::execution:
        return;
    }
    ++messages_;
  }

  std::uint64_t messages() const { return messages_; }

 private:
  vcs::Mode mode_;
  Sink simulated_;
  Sink physical_;
  std::uint64_t messages_ = 0;
};

/// Emulation backend: application traffic crosses both buses in pass-through
/// form and reaches the loopback medium unmodified.
class EmulationStack : public vcs::LoopbackStack {
 public:
  explicit EmulationStack(std::size_t node_count, std::uint16_t base_port = 20000, std::size_t mtu = 1500)
      : LoopbackStack(node_count, base_port, vcs::Mode::emulation, mtu),
        vcs_bus_(vcs::Mode::emulation),
        sim_bus_(vcs::Mode::emulation, [](const Outbound&) {},
                 [this](const Outbound& o) { LoopbackStack::transmit(o.record); }),
        epoch_(std::chrono::steady_clock::now()) {}

  const VcsSideBus& vcs_bus() const { return vcs_bus_; }
  const SimulatorSideBus& simulator_bus() const { return sim_bus_; }

 protected:
  void transmit(const manet::AppRecord& rec) override {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - epoch_);
    vcs_bus_.submit({SimTime::us(static_cast<std::uint64_t>(us.count())), rec});
    for (const auto& o : vcs_bus_.release(kInfinity)) sim_bus_.route(o);
  }

 private:
  VcsSideBus vcs_bus_;
  SimulatorSideBus sim_bus_;
  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace devsnet::bus
