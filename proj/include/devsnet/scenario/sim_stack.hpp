#pragma once

#include <string>

#include "devsnet/devs/root.hpp"
#include "devsnet/scenario/assembly.hpp"
#include "devsnet/vcs/stack.hpp"

namespace devsnet::scenario {

/// Simulation-mode backend of the socket API: sends enter the scenario model
/// as send requests on "app<node>" and poll() advances simulated time,
/// handing delivered records to the destination sockets. Traffic sources of
/// the scenario keep running alongside.
class SimulationStack : public vcs::VirtualStack {
 public:
  explicit SimulationStack(const ScenarioConfig& cfg)
      : VirtualStack(vcs::Mode::simulation, cfg.mtu), root_(devs::build_root(build_scenario(cfg))),
        node_count_(cfg.node_count) {}

  /// Runs every event dated up to now() + budget.
  void poll(SimTime budget) override {
    now_ = now_ + budget;
    root_.run_until(now_, [this](const devs::TraceRecord& r) { trace_.push_back(r); });
    for (const auto& m : root_.take_outputs()) {
      if (m.port == "recv") dispatch(manet::decode_app_record(m.payload));
    }
  }

  SimTime now() const { return now_; }
  const devs::RootCoordinator& kernel() const { return root_; }
  const std::vector<devs::TraceRecord>& trace() const { return trace_; }

 protected:
  void check_node(NodeId n) const override {
    if (n >= node_count_) {
      throw vcs::VcsError("unknown node " + std::to_string(n) + " (node_count " + std::to_string(node_count_) + ")");
    }
  }

  void transmit(const manet::AppRecord& rec) override {
    manet::SendRequest req{rec.src_port, rec.dst, rec.dst_port, rec.data};
    root_.inject({"app" + std::to_string(rec.src), std::string(manet::schema::send_request), manet::encode(req), now_});
  }

 private:
  devs::RootCoordinator root_;
  std::uint32_t node_count_;
  SimTime now_;
  std::vector<devs::TraceRecord> trace_;
};

}  // namespace devsnet::scenario
