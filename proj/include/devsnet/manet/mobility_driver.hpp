#pragma once

#include <string>
#include <vector>

#include "devsnet/core/rng.hpp"
#include "devsnet/devs/model.hpp"
#include "devsnet/manet/mobility.hpp"
#include "devsnet/manet/packet.hpp"

namespace devsnet::manet {

enum class MobilityKind { fixed, random_waypoint, manhattan, trace };

struct MobilityConfig {
  MobilityKind kind = MobilityKind::fixed;
  RandomWaypointParams waypoint;
  ManhattanParams manhattan;
  /// Sampling period of position updates for the stochastic models.
  SimTime update_interval = SimTime::ms(100);
};

/// Moves one node and publishes PositionUpdate on "pos". A ControlEvent on
/// "control" toggles the node's enabled flag and is republished at once.
class MobilityDriver : public devs::AtomicModel<MobilityDriver> {
 public:
  MobilityDriver(NodeState initial, MobilityConfig cfg, Rng rng,
                 std::vector<TracePoint> trace = {})
      : node_(std::move(initial)), cfg_(std::move(cfg)), rng_(std::move(rng)),
        trace_(std::move(trace)) {
    if (cfg_.kind != MobilityKind::fixed && cfg_.update_interval == SimTime::zero()) {
      throw std::invalid_argument("mobility update_interval must be > 0");
    }
    // Samples at time zero give the starting position.
    while (trace_idx_ < trace_.size() && trace_[trace_idx_].time == SimTime::zero()) {
      node_.position = trace_[trace_idx_++].position;
    }
    add_input("control", std::string(schema::control));
    add_output("pos", std::string(schema::position));
    plan();
  }

  SimTime time_advance() const override {
    if (dirty_) return SimTime::zero();
    return next_.is_infinite() ? kInfinity : next_ - now_;
  }

  std::vector<devs::EventMsg> output() const override {
    const NodeState& s = dirty_ ? node_ : upcoming_;
    return {emit("pos", encode(PositionUpdate{s.node_id, s.position, s.enabled}))};
  }

  void internal_transition() override {
    if (dirty_) {
      dirty_ = false;
      return;
    }
    now_ = next_;
    node_ = upcoming_;
    plan();
  }

  void external_transition(SimTime elapsed, std::span<const devs::EventMsg> bag) override {
    now_ = now_ + elapsed;
    for (const auto& m : bag) {
      const auto c = decode_control(m.payload);
      node_.enabled = c.enable;
      upcoming_.enabled = c.enable;
      dirty_ = true;
    }
  }

  const NodeState& node() const { return node_; }

 private:
  // Computes the next update instant and the state the node will have then.
  void plan() {
    upcoming_ = node_;
    switch (cfg_.kind) {
      case MobilityKind::fixed:
        next_ = kInfinity;
        return;
      case MobilityKind::random_waypoint:
        next_ = now_ + cfg_.update_interval;
        upcoming_ = random_waypoint_step(node_, cfg_.update_interval, cfg_.waypoint, rng_);
        return;
      case MobilityKind::manhattan:
        next_ = now_ + cfg_.update_interval;
        upcoming_ = manhattan_step(node_, cfg_.manhattan, cfg_.update_interval, rng_);
        return;
      case MobilityKind::trace:
        if (trace_idx_ >= trace_.size()) {
          next_ = kInfinity;
          return;
        }
        next_ = trace_[trace_idx_].time;
        upcoming_.position = trace_[trace_idx_].position;
        ++trace_idx_;
        return;
    }
  }

  NodeState node_;
  NodeState upcoming_;
  MobilityConfig cfg_;
  Rng rng_;
  std::vector<TracePoint> trace_;
  std::size_t trace_idx_ = 0;
  SimTime now_;
  SimTime next_;
  bool dirty_ = false;
};

}  // namespace devsnet::manet
