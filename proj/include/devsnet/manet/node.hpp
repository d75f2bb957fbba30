#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "devsnet/core/time.hpp"

namespace devsnet::manet {

using NodeId = std::uint32_t;
inline constexpr NodeId kBroadcast = 0xFFFFFFFFu;

struct Vec2 {
  double x = 0;
  double y = 0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double k) { return {a.x * k, a.y * k}; }
  bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Axis-aligned scenario area [0, width] x [0, height].
struct BoundingBox {
  double width = 1000;
  double height = 1000;

  bool contains(Vec2 p, double eps = 1e-9) const {
    return p.x >= -eps && p.y >= -eps && p.x <= width + eps && p.y <= height + eps;
  }
  Vec2 clamp(Vec2 p) const {
    return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)};
  }
};

struct NodeState {
  NodeId node_id = 0;
  Vec2 position;
  std::optional<Vec2> waypoint;
  /// meters / second
  double speed = 0;
  bool enabled = true;
  /// Remaining pause at a reached waypoint (random waypoint).
  SimTime pause_left;
  /// Unit axis direction of travel (Manhattan); zero when unset.
  Vec2 heading;
};

}  // namespace devsnet::manet
