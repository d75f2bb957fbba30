#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "devsnet/core/rng.hpp"
#include "devsnet/manet/node.hpp"

namespace devsnet::manet {

struct RandomWaypointParams {
  BoundingBox box;
  double v_min = 1.0;
  double v_max = 5.0;
  SimTime pause;
};

/// Advances a node for dt under random waypoint mobility. On reaching its
/// waypoint the node pauses, then draws a uniform waypoint in the box and a
/// uniform speed in [v_min, v_max].
inline NodeState random_waypoint_step(NodeState s, SimTime dt, const RandomWaypointParams& p,
                                      Rng& rng) {
  if (dt.is_infinite()) throw std::invalid_argument("random_waypoint_step: dt must be finite");
  std::uint64_t remaining_us = dt.micros();
  for (;;) {
    if (s.pause_left > SimTime::zero()) {
      const auto used = std::min(remaining_us, s.pause_left.micros());
      s.pause_left = s.pause_left - SimTime::us(used);
      remaining_us -= used;
      if (s.pause_left > SimTime::zero()) break;
    }
    if (!s.waypoint || distance(s.position, *s.waypoint) < 1e-9) {
      s.waypoint = Vec2{rng.uniform(0, p.box.width), rng.uniform(0, p.box.height)};
      s.speed = rng.uniform(p.v_min, p.v_max);
    }
    if (remaining_us == 0 || s.speed <= 0) break;
    const double remaining_s = static_cast<double>(remaining_us) / 1e6;
    const double d = distance(s.position, *s.waypoint);
    const double travel = s.speed * remaining_s;
    if (travel < d) {
      s.position = p.box.clamp(s.position + (*s.waypoint - s.position) * (travel / d));
      break;
    }
    s.position = *s.waypoint;
    const auto spent = static_cast<std::uint64_t>(std::llround(d / s.speed * 1e6));
    remaining_us -= std::min(remaining_us, std::max<std::uint64_t>(spent, 1));
    s.pause_left = p.pause;
  }
  return s;
}

struct ManhattanParams {
  BoundingBox box;
  double pitch = 100.0;
  /// Probabilities of going straight, left, right at an intersection.
  std::array<double, 3> turn_probs{0.5, 0.25, 0.25};
};

namespace detail {

inline bool on_grid(double v, double pitch) {
  const double k = v / pitch;
  return std::abs(k - std::round(k)) * pitch < 1e-6;
}
inline double snap(double v, double pitch) { return std::round(v / pitch) * pitch; }

}  // namespace detail

/// Advances a node for dt along Manhattan grid lines spaced `pitch` apart.
/// Throws std::invalid_argument when the node does not start on a grid line.
inline NodeState manhattan_step(NodeState s, const ManhattanParams& p, SimTime dt, Rng& rng) {
  using detail::on_grid;
  using detail::snap;
  if (dt.is_infinite()) throw std::invalid_argument("manhattan_step: dt must be finite");
  const bool on_h = on_grid(s.position.y, p.pitch);  // on a horizontal street
  const bool on_v = on_grid(s.position.x, p.pitch);  // on a vertical street
  if (!on_h && !on_v) {
    throw std::invalid_argument("manhattan_step: node " + std::to_string(s.node_id) +
                                " is not on a grid line");
  }
  if (on_h) s.position.y = snap(s.position.y, p.pitch);
  if (on_v) s.position.x = snap(s.position.x, p.pitch);

  auto at_intersection = [&] {
    return on_grid(s.position.x, p.pitch) && on_grid(s.position.y, p.pitch);
  };
  auto can_go = [&](Vec2 dir) {
    if (dir.x == 0 && dir.y == 0) return false;
    return p.box.contains(s.position + dir * p.pitch, 1e-6);
  };
  auto consistent = [&](Vec2 dir) {
    if (dir.x != 0 && !on_grid(s.position.y, p.pitch)) return false;
    if (dir.y != 0 && !on_grid(s.position.x, p.pitch)) return false;
    return dir.x != 0 || dir.y != 0;
  };

  if (!consistent(s.heading)) {
    std::vector<Vec2> options;
    for (Vec2 d : {Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1}, Vec2{0, -1}}) {
      if (consistent(d) && (can_go(d) || !at_intersection())) options.push_back(d);
    }
    if (options.empty()) return s;
    s.heading = options[rng.below(options.size())];
  }

  double remaining = s.speed * (static_cast<double>(dt.micros()) / 1e6);
  while (remaining > 1e-12) {
    if (at_intersection()) {
      const Vec2 h = s.heading;
      const std::array<Vec2, 3> rel{h, Vec2{-h.y, h.x}, Vec2{h.y, -h.x}};
      const double u = rng.uniform();
      std::size_t pick = 2;
      if (u < p.turn_probs[0]) pick = 0;
      else if (u < p.turn_probs[0] + p.turn_probs[1]) pick = 1;
      Vec2 chosen = rel[pick];
      if (!can_go(chosen)) {
        chosen = Vec2{};
        for (const auto& d : rel) {
          if (can_go(d)) {
            chosen = d;
            break;
          }
        }
        if (chosen.x == 0 && chosen.y == 0) chosen = h * -1.0;
        if (!can_go(chosen)) break;  // box smaller than one block
      }
      s.heading = chosen;
    }
    // Distance to the next intersection along the heading.
    const double coord = s.heading.x != 0 ? s.position.x : s.position.y;
    const double dirc = s.heading.x != 0 ? s.heading.x : s.heading.y;
    double next = dirc > 0 ? (std::floor(coord / p.pitch + 1e-9) + 1) * p.pitch
                           : (std::ceil(coord / p.pitch - 1e-9) - 1) * p.pitch;
    const double limit = s.heading.x != 0 ? p.box.width : p.box.height;
    if (next < -1e-9 || next > limit + 1e-9) {
      // Dead end mid-block (box edge not on the grid); reverse.
      s.heading = s.heading * -1.0;
      continue;
    }
    const double dist = std::abs(next - coord);
    if (remaining < dist) {
      s.position = s.position + s.heading * remaining;
      remaining = 0;
    } else {
      if (s.heading.x != 0) s.position.x = next;
      else s.position.y = next;
      remaining -= dist;
    }
  }
  s.waypoint = std::nullopt;
  return s;
}

/// One sample of a node's trajectory in a mobility trace.
struct TracePoint {
  SimTime time;
  Vec2 position;
};

/// Parses `<time_us> <node_id> <x_m> <y_m>` lines; blank lines and '#'
/// comments are skipped. Samples are grouped per node in file order and must
/// be nondecreasing in time per node.
inline std::map<NodeId, std::vector<TracePoint>> parse_mobility_trace(std::istream& in) {
  std::map<NodeId, std::vector<TracePoint>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::uint64_t t = 0;
    std::uint64_t id = 0;
    double x = 0;
    double y = 0;
    std::string extra;
    if (!(ls >> t >> id >> x >> y) || (ls >> extra)) {
      throw std::invalid_argument("mobility trace line " + std::to_string(line_no) +
                                  ": expected '<time_us> <node_id> <x_m> <y_m>'");
    }
    auto& pts = out[static_cast<NodeId>(id)];
    if (!pts.empty() && SimTime::us(t) < pts.back().time) {
      throw std::invalid_argument("mobility trace line " + std::to_string(line_no) +
                                  ": time goes backwards for node " + std::to_string(id));
    }
    pts.push_back({SimTime::us(t), {x, y}});
  }
  return out;
}

}  // namespace devsnet::manet
