#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "devsnet/manet/node.hpp"

namespace devsnet::manet {

enum class RadioMode { unit_disk, lossy };

/// Range-limited radio. In lossy mode the loss probability grows from
/// reference_loss_prob at reference_distance with the path-loss exponent.
struct RadioModel {
  double range = 100.0;
  double path_loss_exponent = 2.0;
  double reference_loss_prob = 0.0;
  double reference_distance = 50.0;
  RadioMode mode = RadioMode::unit_disk;

  void validate() const {
    if (!(range > 0)) throw std::invalid_argument("radio.range must be > 0");
    if (!(reference_loss_prob >= 0 && reference_loss_prob <= 1)) {
      throw std::invalid_argument("radio.reference_loss_prob must lie in [0, 1]");
    }
    if (!(path_loss_exponent >= 1)) {
      throw std::invalid_argument("radio.path_loss_exponent must be >= 1");
    }
    if (!(reference_distance > 0)) {
      throw std::invalid_argument("radio.reference_distance must be > 0");
    }
  }
};

inline double delivery_probability(double dist, const RadioModel& radio) {
  if (dist > radio.range) return 0.0;
  if (radio.mode == RadioMode::unit_disk) return 1.0;
  const double d = std::max(dist, radio.reference_distance);
  const double loss =
      radio.reference_loss_prob * std::pow(d / radio.reference_distance, radio.path_loss_exponent);
  return 1.0 - std::clamp(loss, 0.0, 1.0);
}

/// Success probability of one transmission from a to b. Disabled nodes neither
/// send nor receive.
inline double delivery_probability(const NodeState& a, const NodeState& b,
                                   const RadioModel& radio) {
  if (!a.enabled || !b.enabled) return 0.0;
  return delivery_probability(distance(a.position, b.position), radio);
}

/// Undirected graph over enabled nodes. Adjacency is indexed by node id.
struct ConnectivityGraph {
  std::vector<NodeId> vertices;
  std::vector<std::vector<NodeId>> adjacency;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& a : adjacency) n += a.size();
    return n / 2;
  }
  bool has_edge(NodeId a, NodeId b) const {
    if (a >= adjacency.size()) return false;
    const auto& v = adjacency[a];
    return std::find(v.begin(), v.end(), b) != v.end();
  }
};

/// Node ids must equal their index in `states`.
inline ConnectivityGraph connectivity_graph(std::span<const NodeState> states,
                                            const RadioModel& radio) {
  ConnectivityGraph g;
  g.adjacency.resize(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].node_id != i) {
      throw std::invalid_argument("connectivity_graph: node ids must match their index");
    }
    if (states[i].enabled) g.vertices.push_back(static_cast<NodeId>(i));
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].enabled) continue;
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      if (delivery_probability(states[i], states[j], radio) > 0 &&
          delivery_probability(states[j], states[i], radio) > 0) {
        g.adjacency[i].push_back(static_cast<NodeId>(j));
        g.adjacency[j].push_back(static_cast<NodeId>(i));
      }
    }
  }
  return g;
}

/// Hop distances from src; nullopt for unreachable nodes.
inline std::vector<std::optional<std::uint32_t>> bfs_hops(const ConnectivityGraph& g, NodeId src) {
  std::vector<std::optional<std::uint32_t>> dist(g.adjacency.size());
  if (src >= g.adjacency.size()) return dist;
  dist[src] = 0;
  std::deque<NodeId> q{src};
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop_front();
    for (NodeId v : g.adjacency[u]) {
      if (!dist[v]) {
        dist[v] = *dist[u] + 1;
        q.push_back(v);
      }
    }
  }
  return dist;
}

inline bool is_connected(const ConnectivityGraph& g) {
  if (g.vertices.empty()) return true;
  const auto d = bfs_hops(g, g.vertices.front());
  return std::all_of(g.vertices.begin(), g.vertices.end(), [&](NodeId v) { return d[v].has_value(); });
}

}  // namespace devsnet::manet
