#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "devsnet/core/bytes.hpp"
#include "devsnet/core/time.hpp"
#include "devsnet/manet/node.hpp"

namespace devsnet::manet {

struct RoutingTableEntry {
  NodeId dest = 0;
  NodeId next_hop = 0;
  std::uint32_t hop_count = 1;
  std::uint32_t dest_seq = 0;
  /// Expiry instant; the entry is unusable at and after it.
  SimTime lifetime;
  bool valid = true;

  bool usable(SimTime now) const { return valid && now < lifetime; }
  bool operator==(const RoutingTableEntry&) const = default;
};

inline Bytes encode(const RoutingTableEntry& e) {
  ByteWriter w;
  w.u32(e.dest).u32(e.next_hop).u32(e.hop_count).u32(e.dest_seq).u64(e.lifetime.raw());
  w.u8(e.valid ? 1 : 0);
  return w.bytes();
}

inline RoutingTableEntry decode_route(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  RoutingTableEntry e;
  e.dest = r.u32();
  e.next_hop = r.u32();
  e.hop_count = r.u32();
  e.dest_seq = r.u32();
  e.lifetime = SimTime::from_raw(r.u64());
  e.valid = r.u8() != 0;
  r.expect_end();
  return e;
}

/// True when `candidate` may replace `current` under the freshness rule:
/// higher sequence number, or equal sequence number with fewer hops. An entry
/// that is invalid or expired may also be replaced at an equal sequence number.
inline bool fresher(const RoutingTableEntry& candidate, const RoutingTableEntry& current,
                    SimTime now) {
  // Sequence numbers compare with wraparound, as 32-bit signed differences.
  const auto diff = static_cast<std::int32_t>(candidate.dest_seq - current.dest_seq);
  if (diff > 0) return true;
  if (diff < 0) return false;
  if (!current.usable(now)) return true;
  return candidate.hop_count < current.hop_count;
}

class RoutingTable {
 public:
  /// Installs `e` if there is no entry for its destination or if it is fresher.
  /// Returns whether the table changed.
  bool offer(const RoutingTableEntry& e, SimTime now) {
    auto it = entries_.find(e.dest);
    if (it == entries_.end()) {
      entries_.emplace(e.dest, e);
      return true;
    }
    if (!fresher(e, it->second, now)) return false;
    it->second = e;
    return true;
  }

  /// A usable route, or nullopt. Expired entries are never returned.
  std::optional<RoutingTableEntry> lookup(NodeId dest, SimTime now) const {
    auto it = entries_.find(dest);
    if (it == entries_.end() || !it->second.usable(now)) return std::nullopt;
    return it->second;
  }

  /// Any entry, usable or not (for the last known sequence number).
  const RoutingTableEntry* find(NodeId dest) const {
    auto it = entries_.find(dest);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void refresh(NodeId dest, SimTime until, SimTime now) {
    auto it = entries_.find(dest);
    if (it != entries_.end() && it->second.usable(now) && it->second.lifetime < until) {
      it->second.lifetime = until;
    }
  }

  /// Marks the route broken and bumps its sequence number. Returns the updated
  /// entry if it was usable.
  std::optional<RoutingTableEntry> invalidate(NodeId dest, SimTime now,
                                              std::optional<std::uint32_t> seq = std::nullopt) {
    auto it = entries_.find(dest);
    if (it == entries_.end() || !it->second.usable(now)) return std::nullopt;
    auto& e = it->second;
    e.valid = false;
    e.dest_seq = seq && static_cast<std::int32_t>(*seq - e.dest_seq) > 0 ? *seq : e.dest_seq + 1;
    return e;
  }

  /// Destinations whose usable route goes through `next_hop`.
  std::vector<NodeId> routes_via(NodeId next_hop, SimTime now) const {
    std::vector<NodeId> out;
    for (const auto& [d, e] : entries_) {
      if (e.next_hop == next_hop && e.usable(now)) out.push_back(d);
    }
    return out;
  }

  const std::map<NodeId, RoutingTableEntry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::map<NodeId, RoutingTableEntry> entries_;
};

}  // namespace devsnet::manet
