#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "devsnet/vcs/types.hpp"

namespace devsnet::vcs {

/// Registry of open virtual sockets and their receive queues. Thread-safe:
/// receiver loops deliver while the application thread reads.
class SocketTable {
 public:
  explicit SocketTable(std::size_t queue_capacity = 1024) : capacity_(queue_capacity) {}

  VirtualSocket open(NodeId node, std::uint16_t port, Mode mode) {
    std::lock_guard lock(mu_);
    if (by_addr_.contains({node, port})) {
      throw VcsError("port collision: node " + std::to_string(node) + " port " +
                     std::to_string(port) + " is already open");
    }
    VirtualSocket s{next_id_++, node, port, mode};
    by_addr_.emplace(std::pair{node, port}, s.socket_id);
    sockets_.emplace(s.socket_id, Entry{s, {}, 0});
    return s;
  }

  void close(const VirtualSocket& s) {
    std::lock_guard lock(mu_);
    auto it = find_locked(s);
    by_addr_.erase({s.node_id, s.port});
    sockets_.erase(it);
  }

  bool is_open(const VirtualSocket& s) const {
    std::lock_guard lock(mu_);
    auto it = sockets_.find(s.socket_id);
    return it != sockets_.end() && it->second.socket == s;
  }

  void require_open(const VirtualSocket& s) const {
    if (!is_open(s)) throw VcsError("socket " + std::to_string(s.socket_id) + " is closed");
  }

  /// Appends to the receive queue of (node, port). Returns false when no
  /// socket is open there. A full queue drops its oldest message.
  bool deliver(NodeId node, std::uint16_t port, Datagram d) {
    std::lock_guard lock(mu_);
    auto addr = by_addr_.find({node, port});
    if (addr == by_addr_.end()) {
      ++undeliverable_;
      return false;
    }
    auto& e = sockets_.at(addr->second);
    if (capacity_ > 0 && e.queue.size() >= capacity_) {
      e.queue.pop_front();
      ++e.dropped;
    }
    e.queue.push_back(std::move(d));
    return true;
  }

  std::optional<Datagram> recv(const VirtualSocket& s) {
    std::lock_guard lock(mu_);
    auto& e = find_locked(s)->second;
    if (e.queue.empty()) return std::nullopt;
    auto d = std::move(e.queue.front());
    e.queue.pop_front();
    return d;
  }

  std::size_t queued(const VirtualSocket& s) const {
    std::lock_guard lock(mu_);
    auto it = sockets_.find(s.socket_id);
    return it == sockets_.end() ? 0 : it->second.queue.size();
  }

  std::uint64_t dropped(const VirtualSocket& s) const {
    std::lock_guard lock(mu_);
    auto it = sockets_.find(s.socket_id);
    return it == sockets_.end() ? 0 : it->second.dropped;
  }

  std::uint64_t undeliverable() const {
    std::lock_guard lock(mu_);
    return undeliverable_;
  }

  std::uint32_t next_seq(const VirtualSocket& s) {
    std::lock_guard lock(mu_);
    return find_locked(s)->second.seq++;
  }

 private:
  struct Entry {
    VirtualSocket socket;
    std::deque<Datagram> queue;
    std::uint64_t dropped = 0;
    std::uint32_t seq = 0;
  };

  std::map<std::uint32_t, Entry>::iterator find_locked(const VirtualSocket& s) {
    auto it = sockets_.find(s.socket_id);
    if (it == sockets_.end() || !(it->second.socket == s)) {
      throw VcsError("socket " + std::to_string(s.socket_id) + " is closed");
    }
    return it;
  }

  mutable std::mutex mu_;
  std::size_t capacity_;
  std::uint32_t next_id_ = 1;
  std::map<std::uint32_t, Entry> sockets_;
  std::map<std::pair<NodeId, std::uint16_t>, std::uint32_t> by_addr_;
  std::uint64_t undeliverable_ = 0;
};

}  // namespace devsnet::vcs
