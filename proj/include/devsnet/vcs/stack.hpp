#pragma once

#include <atomic>
#include <functional>
#include <span>
#include <string>

#include "devsnet/vcs/socket_table.hpp"
#include "devsnet/vcs/types.hpp"

namespace devsnet::vcs {

/// Socket API seen by application code. The same calls work in every mode;
/// only the backend behind transmit() and poll() differs.
class VirtualStack {
 public:
  explicit VirtualStack(Mode mode, std::size_t mtu = 1500, std::size_t queue_capacity = 1024)
      : sockets_(queue_capacity), mode_(mode), mtu_(mtu) {}
  virtual ~VirtualStack() = default;
  VirtualStack(const VirtualStack&) = delete;
  VirtualStack& operator=(const VirtualStack&) = delete;

  Mode mode() const { return mode_; }
  StackAbstraction stack() const { return abstraction_; }
  std::size_t mtu() const { return mtu_; }

  VirtualSocket open(NodeId node, std::uint16_t port) {
    check_node(node);
    auto s = sockets_.open(node, port, mode_);
    try {
      on_open(s);
    } catch (...) {
      sockets_.close(s);
      throw;
    }
    return s;
  }

  SendReceipt send(const VirtualSocket& s, NodeId dst, std::uint16_t dst_port,
                   std::span<const std::uint8_t> payload) {
    sockets_.require_open(s);
    if (payload.size() > mtu_) {
      throw VcsError("payload of " + std::to_string(payload.size()) + " bytes exceeds MTU " +
                     std::to_string(mtu_));
    }
    check_node(dst);
    started_ = true;
    manet::AppRecord rec{s.node_id, s.port, dst, dst_port, sockets_.next_seq(s),
                         Bytes(payload.begin(), payload.end())};
    transmit(rec);
    ++sent_;
    return {rec.seq, payload.size()};
  }

  std::optional<Datagram> recv(const VirtualSocket& s) { return sockets_.recv(s); }

  void close(const VirtualSocket& s) {
    sockets_.require_open(s);
    on_close(s);
    sockets_.close(s);
  }

  /// Must be called before the first send.
  void select_stack(StackAbstraction a) {
    if (started_) throw VcsError("stack abstraction cannot change once the run has started");
    abstraction_ = a;
    on_select_stack(a);
  }

  /// Lets the backend make progress for `budget`: simulated time in
  /// simulation mode, wall time otherwise.
  virtual void poll(SimTime budget) = 0;

  /// Called with every record queued on its destination socket; may run on a
  /// backend thread. Set before the first open().
  void on_delivery(std::function<void(const manet::AppRecord&)> f) { observer_ = std::move(f); }

  std::uint64_t sent() const { return sent_; }
  std::uint64_t delivered() const { return delivered_; }
  const SocketTable& sockets() const { return sockets_; }

 protected:
  virtual void check_node(NodeId) const {}
  virtual void on_open(const VirtualSocket&) {}
  virtual void on_close(const VirtualSocket&) {}
  virtual void on_select_stack(StackAbstraction) {}
  virtual void transmit(const manet::AppRecord& rec) = 0;

  /// Hands a record that reached its destination node to the socket layer.
  void dispatch(const manet::AppRecord& rec) {
    if (!sockets_.deliver(rec.dst, rec.dst_port, {rec.src, rec.src_port, rec.data})) return;
    ++delivered_;
    if (observer_) observer_(rec);
  }

  SocketTable sockets_;

 private:
  Mode mode_;
  std::size_t mtu_;
  StackAbstraction abstraction_ = StackAbstraction::direct_route;
  bool started_ = false;
  std::function<void(const manet::AppRecord&)> observer_;
  std::atomic<std::uint64_t> sent_{0};
  std::atomic<std::uint64_t> delivered_{0};
};

}  // namespace devsnet::vcs
