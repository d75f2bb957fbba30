#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "devsnet/vcs/stack.hpp"

namespace devsnet::vcs {

/// OS port of a virtual (node, port) pair: base + node * 256 + port mod 256.
inline std::uint16_t loopback_port(std::uint16_t base_port, NodeId node, std::uint16_t vcs_port) {
  const std::uint64_t p = base_port + static_cast<std::uint64_t>(node) * 256 + vcs_port % 256;
  if (p > 65535) {
    throw VcsError("loopback mapping of node " + std::to_string(node) + " port " +
                   std::to_string(vcs_port) + " exceeds the UDP port range");
  }
  return static_cast<std::uint16_t>(p);
}

inline sockaddr_in loopback_addr(std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return a;
}

/// Sends encoded AppRecords as UDP datagrams between loopback ports.
class LoopbackWire {
 public:
  explicit LoopbackWire(std::uint16_t base_port) : base_port_(base_port) {}

  std::uint16_t base_port() const { return base_port_; }

  /// Writes `rec` from the socket bound to `from_fd`.
  void write(int from_fd, const manet::AppRecord& rec) const {
    const auto bytes = manet::encode(rec);
    const auto to = loopback_addr(loopback_port(base_port_, rec.dst, rec.dst_port));
    if (::sendto(from_fd, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to),
                 sizeof(to)) < 0) {
      throw VcsError(std::string("loopback send failed: ") + std::strerror(errno));
    }
  }

 private:
  std::uint16_t base_port_;
};

/// Execution-mode backend: every virtual socket is a real UDP socket on
/// 127.0.0.1. One receiver thread per node reads that node's sockets.
class LoopbackStack : public VirtualStack {
 public:
  LoopbackStack(std::size_t node_count, std::uint16_t base_port = 20000,
                Mode mode = Mode::execution, std::size_t mtu = 1500)
      : VirtualStack(mode, mtu), node_count_(node_count), wire_(base_port) {
    if (mtu > 65000) throw VcsError("loopback MTU must fit a UDP datagram");
  }

  ~LoopbackStack() override {
    stop_ = true;
    for (auto& [n, r] : receivers_) {
      if (r->thread.joinable()) r->thread.join();
    }
    std::lock_guard lock(mu_);
    for (auto& [n, r] : receivers_) {
      for (auto& [port, fd] : r->fds) ::close(fd);
    }
    for (int fd : retired_) ::close(fd);
  }

  void poll(SimTime budget) override {
    std::this_thread::sleep_for(std::chrono::microseconds(budget.micros()));
  }

  std::uint64_t malformed() const { return malformed_; }
  const LoopbackWire& wire() const { return wire_; }

 protected:
  void check_node(NodeId n) const override {
    if (n >= node_count_) {
      throw VcsError("unknown destination node " + std::to_string(n) + " (node_count " +
                     std::to_string(node_count_) + ")");
    }
  }

  void on_open(const VirtualSocket& s) override {
    const auto port = loopback_port(wire_.base_port(), s.node_id, s.port);
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw VcsError(std::string("socket() failed: ") + std::strerror(errno));
    int buf = 4 << 20;
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
    const auto addr = loopback_addr(port);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
      const int err = errno;
      ::close(fd);
      throw VcsError("cannot bind 127.0.0.1:" + std::to_string(port) + " for node " +
                     std::to_string(s.node_id) + " port " + std::to_string(s.port) + ": " +
                     std::strerror(err));
    }
    std::lock_guard lock(mu_);
    auto& r = receivers_[s.node_id];
    if (!r) r = std::make_unique<Receiver>();
    r->fds[s.port] = fd;
    if (!r->thread.joinable()) {
      r->thread = std::thread([this, node = s.node_id] { receive_loop(node); });
    }
  }

  void on_close(const VirtualSocket& s) override {
    std::lock_guard lock(mu_);
    auto& fds = receivers_.at(s.node_id)->fds;
    retired_.push_back(fds.at(s.port));
    fds.erase(s.port);
  }

  void transmit(const manet::AppRecord& rec) override { wire_.write(fd_of(rec.src, rec.src_port), rec); }

  int fd_of(NodeId node, std::uint16_t port) const {
    std::lock_guard lock(mu_);
    return receivers_.at(node)->fds.at(port);
  }

 private:
  struct Receiver {
    std::map<std::uint16_t, int> fds;
    std::thread thread;
  };

  void receive_loop(NodeId node) {
    std::vector<std::uint8_t> buf(65536);
    std::vector<pollfd> pfds;
    while (!stop_) {
      pfds.clear();
      {
        std::lock_guard lock(mu_);
        for (const auto& [port, fd] : receivers_.at(node)->fds) pfds.push_back({fd, POLLIN, 0});
      }
      if (pfds.empty()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        continue;
      }
      if (::poll(pfds.data(), pfds.size(), 10) <= 0) continue;
      for (const auto& p : pfds) {
        if (!(p.revents & POLLIN)) continue;
        for (;;) {
          const auto n = ::recv(p.fd, buf.data(), buf.size(), MSG_DONTWAIT);
          if (n < 0) break;
          try {
            dispatch(manet::decode_app_record({buf.data(), static_cast<std::size_t>(n)}));
          } catch (const DecodeError&) {
            ++malformed_;
          }
        }
      }
    }
  }

  std::size_t node_count_;
  LoopbackWire wire_;
  mutable std::mutex mu_;
  std::map<NodeId, std::unique_ptr<Receiver>> receivers_;
  std::vector<int> retired_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> malformed_{0};
};

}  // namespace devsnet::vcs
