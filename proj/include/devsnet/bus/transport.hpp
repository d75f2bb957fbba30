#pragma once

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "devsnet/bus/message.hpp"

namespace devsnet::bus {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional, ordered frame channel to one peer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const BusMessage& m) = 0;
  /// Waits up to `timeout` for the next message; nullopt on timeout. Throws
  /// TransportError when the peer has gone away.
  virtual std::optional<BusMessage> receive(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

struct FrameQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> frames;
  bool closed = false;
};

}  // namespace detail

/// In-process transport. Frames still go through the wire codec, so the
/// converter code path is the same as over a socket.
class QueueTransport : public Transport {
 public:
  QueueTransport(std::shared_ptr<detail::FrameQueue> in, std::shared_ptr<detail::FrameQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}

  ~QueueTransport() override {
    std::lock_guard lock(out_->mu);
    out_->closed = true;
    out_->cv.notify_all();
  }

  void send(const BusMessage& m) override {
    auto frame = encode(m);
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("bus: peer closed");
    out_->frames.push_back(std::move(frame));
    out_->cv.notify_one();
  }

  std::optional<BusMessage> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout, [&] { return !in_->frames.empty() || in_->closed; })) {
      return std::nullopt;
    }
    if (in_->frames.empty()) throw TransportError("bus: peer closed");
    auto frame = std::move(in_->frames.front());
    in_->frames.pop_front();
    lock.unlock();
    return decode(frame);
  }

 private:
  std::shared_ptr<detail::FrameQueue> in_;
  std::shared_ptr<detail::FrameQueue> out_;
};

inline std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_queue_pair() {
  auto a = std::make_shared<detail::FrameQueue>();
  auto b = std::make_shared<detail::FrameQueue>();
  return {std::make_unique<QueueTransport>(a, b), std::make_unique<QueueTransport>(b, a)};
}

/// Transport over a connected stream socket (socketpair, TCP, Unix).
class StreamTransport : public Transport {
 public:
  explicit StreamTransport(int fd) : fd_(fd) {}
  ~StreamTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }
  StreamTransport(const StreamTransport&) = delete;
  StreamTransport& operator=(const StreamTransport&) = delete;

  void send(const BusMessage& m) override {
    const auto frame = encode(m);
    std::size_t off = 0;
    while (off < frame.size()) {
      const auto n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("bus: send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<BusMessage> receive(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::uint8_t buf[4096];
    for (;;) {
      if (auto m = reader_.next()) return m;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() < 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0 && errno != EINTR) {
        throw TransportError(std::string("bus: poll failed: ") + std::strerror(errno));
      }
      if (r <= 0) continue;
      const auto n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n == 0) throw TransportError("bus: peer closed");
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(std::string("bus: recv failed: ") + std::strerror(errno));
      }
      reader_.feed({buf, static_cast<std::size_t>(n)});
    }
  }

 private:
  int fd_;
  FrameReader reader_;
};

inline std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  return {std::make_unique<StreamTransport>(fds[0]), std::make_unique<StreamTransport>(fds[1])};
}

}  // namespace devsnet::bus
