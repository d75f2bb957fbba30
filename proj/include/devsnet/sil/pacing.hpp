#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "devsnet/devs/model.hpp"

namespace devsnet::sil {

enum class LatePolicy { drop, release_immediately, abort };

inline std::string_view to_string(LatePolicy p) {
  switch (p) {
    case LatePolicy::drop: return "drop";
    case LatePolicy::release_immediately: return "release_immediately";
    case LatePolicy::abort: return "abort";
  }
  return "?";
}

inline LatePolicy parse_late_policy(std::string_view s) {
  if (s == "drop") return LatePolicy::drop;
  if (s == "release_immediately") return LatePolicy::release_immediately;
  if (s == "abort") return LatePolicy::abort;
  throw std::invalid_argument("unknown late policy '" + std::string(s) +
                              "' (expected drop, release_immediately or abort)");
}

template <typename Clock = std::chrono::steady_clock>
struct PacingConfig {
  /// Wall seconds per simulated second.
  double scale = 1.0;
  typename Clock::time_point epoch{};
  LatePolicy late_policy = LatePolicy::release_immediately;
  std::chrono::microseconds tolerance{1000};

  void validate() const {
    if (!std::isfinite(scale) || scale <= 0) throw std::invalid_argument("pacing scale must be finite and > 0");
    if (tolerance.count() < 0) throw std::invalid_argument("pacing tolerance must be >= 0");
  }
};

template <typename Clock = std::chrono::steady_clock>
struct PacedEvent {
  devs::EventMsg event;
  typename Clock::time_point due_wall;
  std::optional<typename Clock::time_point> released_wall;
  std::chrono::microseconds lateness{0};
  bool late = false;
};

class PacingViolation : public std::runtime_error {
 public:
  PacingViolation(const devs::EventMsg& ev, std::chrono::microseconds lateness)
      : std::runtime_error("pacing violation: event on port '" + ev.port + "' at " + ev.time.str() +
                           " released " + std::to_string(lateness.count()) + " us late"),
        port_(ev.port), time_(ev.time), lateness_(lateness) {}

  const std::string& port() const { return port_; }
  SimTime time() const { return time_; }
  std::chrono::microseconds lateness() const { return lateness_; }

 private:
  std::string port_;
  SimTime time_;
  std::chrono::microseconds lateness_;
};

struct PacingReport {
  std::uint64_t on_time = 0;
  std::uint64_t late = 0;
  std::uint64_t dropped = 0;
  std::int64_t max_lateness_us = 0;
  std::int64_t p99_lateness_us = 0;
};

/// Buffers events and releases them at the wall instant their simulated date
/// maps to. Not thread-safe; PacingLoop owns one from a single thread.
template <typename Clock = std::chrono::steady_clock>
class PacingController {
 public:
  using time_point = typename Clock::time_point;
  using Event = PacedEvent<Clock>;

  explicit PacingController(PacingConfig<Clock> cfg) : cfg_(cfg) { cfg_.validate(); }

  const PacingConfig<Clock>& config() const { return cfg_; }

  time_point map_sim_to_wall(SimTime t) const {
    if (t.is_infinite()) throw std::invalid_argument("cannot pace an event at INFINITY");
    const long double ns = static_cast<long double>(t.micros()) * 1000.0L * cfg_.scale;
    const auto since_epoch = cfg_.epoch.time_since_epoch();
    const long double limit =
        static_cast<long double>(std::numeric_limits<typename Clock::duration::rep>::max()) -
        static_cast<long double>(std::chrono::duration_cast<std::chrono::nanoseconds>(since_epoch).count());
    if (ns > limit) throw std::overflow_error("pacing: " + t.str() + " overflows the wall clock");
    return cfg_.epoch + std::chrono::duration_cast<typename Clock::duration>(
                            std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(ns))));
  }

  const Event& schedule_release(devs::EventMsg ev) {
    const auto due = map_sim_to_wall(ev.time);
    auto it = buffer_.emplace(Key{due, next_order_++}, Event{std::move(ev), due, std::nullopt, {}, false});
    return it.first->second;
  }

  /// Removes and returns every buffered event due at or before `now`, in due
  /// order. Events more than the tolerance late go through handle_late().
  std::vector<Event> release_due(time_point now) {
    std::vector<Event> out;
    while (!buffer_.empty() && buffer_.begin()->first.due <= now) {
      Event ev = std::move(buffer_.begin()->second);
      buffer_.erase(buffer_.begin());
      const auto lateness = std::chrono::duration_cast<std::chrono::microseconds>(now - ev.due_wall);
      ev.released_wall = now;
      ev.lateness = lateness;
      if (lateness > cfg_.tolerance) {
        if (auto kept = handle_late(std::move(ev), lateness)) out.push_back(std::move(*kept));
      } else {
        ++report_.on_time;
        record(lateness);
        out.push_back(std::move(ev));
      }
    }
    return out;
  }

  std::optional<Event> handle_late(Event ev, std::chrono::microseconds lateness) {
    switch (cfg_.late_policy) {
      case LatePolicy::drop:
        ++report_.dropped;
        return std::nullopt;
      case LatePolicy::release_immediately:
        ++report_.late;
        record(lateness);
        ev.late = true;
        ev.lateness = lateness;
        return ev;
      case LatePolicy::abort:
        throw PacingViolation(ev.event, lateness);
    }
    return std::nullopt;
  }

  std::optional<time_point> next_due() const {
    if (buffer_.empty()) return std::nullopt;
    return buffer_.begin()->first.due;
  }
  std::size_t buffered() const { return buffer_.size(); }

  PacingReport report() const {
    PacingReport r = report_;
    if (!lateness_.empty()) {
      auto sorted = lateness_;
      std::sort(sorted.begin(), sorted.end());
      r.max_lateness_us = sorted.back();
      // Nearest-rank percentile.
      const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size())));
      r.p99_lateness_us = sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    return r;
  }

 private:
  struct Key {
    time_point due;
    std::uint64_t order;
    bool operator<(const Key& o) const { return due != o.due ? due < o.due : order < o.order; }
  };

  void record(std::chrono::microseconds l) { lateness_.push_back(l.count()); }

  PacingConfig<Clock> cfg_;
  std::map<Key, Event> buffer_;
  std::uint64_t next_order_ = 0;
  PacingReport report_;
  std::vector<std::int64_t> lateness_;
};

/// Pacing thread. Producers hand events in with submit(); the loop releases
/// them at their wall date into a queue read by next_release(). The loop only
/// moves events around, so slow producers cannot delay a computed release.
class PacingLoop {
 public:
  using Clock = std::chrono::steady_clock;
  using Event = PacedEvent<Clock>;

  explicit PacingLoop(PacingConfig<Clock> cfg) : ctl_(cfg) {
    thread_ = std::thread([this] { run(); });
  }

  ~PacingLoop() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  PacingLoop(const PacingLoop&) = delete;
  PacingLoop& operator=(const PacingLoop&) = delete;

  void submit(devs::EventMsg ev) {
    {
      std::lock_guard lock(mu_);
      if (closed_) throw std::logic_error("pacing loop: submit after close");
      inbox_.push_back(std::move(ev));
    }
    cv_.notify_all();
  }

  /// No more submissions; the loop exits once everything is released.
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  /// Next released event, waiting up to `timeout`. nullopt on timeout or once
  /// the loop has finished and the queue is empty.
  std::optional<Event> next_release(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    out_cv_.wait_for(lock, timeout, [&] { return !released_.empty() || finished_; });
    if (released_.empty()) return std::nullopt;
    auto ev = std::move(released_.front());
    released_.pop_front();
    return ev;
  }

  /// Blocks until the loop finishes; rethrows a pacing violation.
  void wait() {
    if (thread_.joinable()) thread_.join();
    if (error_) std::rethrow_exception(error_);
  }

  PacingReport report() const {
    std::lock_guard lock(mu_);
    return report_;
  }

 private:
  void run() {
    // Wake this long before a due date and spin the rest, since sleeping
    // threads are rescheduled late.
    constexpr auto kSpin = std::chrono::microseconds(300);
    try {
      for (;;) {
        std::unique_lock lock(mu_);
        while (!inbox_.empty()) {
          ctl_.schedule_release(std::move(inbox_.front()));
          inbox_.pop_front();
        }
        if (stop_ || (closed_ && ctl_.buffered() == 0)) break;
        const auto due = ctl_.next_due();
        if (!due) {
          cv_.wait(lock, [&] { return stop_ || closed_ || !inbox_.empty(); });
          continue;
        }
        if (Clock::now() + kSpin < *due) {
          cv_.wait_until(lock, *due - kSpin, [&] { return stop_ || !inbox_.empty(); });
          continue;
        }
        lock.unlock();
        while (Clock::now() < *due) {
        }
        lock.lock();
        auto out = ctl_.release_due(Clock::now());
        report_ = ctl_.report();
        for (auto& e : out) released_.push_back(std::move(e));
        if (!out.empty()) out_cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      report_ = ctl_.report();
    }
    std::lock_guard lock(mu_);
    finished_ = true;
    out_cv_.notify_all();
  }

  PacingController<Clock> ctl_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable out_cv_;
  std::deque<devs::EventMsg> inbox_;
  std::deque<Event> released_;
  PacingReport report_;
  bool stop_ = false;
  bool closed_ = false;
  bool finished_ = false;
  std::exception_ptr error_;
  std::thread thread_;
};

}  // namespace devsnet::sil
