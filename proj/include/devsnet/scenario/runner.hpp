#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "devsnet/bus/roles.hpp"
#include "devsnet/devs/root.hpp"
#include "devsnet/devs/trace.hpp"
#include "devsnet/scenario/assembly.hpp"
#include "devsnet/scenario/metrics.hpp"
#include "devsnet/sil/pacing.hpp"
#include "devsnet/vcs/loopback.hpp"

namespace devsnet::scenario {

/// A kernel, bus or backend failure, prefixed with the run it happened in.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Delivery {
  NodeId src = 0;
  std::uint16_t src_port = 0;
  NodeId dst = 0;
  std::uint16_t dst_port = 0;
  std::uint64_t payload_digest = 0;

  auto operator<=>(const Delivery&) const = default;
};

inline Delivery delivery_of(const manet::AppRecord& r) {
  return {r.src, r.src_port, r.dst, r.dst_port, fnv1a64(r.data)};
}

struct RunOptions {
  /// Trace destination; nullptr keeps only the digest.
  std::ostream* trace = nullptr;
  /// Execution and emulation: how long to wait for datagrams after the last send.
  std::chrono::milliseconds drain{500};
};

struct RunResult {
  RunMetrics metrics;
  /// FNV-1a over the trace text.
  std::uint64_t trace_digest = 0xcbf29ce484222325ULL;
  std::size_t trace_lines = 0;
  /// Sorted.
  std::vector<Delivery> delivered;
};

namespace detail {

class TraceFold {
 public:
  TraceFold(RunResult& r, std::ostream* os) : r_(r), os_(os) {}

  void operator()(const devs::TraceRecord& rec) {
    auto line = devs::format_trace_line(rec);
    line += '\n';
    r_.trace_digest = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(line.data()), line.size()), r_.trace_digest);
    ++r_.trace_lines;
    if (os_) *os_ << line;
    acc_.add(rec);
  }

  const MetricsAccumulator& metrics() const { return acc_; }

 private:
  RunResult& r_;
  std::ostream* os_;
  MetricsAccumulator acc_;
};

inline std::size_t model_in_flight(const devs::RootCoordinator& root, const ScenarioConfig& c) {
  std::size_t n = root.model<manet::Channel>("scenario/channel").in_flight();
  for (NodeId i = 0; i < c.node_count; ++i) {
    const std::string p = "scenario/" + node_name(i) + "/";
    n += root.model<vcs::VcsNode>(p + "vcs").in_flight();
    n += root.model<manet::AodvRouter>(p + "aodv").in_flight();
    if (c.stack == vcs::StackAbstraction::full_stack) n += root.model<vcs::OsStack>(p + "os").in_flight();
  }
  return n;
}

inline RunResult run_simulation(const ScenarioConfig& c, const RunOptions& opt) {
  RunResult r;
  TraceFold fold(r, opt.trace);
  auto root = devs::build_root(build_scenario(c));
  std::vector<manet::AppRecord> received;
  auto collect = [&](std::vector<devs::EventMsg> outs, sil::PacingLoop* loop) {
    for (auto& m : outs) {
      if (m.port != "recv") continue;
      received.push_back(manet::decode_app_record(m.payload));
      if (loop) loop->submit(std::move(m));
    }
  };

  std::optional<sil::PacingReport> pacing;
  if (c.horizon > SimTime::zero()) {
    const SimTime last = c.horizon - SimTime::us(1);
    if (c.pacing) {
      sil::PacingConfig<> pc;
      pc.scale = c.pacing->scale;
      pc.late_policy = c.pacing->late_policy;
      pc.tolerance = c.pacing->tolerance;
      pc.epoch = std::chrono::steady_clock::now() + std::chrono::milliseconds(5);
      // The kernel runs ahead; the loop holds each output until its date.
      sil::PacingLoop loop(pc);
      while (root.next_event_time() <= last) {
        root.step(std::ref(fold));
        collect(root.take_outputs(), &loop);
      }
      loop.close();
      loop.wait();
      while (loop.next_release(std::chrono::milliseconds(0))) {
      }
      pacing = loop.report();
    } else {
      root.run_until(last, std::ref(fold));
      collect(root.take_outputs(), nullptr);
    }
  }
  r.metrics = fold.metrics().finish(model_in_flight(root, c));
  r.metrics.pacing = pacing;
  for (const auto& rec : received) r.delivered.push_back(delivery_of(rec));
  std::sort(r.delivered.begin(), r.delivered.end());
  return r;
}

struct Firing {
  SimTime time;
  std::size_t flow = 0;
  std::uint64_t count = 0;
  NodeId dst = 0;
  std::uint32_t len = 0;
};

/// Every packet the traffic sources fire in [0, horizon), in time order.
inline std::vector<Firing> firings(const ScenarioConfig& c) {
  std::vector<Firing> out;
  for (std::size_t k = 0; k < c.traffic.size(); ++k) {
    const auto& f = c.traffic[k];
    for (std::uint64_t i = 0;; ++i) {
      const SimTime t = manet::traffic_firing(f.spec, i);
      if (!(t < c.horizon)) break;
      const bool tr = f.spec.kind == manet::TrafficKind::trace;
      out.push_back({t, k, i, tr ? f.spec.schedule[i].dst : f.dst,
                     tr ? f.spec.schedule[i].payload_len : f.spec.payload_len});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Firing& a, const Firing& b) { return a.time < b.time; });
  return out;
}

/// Execution and emulation: the traffic schedule is replayed in wall time
/// through real loopback sockets. Trace times of receptions are the wall
/// offsets from the start, divided by the pacing scale.
inline RunResult run_replay(const ScenarioConfig& c, const RunOptions& opt) {
  using Clock = std::chrono::steady_clock;
  RunResult r;
  TraceFold fold(r, opt.trace);
  std::unique_ptr<vcs::VirtualStack> stack;
  if (c.mode == vcs::Mode::emulation) {
    stack = std::make_unique<bus::EmulationStack>(c.node_count, c.base_port, c.mtu);
  } else {
    stack = std::make_unique<vcs::LoopbackStack>(c.node_count, c.base_port, vcs::Mode::execution, c.mtu);
  }
  stack->select_stack(c.stack);
  const double scale = c.pacing ? c.pacing->scale : 1.0;

  std::mutex mu;
  std::vector<std::pair<Clock::time_point, manet::AppRecord>> got;
  stack->on_delivery([&](const manet::AppRecord& rec) {
    const auto now = Clock::now();
    std::lock_guard lock(mu);
    got.emplace_back(now, rec);
  });

  const auto plan = firings(c);
  std::map<std::pair<NodeId, std::uint16_t>, vcs::VirtualSocket> sockets;
  auto ensure = [&](NodeId n, std::uint16_t port) {
    if (!sockets.contains({n, port})) sockets.emplace(std::pair{n, port}, stack->open(n, port));
    return sockets.at({n, port});
  };
  for (const auto& f : plan) {
    ensure(c.traffic[f.flow].src, c.traffic[f.flow].src_port);
    ensure(f.dst, c.traffic[f.flow].dst_port);
  }

  std::vector<devs::TraceRecord> records;
  std::vector<manet::AppRecord> sent;
  const auto epoch = Clock::now() + std::chrono::milliseconds(20);
  auto wall_of = [&](SimTime t) {
    return epoch + std::chrono::microseconds(static_cast<std::int64_t>(static_cast<double>(t.micros()) * scale));
  };
  for (const auto& f : plan) {
    const auto& flow = c.traffic[f.flow];
    std::this_thread::sleep_until(wall_of(f.time));
    auto payload = manet::traffic_payload(flow.src, f.count, f.len);
    const auto receipt = stack->send(ensure(flow.src, flow.src_port), f.dst, flow.dst_port, payload);
    manet::AppRecord rec{flow.src, flow.src_port, f.dst, flow.dst_port, receipt.seq, std::move(payload)};
    records.push_back({f.time, "scenario/" + node_name(flow.src) + "/vcs", devs::TraceKind::output, "app_sent",
                       fnv1a64(manet::encode(rec))});
    sent.push_back(std::move(rec));
  }
  const auto deadline = std::max(Clock::now(), wall_of(c.horizon)) + opt.drain;
  while (Clock::now() < deadline) {
    {
      std::lock_guard lock(mu);
      if (got.size() >= sent.size()) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  stack.reset();

  std::multiset<std::uint64_t> outstanding;
  for (const auto& s : sent) outstanding.insert(fnv1a64(manet::encode(s)));
  SimTime last = c.horizon;
  for (const auto& [at, rec] : got) {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(at - epoch).count();
    const SimTime t = SimTime::us(static_cast<std::uint64_t>(std::max<double>(0, static_cast<double>(us) / scale)));
    const auto digest = fnv1a64(manet::encode(rec));
    records.push_back({t, "scenario/" + node_name(rec.dst) + "/vcs", devs::TraceKind::output, "app_recv", digest});
    if (auto it = outstanding.find(digest); it != outstanding.end()) outstanding.erase(it);
    last = std::max(last, t);
    r.delivered.push_back(delivery_of(rec));
  }
  // Datagrams that never arrived are reported as losses at the end of the run.
  for (const auto& s : sent) {
    const auto digest = fnv1a64(manet::encode(s));
    if (auto it = outstanding.find(digest); it != outstanding.end()) {
      outstanding.erase(it);
      records.push_back({last, "scenario/" + node_name(s.src) + "/vcs", devs::TraceKind::output, "drop_unreceived", digest});
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const devs::TraceRecord& a, const devs::TraceRecord& b) { return a.time < b.time; });
  for (const auto& rec : records) fold(rec);
  r.metrics = fold.metrics().finish(0);
  std::sort(r.delivered.begin(), r.delivered.end());
  return r;
}

}  // namespace detail

/// Runs a scenario over [0, horizon) in its configured mode.
inline RunResult run_scenario(const ScenarioConfig& c, const RunOptions& opt = {}) {
  c.validate();
  try {
    return c.mode == vcs::Mode::simulation ? detail::run_simulation(c, opt) : detail::run_replay(c, opt);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError("run (mode " + std::string(vcs::to_string(c.mode)) + ", seed " + std::to_string(c.seed) +
                   ") failed: " + e.what());
  }
}

}  // namespace devsnet::scenario
