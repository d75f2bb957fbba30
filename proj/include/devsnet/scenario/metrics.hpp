#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "devsnet/devs/trace.hpp"
#include "devsnet/sil/pacing.hpp"

namespace devsnet::scenario {

struct RunMetrics {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::map<std::string, std::uint64_t> dropped_by_cause;
  /// Data packets still inside the network when the run stopped.
  std::uint64_t in_flight = 0;
  /// delivered / sent; 1.0 with zero_traffic set when nothing was sent.
  double pdr = 1.0;
  bool zero_traffic = true;
  double mean_delay_us = 0;
  std::uint64_t p99_delay_us = 0;
  std::uint64_t control_packets = 0;
  /// control packets / delivered; infinite when control traffic delivered nothing.
  double routing_overhead = 0;
  std::optional<sil::PacingReport> pacing;

  std::uint64_t dropped() const {
    std::uint64_t n = 0;
    for (const auto& [cause, k] : dropped_by_cause) n += k;
    return n;
  }
  bool conserved() const { return sent == delivered + dropped() + in_flight; }
};

/// Folds trace records into RunMetrics. Sends and deliveries are the
/// "app_sent"/"app_recv" outputs of the VCS; every "drop_<cause>" output is a
/// dropped data packet; every "tx_ctl" output is one routing control packet.
/// Delays pair each delivery with the earliest unmatched send of the same
/// record digest.
class MetricsAccumulator {
 public:
  void add(const devs::TraceRecord& r) {
    if (r.kind != devs::TraceKind::output) return;
    const std::string_view port = r.port;
    if (port == "app_sent") {
      ++m_.sent;
      pending_[r.payload_digest].push_back(r.time);
    } else if (port == "app_recv") {
      ++m_.delivered;
      auto it = pending_.find(r.payload_digest);
      if (it != pending_.end() && !it->second.empty()) {
        const SimTime sent = it->second.front();
        it->second.pop_front();
        if (it->second.empty()) pending_.erase(it);
        delays_.push_back((r.time - sent).micros());
      }
    } else if (port.starts_with("drop_")) {
      ++m_.dropped_by_cause[std::string(port.substr(5))];
    } else if (port == "tx_ctl") {
      ++m_.control_packets;
    }
  }

  /// `in_flight` defaults to the residual sent - delivered - dropped.
  RunMetrics finish(std::optional<std::uint64_t> in_flight = std::nullopt) const {
    RunMetrics m = m_;
    const std::uint64_t accounted = m.delivered + m.dropped();
    m.in_flight = in_flight ? *in_flight : (m.sent > accounted ? m.sent - accounted : 0);
    m.zero_traffic = m.sent == 0;
    m.pdr = m.sent == 0 ? 1.0 : static_cast<double>(m.delivered) / static_cast<double>(m.sent);
    if (!delays_.empty()) {
      auto sorted = delays_;
      std::sort(sorted.begin(), sorted.end());
      long double sum = 0;
      for (auto d : sorted) sum += d;
      m.mean_delay_us = static_cast<double>(sum / sorted.size());
      const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size())));
      m.p99_delay_us = sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    if (m.delivered > 0) {
      m.routing_overhead = static_cast<double>(m.control_packets) / static_cast<double>(m.delivered);
    } else {
      m.routing_overhead = m.control_packets > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return m;
  }

 private:
  RunMetrics m_;
  std::unordered_map<std::uint64_t, std::deque<SimTime>> pending_;
  std::vector<std::uint64_t> delays_;
};

/// Metrics of a trace file; throws devs::TraceParseError naming the line.
inline RunMetrics compute_metrics(std::istream& in) {
  MetricsAccumulator acc;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    acc.add(devs::parse_trace_line(line, n));
  }
  return acc.finish();
}

inline RunMetrics compute_metrics(const std::vector<devs::TraceRecord>& records) {
  MetricsAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

namespace detail {
inline std::string fmt_real(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}
}  // namespace detail

/// Flat `key value` lines.
inline std::string format_metrics(const RunMetrics& m) {
  std::ostringstream os;
  os << "sent " << m.sent << '\n'
     << "delivered " << m.delivered << '\n'
     << "dropped " << m.dropped() << '\n';
  for (const auto& [cause, k] : m.dropped_by_cause) os << "dropped." << cause << ' ' << k << '\n';
  os << "in_flight " << m.in_flight << '\n'
     << "conserved " << (m.conserved() ? "true" : "false") << '\n'
     << "pdr " << detail::fmt_real(m.pdr) << '\n'
     << "zero_traffic " << (m.zero_traffic ? "true" : "false") << '\n'
     << "mean_delay_us " << detail::fmt_real(m.mean_delay_us) << '\n'
     << "p99_delay_us " << m.p99_delay_us << '\n'
     << "control_packets " << m.control_packets << '\n'
     << "routing_overhead " << detail::fmt_real(m.routing_overhead) << '\n';
  if (m.pacing) {
    os << "pacing.on_time " << m.pacing->on_time << '\n'
       << "pacing.late " << m.pacing->late << '\n'
       << "pacing.dropped " << m.pacing->dropped << '\n'
       << "pacing.max_lateness_us " << m.pacing->max_lateness_us << '\n'
       << "pacing.p99_lateness_us " << m.pacing->p99_lateness_us << '\n';
  }
  return os.str();
}

}  // namespace devsnet::scenario
