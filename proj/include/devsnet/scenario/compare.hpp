#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "devsnet/devs/trace.hpp"

namespace devsnet::scenario {

struct TraceDiff {
  bool equivalent = true;
  /// 1-based line of the first divergence (full comparison only).
  std::optional<std::size_t> first_line;
  /// time, source, kind, port, digest or "missing" when one file is shorter.
  std::string field;
  std::size_t lines_a = 0;
  std::size_t lines_b = 0;
  std::size_t differing_lines = 0;
  /// Payload-only comparison: deliveries found in only one of the traces.
  std::size_t only_in_a = 0;
  std::size_t only_in_b = 0;
  std::size_t delivered_a = 0;
  std::size_t delivered_b = 0;

  std::string summary() const {
    std::ostringstream os;
    if (equivalent) {
      os << "equivalent";
    } else if (first_line) {
      os << "differ: first divergence at line " << *first_line << " (" << field << ")";
    } else {
      os << "differ: delivered payloads not equal";
    }
    os << "\nlines " << lines_a << ' ' << lines_b;
    if (differing_lines > 0) os << "\ndiffering_lines " << differing_lines;
    if (delivered_a + delivered_b > 0) {
      os << "\ndelivered " << delivered_a << ' ' << delivered_b << "\nonly_in_a " << only_in_a
         << "\nonly_in_b " << only_in_b;
    }
    return os.str();
  }
};

namespace detail {

inline const char* first_field(const devs::TraceRecord& a, const devs::TraceRecord& b) {
  if (a.time != b.time) return "time";
  if (a.source != b.source) return "source";
  if (a.kind != b.kind) return "kind";
  if (a.port != b.port) return "port";
  return "digest";
}

inline bool is_delivery(const devs::TraceRecord& r) {
  return r.kind == devs::TraceKind::output && r.port == "app_recv";
}

}  // namespace detail

/// Line-by-line comparison, or with `payload_only` a comparison of the
/// multisets of delivered record digests (timestamps and paths ignored).
inline TraceDiff compare_traces(std::istream& a, std::istream& b, bool payload_only = false) {
  TraceDiff d;
  std::map<std::uint64_t, long> balance;
  std::string la, lb;
  for (;;) {
    const bool ha = static_cast<bool>(std::getline(a, la));
    const bool hb = static_cast<bool>(std::getline(b, lb));
    if (!ha && !hb) break;
    std::optional<devs::TraceRecord> ra, rb;
    if (ha) ra = devs::parse_trace_line(la, ++d.lines_a);
    if (hb) rb = devs::parse_trace_line(lb, ++d.lines_b);
    if (payload_only) {
      if (ra && detail::is_delivery(*ra)) ++balance[ra->payload_digest], ++d.delivered_a;
      if (rb && detail::is_delivery(*rb)) --balance[rb->payload_digest], ++d.delivered_b;
      continue;
    }
    if (ra && rb && *ra == *rb) continue;
    ++d.differing_lines;
    if (!d.first_line) {
      d.first_line = std::max(d.lines_a, d.lines_b);
      d.field = ra && rb ? detail::first_field(*ra, *rb) : "missing";
    }
  }
  if (payload_only) {
    for (const auto& [digest, n] : balance) {
      if (n > 0) d.only_in_a += static_cast<std::size_t>(n);
      if (n < 0) d.only_in_b += static_cast<std::size_t>(-n);
    }
    d.equivalent = d.only_in_a == 0 && d.only_in_b == 0;
  } else {
    d.equivalent = d.differing_lines == 0;
  }
  return d;
}

inline TraceDiff compare_trace_files(const std::filesystem::path& a, const std::filesystem::path& b,
                                     bool payload_only = false) {
  std::ifstream fa(a), fb(b);
  if (!fa) throw std::runtime_error("cannot read " + a.string());
  if (!fb) throw std::runtime_error("cannot read " + b.string());
  return compare_traces(fa, fb, payload_only);
}

}  // namespace devsnet::scenario
