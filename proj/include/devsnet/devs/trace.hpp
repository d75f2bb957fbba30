#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "devsnet/core/bytes.hpp"
#include "devsnet/core/time.hpp"

namespace devsnet::devs {

enum class TraceKind { internal, external, output, injected };

inline std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::internal: return "internal";
    case TraceKind::external: return "external";
    case TraceKind::output: return "output";
    case TraceKind::injected: return "injected";
  }
  return "?";
}

inline std::optional<TraceKind> parse_trace_kind(std::string_view s) {
  if (s == "internal") return TraceKind::internal;
  if (s == "external") return TraceKind::external;
  if (s == "output") return TraceKind::output;
  if (s == "injected") return TraceKind::injected;
  return std::nullopt;
}

struct TraceRecord {
  SimTime time;
  std::string source;
  TraceKind kind = TraceKind::internal;
  /// Empty when the record has no port (internal transitions).
  std::string port;
  std::uint64_t payload_digest = 0;

  bool operator==(const TraceRecord&) const = default;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// `<time_us> <path> <kind> <port> <payload_digest_hex16>`; a missing port is "-".
inline std::string format_trace_line(const TraceRecord& r) {
  std::string line = std::to_string(r.time.micros());
  line += ' ';
  line += r.source;
  line += ' ';
  line += to_string(r.kind);
  line += ' ';
  line += r.port.empty() ? std::string("-") : r.port;
  line += ' ';
  line += hex16(r.payload_digest);
  return line;
}

class TraceParseError : public std::runtime_error {
public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

inline TraceRecord parse_trace_line(std::string_view text, std::size_t line_no = 0) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    auto end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    fields.push_back(text.substr(pos, end - pos));
    pos = end;
  }
  if (fields.size() != 5) {
    throw TraceParseError(line_no, "expected 5 fields, found " + std::to_string(fields.size()));
  }
  TraceRecord r;
  SimTime::rep t = 0;
  auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), t);
  if (ec != std::errc() || p != fields[0].data() + fields[0].size()) {
    throw TraceParseError(line_no, "bad time '" + std::string(fields[0]) + "'");
  }
  r.time = SimTime::us(t);
  r.source = std::string(fields[1]);
  auto kind = parse_trace_kind(fields[2]);
  if (!kind) throw TraceParseError(line_no, "bad kind '" + std::string(fields[2]) + "'");
  r.kind = *kind;
  if (fields[3] != "-") r.port = std::string(fields[3]);
  try {
    r.payload_digest = parse_hex16(fields[4]);
  } catch (const DecodeError& e) {
    throw TraceParseError(line_no, e.what());
  }
  return r;
}

inline void write_trace(std::ostream& os, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) os << format_trace_line(r) << '\n';
}

inline std::string trace_text(const std::vector<TraceRecord>& records) {
  std::ostringstream os;
  write_trace(os, records);
  return os.str();
}

}  // namespace devsnet::devs
