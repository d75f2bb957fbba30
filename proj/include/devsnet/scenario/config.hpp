#pragma once

#include <yaml-cpp/yaml.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "devsnet/core/duration.hpp"
#include "devsnet/manet/aodv.hpp"
#include "devsnet/manet/channel.hpp"
#include "devsnet/manet/mobility_driver.hpp"
#include "devsnet/manet/traffic.hpp"
#include "devsnet/sil/pacing.hpp"
#include "devsnet/vcs/loopback.hpp"
#include "devsnet/vcs/node.hpp"
#include "devsnet/vcs/types.hpp"

namespace devsnet::scenario {

using manet::NodeId;

/// One or more field-level problems in a scenario file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "invalid scenario:";
    for (const auto& x : e) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> errors_;
};

enum class Placement { line, grid, random, explicit_list };

struct FlowConfig {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint16_t src_port = 9000;
  std::uint16_t dst_port = 9000;
  manet::TrafficSpec spec;
};

struct ScriptEvent {
  SimTime time;
  NodeId node = 0;
  bool enable = false;
};

struct PacingSection {
  double scale = 1.0;
  sil::LatePolicy late_policy = sil::LatePolicy::release_immediately;
  std::chrono::microseconds tolerance{1000};
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  SimTime horizon = SimTime::sec(10);

  std::uint32_t node_count = 0;
  manet::BoundingBox box;
  Placement placement = Placement::random;
  double spacing = 100.0;
  /// grid placement; 0 picks ceil(sqrt(node_count)).
  std::uint32_t columns = 0;
  std::vector<manet::Vec2> positions;

  manet::MobilityConfig mobility;
  /// Resolved path of the mobility trace file (trace mobility only).
  std::string mobility_trace;

  manet::RadioModel radio;
  std::uint64_t bitrate_bps = 2'000'000;
  SimTime propagation_delay = SimTime::us(1);
  manet::AodvParams aodv;

  vcs::Mode mode = vcs::Mode::simulation;
  vcs::StackAbstraction stack = vcs::StackAbstraction::direct_route;
  std::size_t mtu = 1500;
  vcs::OsStackConfig os;
  std::uint16_t base_port = 20000;

  std::vector<FlowConfig> traffic;
  std::vector<ScriptEvent> events;
  std::optional<PacingSection> pacing;

  manet::ChannelParams channel() const { return {radio, bitrate_bps, propagation_delay}; }

  /// Re-checks cross-field constraints; throws ConfigError. A zero horizon
  /// passes here (an empty run) but is rejected in scenario files.
  void validate() const;
};

namespace detail {

/// Reads one YAML mapping, collecting errors instead of throwing.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::vector<std::string>& errors,
          std::initializer_list<std::string_view> allowed)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (!node_ || node_.IsNull()) return;
    if (!node_.IsMap()) {
      error("", "expected a mapping");
      return;
    }
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) error(key, "unknown key");
    }
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }
  YAML::Node at(const char* key) const { return has(key) ? node_[key] : YAML::Node(); }
  std::string path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  void error(std::string_view key, const std::string& what) {
    errors_.push_back((key.empty() ? path_ : path(key)) + ": " + what);
  }

  template <typename T>
  bool get(const char* key, T& out, const char* expect) {
    if (!has(key)) return false;
    try {
      if constexpr (std::is_same_v<T, std::uint8_t>) {
        const auto v = node_[key].as<unsigned>();
        if (v > 255) throw YAML::Exception(YAML::Mark::null_mark(), "range");
        out = static_cast<std::uint8_t>(v);
      } else {
        out = node_[key].as<T>();
      }
      return true;
    } catch (const YAML::Exception&) {
      error(key, std::string("expected ") + expect);
      return false;
    }
  }

  bool duration(const char* key, SimTime& out) {
    std::string text;
    if (!get(key, text, "a duration such as 250us, 10ms or 2s")) return false;
    try {
      out = parse_duration(text);
      return true;
    } catch (const std::invalid_argument& e) {
      error(key, e.what());
      return false;
    }
  }

  template <typename F>
  bool choice(const char* key, F&& parse) {
    std::string text;
    if (!get(key, text, "a string")) return false;
    try {
      parse(text);
      return true;
    } catch (const std::invalid_argument& e) {
      error(key, e.what());
      return false;
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::vector<std::string>& errors_;
};

inline manet::MobilityKind parse_mobility_kind(std::string_view s) {
  if (s == "static") return manet::MobilityKind::fixed;
  if (s == "random_waypoint") return manet::MobilityKind::random_waypoint;
  if (s == "manhattan") return manet::MobilityKind::manhattan;
  if (s == "trace") return manet::MobilityKind::trace;
  throw std::invalid_argument("unknown mobility model '" + std::string(s) +
                              "' (expected static, random_waypoint, manhattan or trace)");
}

inline std::string_view mobility_name(manet::MobilityKind k) {
  switch (k) {
    case manet::MobilityKind::fixed: return "static";
    case manet::MobilityKind::random_waypoint: return "random_waypoint";
    case manet::MobilityKind::manhattan: return "manhattan";
    case manet::MobilityKind::trace: return "trace";
  }
  return "?";
}

inline Placement parse_placement(std::string_view s) {
  if (s == "line") return Placement::line;
  if (s == "grid") return Placement::grid;
  if (s == "random") return Placement::random;
  if (s == "explicit") return Placement::explicit_list;
  throw std::invalid_argument("unknown placement '" + std::string(s) + "' (expected line, grid, random or explicit)");
}

inline manet::TrafficKind parse_traffic_kind(std::string_view s) {
  if (s == "cbr") return manet::TrafficKind::cbr;
  if (s == "bursty") return manet::TrafficKind::bursty;
  if (s == "trace") return manet::TrafficKind::trace;
  throw std::invalid_argument("unknown traffic kind '" + std::string(s) + "' (expected cbr, bursty or trace)");
}

inline manet::RadioMode parse_radio_mode(std::string_view s) {
  if (s == "unit_disk") return manet::RadioMode::unit_disk;
  if (s == "lossy") return manet::RadioMode::lossy;
  throw std::invalid_argument("unknown radio model '" + std::string(s) + "' (expected unit_disk or lossy)");
}

inline void check_node(std::vector<std::string>& errors, const std::string& field, NodeId n, std::uint32_t count) {
  if (n >= count) {
    errors.push_back(field + ": node " + std::to_string(n) + " out of range (node_count " + std::to_string(count) + ")");
  }
}

inline std::vector<std::string> check(const ScenarioConfig& c) {
  std::vector<std::string> e;
  if (c.node_count == 0) e.push_back("nodes.count: must be >= 1");
  if (c.horizon.is_infinite()) e.push_back("horizon: must be finite");
  if (!(c.box.width > 0) || !(c.box.height > 0)) e.push_back("area: width and height must be > 0");
  if (c.placement == Placement::explicit_list && c.positions.size() != c.node_count) {
    e.push_back("nodes.positions: " + std::to_string(c.positions.size()) + " positions for " +
                std::to_string(c.node_count) + " nodes");
  }
  if (c.placement == Placement::explicit_list || c.placement == Placement::random) {
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
      if (!c.box.contains(c.positions[i])) e.push_back("nodes.positions[" + std::to_string(i) + "]: outside the area");
    }
  }
  if (!(c.spacing > 0)) e.push_back("nodes.spacing: must be > 0");
  try {
    c.radio.validate();
  } catch (const std::invalid_argument& x) {
    e.push_back(x.what());
  }
  if (c.bitrate_bps == 0) e.push_back("channel.bitrate_bps: must be > 0");
  if (c.aodv.ttl == 0) e.push_back("aodv.ttl: must be >= 1");
  if (c.aodv.discovery_timeout == SimTime::zero()) e.push_back("aodv.discovery_timeout: must be > 0");
  const auto& m = c.mobility;
  if (m.kind == manet::MobilityKind::random_waypoint &&
      !(m.waypoint.v_min > 0 && m.waypoint.v_min <= m.waypoint.v_max)) {
    e.push_back("mobility: need 0 < v_min <= v_max");
  }
  if (m.kind == manet::MobilityKind::manhattan) {
    if (!(m.manhattan.pitch > 0)) e.push_back("mobility.pitch: must be > 0");
    double sum = 0;
    for (double p : m.manhattan.turn_probs) {
      if (p < 0) e.push_back("mobility.turn_probs: probabilities must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) e.push_back("mobility.turn_probs: must sum to 1");
  }
  if (m.kind == manet::MobilityKind::trace && c.mobility_trace.empty()) e.push_back("mobility.trace: required for trace mobility");
  if (m.kind != manet::MobilityKind::fixed && m.update_interval == SimTime::zero()) {
    e.push_back("mobility.update_interval: must be > 0");
  }
  if (c.mtu == 0) e.push_back("vcs.mtu: must be > 0");
  for (std::size_t i = 0; i < c.traffic.size(); ++i) {
    const auto& f = c.traffic[i];
    const std::string p = "traffic[" + std::to_string(i) + "]";
    check_node(e, p + ".src", f.src, c.node_count);
    check_node(e, p + ".dst", f.dst, c.node_count);
    for (std::size_t k = 0; k < f.spec.schedule.size(); ++k) {
      check_node(e, p + ".schedule[" + std::to_string(k) + "].dst", f.spec.schedule[k].dst, c.node_count);
    }
    try {
      f.spec.validate();
    } catch (const std::invalid_argument& x) {
      e.push_back(p + ": " + x.what());
    }
    if (f.spec.payload_len > c.mtu) e.push_back(p + ".payload_len: exceeds vcs.mtu");
  }
  for (std::size_t i = 0; i < c.events.size(); ++i) {
    check_node(e, "events[" + std::to_string(i) + "].node", c.events[i].node, c.node_count);
  }
  if (c.pacing) {
    if (!std::isfinite(c.pacing->scale) || !(c.pacing->scale > 0)) e.push_back("pacing.scale: must be finite and > 0");
    if (c.pacing->tolerance.count() < 0) e.push_back("pacing.tolerance: must be >= 0");
  }
  if (c.node_count > 0 && c.mode != vcs::Mode::simulation) {
    try {
      vcs::loopback_port(c.base_port, c.node_count - 1, 255);
    } catch (const vcs::VcsError&) {
      e.push_back("vcs.base_port: node_count does not fit the loopback port range");
    }
  }
  return e;
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  if (auto e = detail::check(*this); !e.empty()) throw ConfigError(std::move(e));
}

/// Parses a scenario document. Relative file references resolve against
/// `base_dir`. Throws ConfigError listing every problem found.
inline ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using detail::Section;
  std::vector<std::string> errors;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  ScenarioConfig c;
  Section top(root, "", errors,
              {"seed", "horizon", "area", "nodes", "mobility", "radio", "channel", "aodv", "vcs", "traffic",
               "events", "pacing"});
  if (!top.has("seed")) errors.emplace_back("seed: required (runs are never seeded from the clock)");
  top.get("seed", c.seed, "an unsigned integer");
  if (top.duration("horizon", c.horizon) && c.horizon == SimTime::zero()) top.error("horizon", "must be > 0");

  Section area(top.at("area"), "area", errors, {"width", "height"});
  area.get("width", c.box.width, "a number");
  area.get("height", c.box.height, "a number");

  Section nodes(top.at("nodes"), "nodes", errors, {"count", "placement", "spacing", "columns", "positions"});
  if (!nodes.has("count")) errors.emplace_back("nodes.count: required");
  nodes.get("count", c.node_count, "a positive integer");
  nodes.choice("placement", [&](std::string_view s) { c.placement = detail::parse_placement(s); });
  nodes.get("spacing", c.spacing, "a number");
  nodes.get("columns", c.columns, "an unsigned integer");
  if (nodes.has("positions")) {
    const auto list = nodes.at("positions");
    for (std::size_t i = 0; i < list.size(); ++i) {
      try {
        const auto xy = list[i].as<std::vector<double>>();
        if (xy.size() != 2) throw YAML::Exception(YAML::Mark::null_mark(), "size");
        c.positions.push_back({xy[0], xy[1]});
      } catch (const YAML::Exception&) {
        errors.push_back("nodes.positions[" + std::to_string(i) + "]: expected [x, y]");
      }
    }
    if (!nodes.has("placement")) c.placement = Placement::explicit_list;
  }

  Section mob(top.at("mobility"), "mobility", errors,
              {"model", "v_min", "v_max", "pause", "pitch", "turn_probs", "trace", "update_interval"});
  auto& m = c.mobility;
  mob.choice("model", [&](std::string_view s) { m.kind = detail::parse_mobility_kind(s); });
  mob.get("v_min", m.waypoint.v_min, "a number");
  mob.get("v_max", m.waypoint.v_max, "a number");
  mob.duration("pause", m.waypoint.pause);
  mob.get("pitch", m.manhattan.pitch, "a number");
  std::vector<double> turns;
  if (mob.get("turn_probs", turns, "a list of three numbers")) {
    if (turns.size() == 3) std::copy(turns.begin(), turns.end(), m.manhattan.turn_probs.begin());
    else mob.error("turn_probs", "expected [straight, left, right]");
  }
  std::string trace_file;
  if (mob.get("trace", trace_file, "a file path")) {
    std::filesystem::path p(trace_file);
    c.mobility_trace = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
  }
  mob.duration("update_interval", m.update_interval);

  Section radio(top.at("radio"), "radio", errors,
                {"model", "range", "path_loss_exponent", "reference_loss_prob", "reference_distance"});
  radio.choice("model", [&](std::string_view s) { c.radio.mode = detail::parse_radio_mode(s); });
  radio.get("range", c.radio.range, "a number");
  radio.get("path_loss_exponent", c.radio.path_loss_exponent, "a number");
  radio.get("reference_loss_prob", c.radio.reference_loss_prob, "a number");
  radio.get("reference_distance", c.radio.reference_distance, "a number");

  Section chan(top.at("channel"), "channel", errors, {"bitrate_bps", "propagation_delay"});
  chan.get("bitrate_bps", c.bitrate_bps, "an unsigned integer");
  chan.duration("propagation_delay", c.propagation_delay);

  Section aodv(top.at("aodv"), "aodv", errors,
               {"rreq_retries", "route_lifetime", "buffer_capacity", "ttl", "discovery_timeout", "intermediate_replies"});
  aodv.get("rreq_retries", c.aodv.rreq_retries, "an unsigned integer");
  aodv.duration("route_lifetime", c.aodv.route_lifetime);
  aodv.get("buffer_capacity", c.aodv.buffer_capacity, "an unsigned integer");
  aodv.get("ttl", c.aodv.ttl, "an integer in 1..255");
  aodv.duration("discovery_timeout", c.aodv.discovery_timeout);
  aodv.get("intermediate_replies", c.aodv.intermediate_replies, "true or false");

  Section v(top.at("vcs"), "vcs", errors, {"mode", "stack", "mtu", "os_layers", "per_layer_latency", "base_port"});
  v.choice("mode", [&](std::string_view s) { c.mode = vcs::parse_mode(s); });
  v.choice("stack", [&](std::string_view s) { c.stack = vcs::parse_stack(s); });
  v.get("mtu", c.mtu, "an unsigned integer");
  v.get("os_layers", c.os.layers, "an unsigned integer");
  v.duration("per_layer_latency", c.os.per_layer_latency);
  v.get("base_port", c.base_port, "a port number");

  if (top.has("traffic")) {
    const auto list = top.at("traffic");
    if (!list.IsSequence()) errors.emplace_back("traffic: expected a list");
    for (std::size_t i = 0; list.IsSequence() && i < list.size(); ++i) {
      const std::string p = "traffic[" + std::to_string(i) + "]";
      Section f(list[i], p, errors,
                {"src", "dst", "src_port", "dst_port", "kind", "rate", "burst_len", "inter_packet", "idle_gap",
                 "schedule", "payload_len", "start", "stop"});
      FlowConfig flow;
      if (!f.has("src")) f.error("src", "required");
      f.get("src", flow.src, "a node id");
      f.get("dst", flow.dst, "a node id");
      f.get("src_port", flow.src_port, "a port number");
      f.get("dst_port", flow.dst_port, "a port number");
      f.choice("kind", [&](std::string_view s) { flow.spec.kind = detail::parse_traffic_kind(s); });
      if (!f.has("dst") && flow.spec.kind != manet::TrafficKind::trace) f.error("dst", "required");
      f.get("rate", flow.spec.rate, "a number");
      f.get("burst_len", flow.spec.burst_len, "an unsigned integer");
      f.duration("inter_packet", flow.spec.inter_packet);
      f.duration("idle_gap", flow.spec.idle_gap);
      f.get("payload_len", flow.spec.payload_len, "an unsigned integer");
      f.duration("start", flow.spec.start);
      f.duration("stop", flow.spec.stop);
      if (f.has("schedule")) {
        const auto sched = f.at("schedule");
        for (std::size_t k = 0; k < sched.size(); ++k) {
          const std::string sp = p + ".schedule[" + std::to_string(k) + "]";
          Section s(sched[k], sp, errors, {"time", "dst", "payload_len"});
          manet::TraceEntry te{SimTime::zero(), flow.dst, flow.spec.payload_len};
          if (!s.has("time")) s.error("time", "required");
          s.duration("time", te.time);
          s.get("dst", te.dst, "a node id");
          s.get("payload_len", te.payload_len, "an unsigned integer");
          flow.spec.schedule.push_back(te);
        }
      }
      c.traffic.push_back(std::move(flow));
    }
  }

  if (top.has("events")) {
    const auto list = top.at("events");
    if (!list.IsSequence()) errors.emplace_back("events: expected a list");
    for (std::size_t i = 0; list.IsSequence() && i < list.size(); ++i) {
      Section ev(list[i], "events[" + std::to_string(i) + "]", errors, {"time", "node", "action"});
      ScriptEvent se;
      if (!ev.has("time")) ev.error("time", "required");
      if (!ev.has("node")) ev.error("node", "required");
      if (!ev.has("action")) ev.error("action", "required");
      ev.duration("time", se.time);
      ev.get("node", se.node, "a node id");
      ev.choice("action", [&](std::string_view s) {
        if (s == "enable") se.enable = true;
        else if (s == "disable") se.enable = false;
        else throw std::invalid_argument("expected enable or disable");
      });
      c.events.push_back(se);
    }
  }

  if (top.has("pacing")) {
    Section pc(top.at("pacing"), "pacing", errors, {"scale", "late_policy", "tolerance"});
    PacingSection ps;
    pc.get("scale", ps.scale, "a number");
    pc.choice("late_policy", [&](std::string_view s) { ps.late_policy = sil::parse_late_policy(s); });
    SimTime tol = SimTime::us(1000);
    pc.duration("tolerance", tol);
    ps.tolerance = std::chrono::microseconds(tol.micros());
    c.pacing = ps;
  }

  m.waypoint.box = c.box;
  m.manhattan.box = c.box;
  c.os.mtu = c.mtu;
  auto more = detail::check(c);
  // Field errors already explain most cross-field failures; keep both.
  errors.insert(errors.end(), more.begin(), more.end());
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError({"cannot read " + file.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), file.parent_path());
}

/// Every configurable key with its default value.
inline std::string default_scenario_text() {
  return R"(# Scenario defaults. Keys marked required have no default.
seed: 1                      # required
horizon: 10s
area:
  width: 1000
  height: 1000
nodes:
  count: 2                   # required
  placement: random          # line | grid | random | explicit
  spacing: 100               # line and grid
  columns: 0                 # grid; 0 = ceil(sqrt(count))
  # positions: [[0, 0], [50, 0]]
mobility:
  model: static              # static | random_waypoint | manhattan | trace
  v_min: 1
  v_max: 5
  pause: 0us
  pitch: 100
  turn_probs: [0.5, 0.25, 0.25]
  # trace: moves.txt         # lines of <time_us> <node> <x> <y>
  update_interval: 100ms
radio:
  model: unit_disk           # unit_disk | lossy
  range: 100
  path_loss_exponent: 2
  reference_loss_prob: 0
  reference_distance: 50
channel:
  bitrate_bps: 2000000
  propagation_delay: 1us
aodv:
  rreq_retries: 2
  route_lifetime: 3s
  buffer_capacity: 64
  ttl: 32
  discovery_timeout: 1s
  intermediate_replies: false
vcs:
  mode: simulation           # execution | emulation | simulation
  stack: direct_route        # direct_route | full_stack
  mtu: 1500
  os_layers: 2
  per_layer_latency: 50us
  base_port: 20000
traffic: []
  # - src: 0
  #   dst: 1
  #   kind: cbr              # cbr | bursty | trace
  #   rate: 1
  #   burst_len: 1
  #   inter_packet: 10ms
  #   idle_gap: 1s
  #   payload_len: 64
  #   src_port: 9000
  #   dst_port: 9000
  #   start: 0us
  #   stop: inf
  #   schedule: [{time: 1s, dst: 1, payload_len: 64}]
events: []
  # - {time: 5s, node: 1, action: disable}
# pacing:
#   scale: 1
#   late_policy: release_immediately   # drop | release_immediately | abort
#   tolerance: 1ms
)";
}

}  // namespace devsnet::scenario
