#include <gtest/gtest.h>

#include <queue>
#include <sstream>

#include "devsnet/scenario/compare.hpp"
#include "devsnet/scenario/config.hpp"
#include "devsnet/scenario/metrics.hpp"
#include "devsnet/scenario/runner.hpp"
#include "devsnet/scenario/sim_stack.hpp"

using namespace devsnet;
using namespace devsnet::scenario;

namespace {

const char* kLine3 = R"(
seed: 7
horizon: 10s
nodes: {count: 3, placement: line, spacing: 80}
radio: {range: 100}
traffic:
  - {src: 0, dst: 2, kind: cbr, rate: 4, payload_len: 32}
)";

bool has_error(const ConfigError& e, const std::string& needle) {
  for (const auto& x : e.errors()) {
    if (x.find(needle) != std::string::npos) return true;
  }
  return false;
}

ConfigError parse_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ConfigError for:\n" << text;
  return ConfigError({});
}

devs::TraceRecord out(std::uint64_t t, const char* port, std::uint64_t digest) {
  return {SimTime::us(t), "scenario/n0/vcs", devs::TraceKind::output, port, digest};
}

// Hop distances from `src` in the unit-disk graph.
std::vector<int> bfs(const std::vector<manet::NodeState>& nodes, double range, NodeId src) {
  std::vector<int> d(nodes.size(), -1);
  std::queue<NodeId> q;
  d[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (NodeId v = 0; v < nodes.size(); ++v) {
      if (d[v] < 0 && manet::distance(nodes[u].position, nodes[v].position) <= range) {
        d[v] = d[u] + 1;
        q.push(v);
      }
    }
  }
  return d;
}

}  // namespace

TEST(ScenarioConfig, MinimalGetsDefaults) {
  const auto c = parse_scenario("seed: 3\nnodes: {count: 2}\n");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.node_count, 2u);
  EXPECT_EQ(c.horizon, SimTime::sec(10));
  EXPECT_EQ(c.mode, vcs::Mode::simulation);
  EXPECT_EQ(c.stack, vcs::StackAbstraction::direct_route);
  EXPECT_EQ(c.mobility.kind, manet::MobilityKind::fixed);
  EXPECT_EQ(c.radio.range, 100.0);
  EXPECT_EQ(c.aodv.ttl, manet::AodvParams{}.ttl);
  EXPECT_TRUE(c.traffic.empty());
  EXPECT_FALSE(c.pacing);
}

TEST(ScenarioConfig, PrintedDefaultsParseToDefaults) {
  const auto printed = parse_scenario(default_scenario_text());
  const auto minimal = parse_scenario("seed: 1\nnodes: {count: 2}\n");
  EXPECT_EQ(printed.horizon, minimal.horizon);
  EXPECT_EQ(printed.box.width, minimal.box.width);
  EXPECT_EQ(printed.mobility.update_interval, minimal.mobility.update_interval);
  EXPECT_EQ(printed.mobility.manhattan.turn_probs, minimal.mobility.manhattan.turn_probs);
  EXPECT_EQ(printed.radio.reference_distance, minimal.radio.reference_distance);
  EXPECT_EQ(printed.bitrate_bps, minimal.bitrate_bps);
  EXPECT_EQ(printed.aodv.route_lifetime, minimal.aodv.route_lifetime);
  EXPECT_EQ(printed.aodv.discovery_timeout, minimal.aodv.discovery_timeout);
  EXPECT_EQ(printed.os.per_layer_latency, minimal.os.per_layer_latency);
  EXPECT_EQ(printed.base_port, minimal.base_port);
}

TEST(ScenarioConfig, MissingSeedNamesTheField) {
  const auto e = parse_error("nodes: {count: 2}\n");
  EXPECT_TRUE(has_error(e, "seed: required"));
}

TEST(ScenarioConfig, NodeReferencesOutOfRange) {
  const auto e = parse_error("seed: 1\nnodes: {count: 3}\ntraffic: [{src: 0, dst: 3}]\nevents: [{time: 1s, node: 9, action: disable}]\n");
  EXPECT_TRUE(has_error(e, "traffic[0].dst: node 3 out of range"));
  EXPECT_TRUE(has_error(e, "events[0].node"));
}

TEST(ScenarioConfig, FieldErrors) {
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nhorizon: 0s\n"), "horizon: must be > 0"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nhorizon: 10 parsecs\n"), "horizon"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {cuont: 2}\n"), "nodes.cuont: unknown key"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nradoi: {}\n"), "radoi: unknown key"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nvcs: {mode: hybrid}\n"), "vcs.mode"));
  EXPECT_TRUE(has_error(parse_error("seed: x\nnodes: {count: 2}\n"), "seed: expected"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nmobility: {model: manhattan, turn_probs: [0.5, 0.5, 0.5]}\n"),
                        "turn_probs: must sum to 1"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2, positions: [[0, 0]]}\n"), "nodes.positions"));
  EXPECT_TRUE(has_error(parse_error("seed: 1\nnodes: {count: 2}\nvcs: {mtu: 16}\ntraffic: [{src: 0, dst: 1, payload_len: 64}]\n"),
                        "traffic[0].payload_len"));
  EXPECT_TRUE(has_error(parse_error("seed: [1\n"), "syntax"));
}

TEST(ScenarioConfig, ErrorsAreCollected) {
  const auto e = parse_error("nodes: {count: 2, spacing: -1}\nbogus: 1\n");
  EXPECT_GE(e.errors().size(), 3u);
}

TEST(ScenarioConfig, ExplicitPositionsImplyExplicitPlacement) {
  const auto c = parse_scenario("seed: 1\nnodes: {count: 2, positions: [[1, 2], [3, 4]]}\n");
  EXPECT_EQ(c.placement, Placement::explicit_list);
  const auto nodes = initial_nodes(c);
  EXPECT_EQ(nodes[1].position, (manet::Vec2{3, 4}));
}

TEST(ScenarioAssembly, BuildsForEveryStackAndMobility) {
  for (const char* extra : {"", "vcs: {stack: full_stack}\n", "mobility: {model: random_waypoint}\n",
                            "mobility: {model: manhattan, pitch: 100}\n",
                            "events: [{time: 1s, node: 1, action: disable}]\n"}) {
    const auto c = parse_scenario(std::string(kLine3) + extra);
    auto root = devs::build_root(build_scenario(c));
    EXPECT_NO_THROW(root.model<vcs::VcsNode>("scenario/n2/vcs")) << extra;
  }
}

// Lossless 3-node line, CBR from the first to the last node: everything that
// BFS says is reachable gets delivered.
TEST(ScenarioRun, LosslessLineDeliversEverything) {
  const auto c = parse_scenario(kLine3);
  const auto d = bfs(initial_nodes(c), c.radio.range, 0);
  ASSERT_EQ(d[2], 2);
  const auto r = run_scenario(c);
  EXPECT_EQ(r.metrics.sent, 39u);  // 0.25s .. 9.75s
  EXPECT_EQ(r.metrics.delivered, r.metrics.sent);
  EXPECT_DOUBLE_EQ(r.metrics.pdr, 1.0);
  EXPECT_TRUE(r.metrics.conserved());
  EXPECT_EQ(r.metrics.in_flight, 0u);
  EXPECT_GT(r.metrics.control_packets, 0u);
  EXPECT_GT(r.metrics.mean_delay_us, 0);
  ASSERT_EQ(r.delivered.size(), r.metrics.sent);
  for (const auto& x : r.delivered) {
    EXPECT_EQ(x.src, 0u);
    EXPECT_EQ(x.dst, 2u);
  }
}

TEST(ScenarioRun, SameSeedSameTrace) {
  auto c = parse_scenario(std::string(kLine3) + "mobility: {model: random_waypoint, v_min: 5, v_max: 20}\n");
  std::ostringstream a, b;
  const auto ra = run_scenario(c, {&a});
  const auto rb = run_scenario(c, {&b});
  EXPECT_EQ(ra.trace_digest, rb.trace_digest);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(ra.trace_lines, rb.trace_lines);
  c.seed = 8;
  EXPECT_NE(run_scenario(c).trace_digest, ra.trace_digest);
}

TEST(ScenarioRun, ZeroHorizonIsEmpty) {
  auto c = parse_scenario(kLine3);
  c.horizon = SimTime::zero();
  std::ostringstream os;
  const auto r = run_scenario(c, {&os});
  EXPECT_EQ(r.trace_lines, 0u);
  EXPECT_TRUE(os.str().empty());
  EXPECT_EQ(r.metrics.sent, 0u);
  EXPECT_EQ(r.metrics.delivered, 0u);
  EXPECT_EQ(r.metrics.dropped(), 0u);
  EXPECT_TRUE(r.metrics.zero_traffic);
}

TEST(ScenarioRun, HorizonIsHalfOpen) {
  auto c = parse_scenario(kLine3);
  c.horizon = SimTime::ms(1000);  // firings at 250, 500, 750ms; 1000ms is excluded
  EXPECT_EQ(run_scenario(c).metrics.sent, 3u);
}

TEST(ScenarioRun, TraceFileGivesTheSameMetrics) {
  const auto c = parse_scenario(kLine3);
  std::ostringstream os;
  const auto r = run_scenario(c, {&os});
  std::istringstream in(os.str());
  const auto m = compute_metrics(in);
  EXPECT_EQ(m.sent, r.metrics.sent);
  EXPECT_EQ(m.delivered, r.metrics.delivered);
  EXPECT_EQ(m.control_packets, r.metrics.control_packets);
  EXPECT_EQ(m.mean_delay_us, r.metrics.mean_delay_us);
  EXPECT_EQ(m.p99_delay_us, r.metrics.p99_delay_us);
  EXPECT_EQ(format_metrics(m), format_metrics(r.metrics));
}

// Each OS traversal costs layers x per-layer latency, once going down at the
// sender and once going up at the receiver.
TEST(ScenarioRun, FullStackAddsTwoTraversals) {
  const std::string base = "seed: 2\nhorizon: 5s\nnodes: {count: 2, placement: line, spacing: 50}\n"
                           "traffic: [{src: 0, dst: 1, rate: 2, payload_len: 100}]\n";
  const auto direct = run_scenario(parse_scenario(base));
  const auto full = run_scenario(parse_scenario(base + "vcs: {stack: full_stack, os_layers: 3, per_layer_latency: 40us}\n"));
  ASSERT_EQ(direct.metrics.delivered, full.metrics.delivered);
  EXPECT_DOUBLE_EQ(full.metrics.mean_delay_us - direct.metrics.mean_delay_us, 2 * 3 * 40.0);
  EXPECT_TRUE(full.metrics.conserved());
}

TEST(ScenarioRun, DisabledDestinationCountsDrops) {
  const auto c = parse_scenario(std::string(kLine3) + "events: [{time: 5s, node: 2, action: disable}]\n");
  const auto r = run_scenario(c);
  EXPECT_GT(r.metrics.delivered, 0u);
  EXPECT_LT(r.metrics.delivered, r.metrics.sent);
  EXPECT_GT(r.metrics.dropped(), 0u);
  EXPECT_TRUE(r.metrics.conserved()) << format_metrics(r.metrics);
}

TEST(ScenarioRun, LossyRadioStillConserves) {
  auto cfg = parse_scenario(kLine3);
  cfg.radio.mode = manet::RadioMode::lossy;
  cfg.radio.reference_loss_prob = 0.3;
  cfg.radio.reference_distance = 40;
  const auto r = run_scenario(cfg);
  EXPECT_LT(r.metrics.pdr, 1.0);
  EXPECT_TRUE(r.metrics.conserved()) << format_metrics(r.metrics);
}

TEST(ScenarioMetrics, PdrFromHandTrace) {
  std::vector<devs::TraceRecord> t;
  for (std::uint64_t i = 0; i < 10; ++i) t.push_back(out(i, "app_sent", i));
  for (std::uint64_t i = 0; i < 8; ++i) t.push_back(out(100 + i, "app_recv", i));
  t.push_back(out(200, "drop_noroute", 8));
  const auto m = compute_metrics(t);
  EXPECT_DOUBLE_EQ(m.pdr, 0.8);
  EXPECT_EQ(m.dropped_by_cause.at("noroute"), 1u);
  EXPECT_EQ(m.in_flight, 1u);
  EXPECT_TRUE(m.conserved());
}

TEST(ScenarioMetrics, ZeroTraffic) {
  const auto m = compute_metrics(std::vector<devs::TraceRecord>{out(5, "tx_ctl", 1)});
  EXPECT_DOUBLE_EQ(m.pdr, 1.0);
  EXPECT_TRUE(m.zero_traffic);
  EXPECT_TRUE(std::isinf(m.routing_overhead));
  EXPECT_NE(format_metrics(m).find("routing_overhead inf"), std::string::npos);
}

TEST(ScenarioMetrics, KnownDelays) {
  // delays 5, 15 and 80 us
  const std::vector<devs::TraceRecord> t{out(0, "app_sent", 1),  out(10, "app_sent", 2),
                                         out(5, "app_recv", 1),  out(20, "app_sent", 3),
                                         out(25, "app_recv", 2), out(100, "app_recv", 3),
                                         out(1, "tx_ctl", 9),    out(2, "tx_ctl", 9)};
  const auto m = compute_metrics(t);
  EXPECT_DOUBLE_EQ(m.mean_delay_us, 100.0 / 3.0);
  EXPECT_EQ(m.p99_delay_us, 80u);
  EXPECT_DOUBLE_EQ(m.routing_overhead, 2.0 / 3.0);
}

TEST(ScenarioMetrics, MalformedLineNamesTheLine) {
  std::istringstream in("0 scenario/n0/vcs output app_sent 0000000000000001\n12 oops\n");
  try {
    compute_metrics(in);
    FAIL();
  } catch (const devs::TraceParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ScenarioCompare, IdenticalAndDiverging) {
  const std::string a = "0 x output app_sent 0000000000000001\n5 x output app_recv 0000000000000001\n";
  std::istringstream a1(a), a2(a);
  const auto same = compare_traces(a1, a2);
  EXPECT_TRUE(same.equivalent);
  EXPECT_EQ(same.summary().substr(0, 10), "equivalent");

  std::string b = a;
  b[b.size() - 2] = '2';
  std::istringstream a3(a), b1(b);
  const auto diff = compare_traces(a3, b1);
  EXPECT_FALSE(diff.equivalent);
  EXPECT_EQ(diff.first_line, 2u);
  EXPECT_EQ(diff.field, "digest");

  std::istringstream a4(a), c1(a + "9 x internal - 0000000000000000\n");
  const auto longer = compare_traces(a4, c1);
  EXPECT_EQ(longer.first_line, 3u);
  EXPECT_EQ(longer.field, "missing");
}

TEST(ScenarioCompare, PayloadOnlyIgnoresTimesAndOrder) {
  std::istringstream a("1 p output app_recv 00000000000000aa\n2 p output app_recv 00000000000000bb\n");
  std::istringstream b("7 q output app_recv 00000000000000bb\n9 q output app_recv 00000000000000aa\n3 q internal - 0000000000000000\n");
  EXPECT_TRUE(compare_traces(a, b, true).equivalent);
  std::istringstream c("1 p output app_recv 00000000000000aa\n");
  std::istringstream d("1 p output app_recv 00000000000000cc\n");
  const auto r = compare_traces(c, d, true);
  EXPECT_FALSE(r.equivalent);
  EXPECT_EQ(r.only_in_a, 1u);
  EXPECT_EQ(r.only_in_b, 1u);
}

// Same scenario, simulation vs real loopback sockets: same deliveries,
// different timestamps.
TEST(ScenarioCrossMode, ExecutionMatchesSimulation) {
  auto c = parse_scenario(
      "seed: 4\nhorizon: 1s\nnodes: {count: 3, placement: line, spacing: 80}\n"
      "vcs: {base_port: 26000}\n"
      "traffic: [{src: 0, dst: 2, rate: 20, payload_len: 48}, {src: 2, dst: 1, rate: 10, dst_port: 7}]\n");
  std::ostringstream st, et;
  const auto sim = run_scenario(c, {&st});
  c.mode = vcs::Mode::execution;
  const auto exe = run_scenario(c, {&et});
  EXPECT_EQ(sim.metrics.sent, 28u);  // 19 + 9
  EXPECT_EQ(exe.metrics.sent, sim.metrics.sent);
  EXPECT_EQ(exe.delivered, sim.delivered);
  EXPECT_TRUE(exe.metrics.conserved());
  std::istringstream s1(st.str()), e1(et.str()), s2(st.str()), e2(et.str());
  EXPECT_TRUE(compare_traces(s1, e1, true).equivalent);
  EXPECT_FALSE(compare_traces(s2, e2).equivalent);
}

TEST(ScenarioCrossMode, EmulationMatchesSimulation) {
  auto c = parse_scenario(
      "seed: 4\nhorizon: 500ms\nnodes: {count: 2, placement: line, spacing: 80}\n"
      "vcs: {base_port: 26600, mode: emulation}\ntraffic: [{src: 1, dst: 0, rate: 10}]\n");
  const auto emu = run_scenario(c);
  c.mode = vcs::Mode::simulation;
  const auto sim = run_scenario(c);
  EXPECT_EQ(emu.delivered, sim.delivered);
  EXPECT_EQ(emu.metrics.delivered, 4u);
}

TEST(ScenarioPacing, PacedRunReportsReleases) {
  auto c = parse_scenario(std::string(kLine3) + "pacing: {scale: 0.05, tolerance: 2ms}\n");
  c.horizon = SimTime::sec(4);
  const auto r = run_scenario(c);
  ASSERT_TRUE(r.metrics.pacing);
  EXPECT_EQ(r.metrics.pacing->on_time + r.metrics.pacing->late, r.metrics.delivered);
  EXPECT_NE(format_metrics(r.metrics).find("pacing.on_time"), std::string::npos);
}

// Application code written against the socket API runs unchanged on the
// simulated network.
TEST(SimulationStackTest, SocketsOverTheSimulatedNetwork) {
  auto c = parse_scenario("seed: 5\nnodes: {count: 3, placement: line, spacing: 80}\n");
  SimulationStack stack(c);
  auto a = stack.open(0, 100);
  auto b = stack.open(2, 200);
  const Bytes msg{1, 2, 3, 4};
  stack.send(a, 2, 200, msg);
  EXPECT_FALSE(stack.recv(b));
  stack.poll(SimTime::sec(2));
  const auto d = stack.recv(b);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->src_node, 0u);
  EXPECT_EQ(d->src_port, 100u);
  EXPECT_EQ(d->payload, msg);
  EXPECT_EQ(stack.delivered(), 1u);
  EXPECT_THROW(stack.send(a, 3, 1, msg), vcs::VcsError);
  EXPECT_FALSE(stack.trace().empty());
}
