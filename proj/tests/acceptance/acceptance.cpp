// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Every bound is a constant below.

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "devsnet/bus/converter.hpp"
#include "devsnet/bus/endpoint.hpp"
#include "devsnet/bus/transport.hpp"
#include "devsnet/devs/flatten.hpp"
#include "devsnet/devs/validate.hpp"
#include "devsnet/scenario/compare.hpp"
#include "devsnet/scenario/runner.hpp"
#include "devsnet/sil/pacing.hpp"
#include "support/random_models.hpp"

using namespace devsnet;
using namespace devsnet::scenario;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

// Criterion 1
constexpr int kClosureModels = 200;
constexpr std::size_t kClosureMaxAtomics = 10;
constexpr std::size_t kClosureMaxDepth = 3;
constexpr auto kClosureBudget = 60s;
// Criterion 2
constexpr int kDeterminismRuns = 3;
constexpr auto kDeterminismBudget = 120s;
// Criterion 3
constexpr int kOracleTopologies = 30;
constexpr std::uint32_t kOracleMaxNodes = 30;
constexpr auto kOracleBudget = 120s;
// Criterion 4
constexpr double kLossLevels[] = {0.0, 0.1, 0.3, 0.5};
constexpr int kSensitivitySeeds = 20;
constexpr auto kSensitivityBudget = 600s;
// Criterion 5
constexpr auto kCrossModeBudget = 60s;
// Criterion 6
constexpr int kPacedEvents = 100;  // 1s of 10ms-period events
constexpr auto kPacingPeriod = 10ms;
constexpr auto kPacingCompute = 3ms;
constexpr auto kPacingTolerance = 1000us;
constexpr auto kPacingBudget = 30s;
// Criterion 7
constexpr std::uint32_t kScaleCols = 40;
constexpr std::uint32_t kScaleRows = 25;
constexpr int kScaleFlows = 10;
constexpr auto kScaleBudget = 300s;
constexpr long kScaleMemoryKb = 2L * 1024 * 1024;
// Criterion 8
constexpr int kWireMessages = 10000;
constexpr auto kBusBudget = 30s;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;
// Conservation over every scenario run of criteria 2-7.
std::uint64_t conserved_runs = 0;
std::vector<std::string> unconserved;

void record_conservation(const std::string& what, const RunMetrics& m) {
  ++conserved_runs;
  if (!m.conserved()) {
    std::ostringstream os;
    os << what << ": sent " << m.sent << " delivered " << m.delivered << " dropped " << m.dropped() << " in_flight "
       << m.in_flight;
    unconserved.push_back(os.str());
  }
}

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

void criterion(int n, const char* title, Clock::duration budget, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const auto took = Clock::now() - start;
  if (took > budget) {
    o.pass = false;
    o.detail += "; over the time budget";
  }
  std::printf("CRITERION %d %s: %s (%s) [%.1fs of %.0fs]\n", n, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(),
              seconds(took), seconds(budget));
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

long peak_rss_kb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

std::vector<int> bfs_hops(const std::vector<manet::NodeState>& nodes, double range, NodeId src) {
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

ScenarioConfig base_config(std::uint64_t seed, std::uint32_t nodes) {
  ScenarioConfig c;
  c.seed = seed;
  c.node_count = nodes;
  return c;
}

manet::TrafficSpec cbr(double rate, SimTime stop = kInfinity) {
  manet::TrafficSpec s;
  s.kind = manet::TrafficKind::cbr;
  s.rate = rate;
  s.stop = stop;
  return s;
}

// ---------------------------------------------------------------------------

Outcome closure() {
  int mismatches = 0;
  std::size_t lines = 0;
  for (int seed = 1; seed <= kClosureModels; ++seed) {
    const auto model = testing::RandomModelBuilder(static_cast<std::uint64_t>(seed) * 7919, kClosureMaxAtomics,
                                                   kClosureMaxDepth).build();
    if (!devs::validate_coupling(model).empty()) return {false, "invalid random model, seed " + std::to_string(seed)};
    const auto inj = testing::random_injections(static_cast<std::uint64_t>(seed), 10, SimTime::ms(500));
    const auto hier = testing::run_trace(model, inj, SimTime::ms(500));
    const auto flat = testing::run_trace(devs::flatten(model), inj, SimTime::ms(500));
    lines += static_cast<std::size_t>(std::count(hier.begin(), hier.end(), '\n'));
    if (hier != flat) ++mismatches;
  }
  return {mismatches == 0, std::to_string(kClosureModels) + " hierarchies, " + std::to_string(lines) +
                               " trace lines, " + std::to_string(mismatches) + " mismatches"};
}

ScenarioConfig waypoint50() {
  auto c = base_config(2024, 50);
  c.horizon = SimTime::sec(60);
  c.box = {800, 800};
  c.placement = Placement::random;
  c.mobility.kind = manet::MobilityKind::random_waypoint;
  c.mobility.waypoint = {c.box, 1.0, 10.0, SimTime::sec(2)};
  c.mobility.update_interval = SimTime::ms(250);
  c.radio.range = 180;
  for (NodeId s = 0; s < 5; ++s) c.traffic.push_back({s, s + 25, 9000, 9000, cbr(2)});
  return c;
}

Outcome determinism() {
  const auto c = waypoint50();
  std::vector<std::uint64_t> digests;
  std::vector<std::string> metrics;
  std::size_t lines = 0;
  for (int i = 0; i < kDeterminismRuns; ++i) {
    const auto r = run_scenario(c);
    record_conservation("criterion 2 run " + std::to_string(i), r.metrics);
    digests.push_back(r.trace_digest);
    metrics.push_back(format_metrics(r.metrics));
    lines = r.trace_lines;
  }
  const bool same = std::all_of(digests.begin(), digests.end(), [&](auto d) { return d == digests[0]; }) &&
                    std::all_of(metrics.begin(), metrics.end(), [&](auto& m) { return m == metrics[0]; });
  return {same, std::to_string(kDeterminismRuns) + " runs, digest " + hex16(digests[0]) + ", " + std::to_string(lines) +
                    " lines, " + (same ? "identical" : "DIFFERENT")};
}

Outcome aodv_oracle() {
  Rng topo(777);
  std::size_t routes = 0, wrong = 0, broken = 0, incidental = 0, built = 0;
  double worst_pdr = 1.0;
  std::uint64_t seed = 0;
  while (built < kOracleTopologies) {
    ++seed;
    const auto n = static_cast<std::uint32_t>(5 + topo.below(kOracleMaxNodes - 4));
    auto c = base_config(seed, n);
    c.horizon = SimTime::sec(20);
    const double side = 60.0 * std::sqrt(static_cast<double>(n));
    c.box = {side, side};
    c.placement = Placement::random;
    c.radio.range = 100;
    const auto nodes = initial_nodes(c);
    bool connected = true;
    std::vector<std::vector<int>> hops;
    for (NodeId s = 0; s < n; ++s) {
      hops.push_back(bfs_hops(nodes, c.radio.range, s));
      if (std::count(hops.back().begin(), hops.back().end(), -1) > 0) connected = false;
    }
    if (!connected) continue;
    ++built;
    c.aodv.ttl = 64;
    Rng pick(seed);
    for (int f = 0; f < 4; ++f) {
      const auto s = static_cast<NodeId>(pick.below(n));
      auto d = static_cast<NodeId>(pick.below(n - 1));
      if (d >= s) ++d;
      c.traffic.push_back({s, d, 9000, 9000, cbr(5, SimTime::sec(15))});
    }
    auto root = devs::build_root(build_scenario(c));
    MetricsAccumulator acc;
    root.run_until(c.horizon - SimTime::us(1), [&](const devs::TraceRecord& r) { acc.add(r); });
    const auto m = acc.finish(detail::model_in_flight(root, c));
    record_conservation("criterion 3 seed " + std::to_string(seed), m);
    worst_pdr = std::min(worst_pdr, m.pdr);
    auto table_of = [&](NodeId i) -> const manet::RoutingTable& {
      return root.model<manet::AodvRouter>("scenario/" + node_name(i) + "/aodv").table();
    };
    // Follow the next-hop chain a flow uses; every entry on it must be a
    // shortest path.
    auto walk = [&](NodeId from, NodeId to) {
      NodeId u = from;
      for (std::uint32_t steps = 0; u != to; ++steps) {
        const auto* e = table_of(u).find(to);
        if (e == nullptr || !e->valid || steps > n) {
          ++broken;
          return;
        }
        ++routes;
        if (static_cast<int>(e->hop_count) != hops[u][to]) ++wrong;
        u = e->next_hop;
      }
    };
    for (const auto& f : c.traffic) {
      walk(f.src, f.dst);
      walk(f.dst, f.src);
    }
    for (NodeId i = 0; i < n; ++i) {
      for (const auto& [dest, e] : table_of(i).entries()) {
        if (e.valid && static_cast<int>(e.hop_count) != hops[i][dest]) ++incidental;
      }
    }
  }
  std::ostringstream os;
  os << built << " topologies, " << routes << " entries on flow routes, " << wrong << " with non-BFS hop count, "
     << broken << " broken chains, min pdr " << worst_pdr << "; " << incidental
     << " reverse entries learned off the flow paths are longer than BFS";
  return {wrong == 0 && broken == 0 && routes > 0 && worst_pdr == 1.0, os.str()};
}

Outcome sensitivity() {
  std::vector<double> mean, se;
  for (double loss : kLossLevels) {
    std::vector<double> pdr;
    for (int s = 1; s <= kSensitivitySeeds; ++s) {
      auto c = base_config(static_cast<std::uint64_t>(s), 25);
      c.horizon = SimTime::sec(30);
      c.placement = Placement::grid;
      c.spacing = 50;
      c.radio = {75, 2.0, loss, 50, loss > 0 ? manet::RadioMode::lossy : manet::RadioMode::unit_disk};
      c.aodv.rreq_retries = 3;
      const std::pair<NodeId, NodeId> flows[] = {{0, 24}, {4, 20}, {12, 2}, {6, 18}, {22, 10}, {15, 9}};
      for (auto [a, b] : flows) c.traffic.push_back({a, b, 9000, 9000, cbr(4, SimTime::sec(25))});
      const auto r = run_scenario(c);
      record_conservation("criterion 4 loss " + std::to_string(loss) + " seed " + std::to_string(s), r.metrics);
      pdr.push_back(r.metrics.pdr);
    }
    const double m = std::accumulate(pdr.begin(), pdr.end(), 0.0) / static_cast<double>(pdr.size());
    double var = 0;
    for (double p : pdr) var += (p - m) * (p - m);
    var /= static_cast<double>(pdr.size() - 1);
    mean.push_back(m);
    se.push_back(std::sqrt(var / static_cast<double>(pdr.size())));
  }
  bool ok = true;
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    os << (i ? ", " : "mean pdr ") << kLossLevels[i] << "->" << mean[i] << "+-" << se[i];
    if (i > 0) {
      const double gap = mean[i - 1] - mean[i];
      if (!(gap > std::hypot(se[i - 1], se[i]))) ok = false;
    }
  }
  os << "; adjacent gaps must exceed the combined standard error";
  return {ok, os.str()};
}

Outcome cross_mode() {
  auto c = base_config(31, 5);
  c.horizon = SimTime::sec(2);
  c.placement = Placement::line;
  c.spacing = 70;
  c.base_port = 27000;
  c.traffic.push_back({0, 4, 9000, 9000, cbr(10)});
  c.traffic.push_back({3, 1, 5000, 6000, cbr(5)});
  c.traffic.back().spec.payload_len = 200;
  std::ostringstream st, et;
  const auto sim = run_scenario(c, {&st});
  c.mode = vcs::Mode::execution;
  const auto exe = run_scenario(c, {&et});
  record_conservation("criterion 5 simulation", sim.metrics);
  record_conservation("criterion 5 execution", exe.metrics);
  std::istringstream a(st.str()), b(et.str());
  const auto diff = compare_traces(a, b, true);
  const bool ok = sim.delivered == exe.delivered && diff.equivalent && sim.metrics.sent > 0 &&
                  sim.delivered.size() == sim.metrics.sent;
  return {ok, std::to_string(sim.delivered.size()) + " simulated vs " + std::to_string(exe.delivered.size()) +
                  " executed deliveries of " + std::to_string(sim.metrics.sent) + " sent; multisets " +
                  (sim.delivered == exe.delivered ? "equal" : "DIFFER")};
}

Outcome pacing() {
  sil::PacingConfig<> cfg;
  cfg.tolerance = kPacingTolerance;
  cfg.late_policy = sil::LatePolicy::release_immediately;
  cfg.epoch = Clock::now() + 20ms;
  sil::PacingLoop loop(cfg);

  std::vector<Clock::time_point> seen;
  std::vector<Clock::time_point> due;
  std::thread consumer([&] {
    while (auto e = loop.next_release(3s)) {
      seen.push_back(Clock::now());
      due.push_back(e->due_wall);
    }
  });
  for (int k = 1; k <= kPacedEvents; ++k) {
    std::this_thread::sleep_until(cfg.epoch + (k - 1) * kPacingPeriod);
    const auto until = Clock::now() + kPacingCompute;
    while (Clock::now() < until) {
    }
    loop.submit({"actuator", "tick", {}, SimTime::us(static_cast<std::uint64_t>(k) * 10'000)});
  }
  loop.close();
  loop.wait();
  consumer.join();
  const auto rep = loop.report();

  int early = 0;
  std::vector<std::int64_t> lateness;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] < due[i]) ++early;
    lateness.push_back(std::chrono::duration_cast<std::chrono::microseconds>(seen[i] - due[i]).count());
  }
  std::sort(lateness.begin(), lateness.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(lateness.size())));
  const auto p99_seen = lateness.empty() ? 0 : lateness[rank - 1];
  const auto accounted = rep.on_time + rep.late + rep.dropped;
  ++conserved_runs;
  if (accounted != static_cast<std::uint64_t>(kPacedEvents)) unconserved.push_back("criterion 6 pacing accounting");

  std::ostringstream os;
  os << seen.size() << " releases, " << early << " early, p99 lateness " << rep.p99_lateness_us
     << "us at release and " << p99_seen << "us at the consumer, max " << rep.max_lateness_us << "us, "
     << rep.late << " late";
  const bool ok = seen.size() == static_cast<std::size_t>(kPacedEvents) && early == 0 &&
                  rep.p99_lateness_us <= kPacingTolerance.count();
  return {ok, os.str()};
}

Outcome scale() {
  auto c = base_config(1000, kScaleCols * kScaleRows);
  c.horizon = SimTime::sec(60);
  c.placement = Placement::grid;
  c.columns = kScaleCols;
  c.spacing = 80;
  c.box = {80.0 * kScaleCols, 80.0 * kScaleRows};
  c.radio.range = 100;
  c.aodv.ttl = 80;
  Rng pick(99);
  for (int f = 0; f < kScaleFlows; ++f) {
    const auto s = static_cast<NodeId>(pick.below(c.node_count));
    auto d = static_cast<NodeId>(pick.below(c.node_count - 1));
    if (d >= s) ++d;
    c.traffic.push_back({s, d, 9000, 9000, cbr(2)});
  }
  const auto r = run_scenario(c);
  record_conservation("criterion 7", r.metrics);
  const long rss = peak_rss_kb();
  std::ostringstream os;
  os << c.node_count << " nodes, " << r.trace_lines << " trace lines, sent " << r.metrics.sent << " delivered "
     << r.metrics.delivered << " in_flight " << r.metrics.in_flight << ", peak RSS " << rss / 1024 << " MiB, "
     << (r.metrics.conserved() ? "conserved" : "NOT conserved");
  return {r.metrics.conserved() && rss <= kScaleMemoryKb && r.metrics.sent > 0, os.str()};
}

Outcome bus_causality() {
  using namespace bus;
  // A scripted endpoint stamps an event at 4s while the grant is 5s.
  auto [client, server_t] = make_queue_pair();
  ScriptedEndpoint ep({{SimTime::sec(5), SimTime::sec(4), "out", {1}}});
  EndpointServer server(ep, *server_t, 8);
  std::thread host([&] { server.run(5ms); });
  std::vector<devs::Port> ports{{"in", devs::PortDirection::input, "s"}, {"out", devs::PortDirection::output, "s"}};
  auto conv = wrap({8, ports, TimeNature::discrete_event, {}}, std::move(client), 2s);
  devs::CoupledSpec top("top");
  top.add_input("in", "s").add_output("out", "s");
  top.add("ep", conv);
  top.couple_input("in", "ep", "in").couple_output("ep", "out", "out");
  auto root = devs::build_root(top);
  bool faulted = false;
  std::string why;
  try {
    root.run_until(SimTime::sec(10));
  } catch (const CausalityFault& e) {
    faulted = e.endpoint() == 8 && e.event_time() == SimTime::sec(4) && e.grant() == SimTime::sec(5);
    why = e.what();
  }
  host.join();
  faulted = faulted && server.fault() == "causality violation";

  // Random messages through a socket pair, read on another thread.
  auto [a, b] = make_socket_pair();
  Rng rng(8);
  std::vector<BusMessage> sent;
  for (int i = 0; i < kWireMessages; ++i) {
    BusMessage m;
    m.type = static_cast<MsgType>(rng.below(5));
    m.time = rng.bernoulli(0.05) ? kInfinity : SimTime::us(rng.below(1ULL << 50));
    m.endpoint_id = static_cast<std::uint32_t>(rng.below(1ULL << 32));
    for (auto k = rng.below(24); k > 0; --k) m.port.push_back(static_cast<char>('a' + rng.below(26)));
    m.payload.resize(rng.below(300));
    for (auto& x : m.payload) x = static_cast<std::uint8_t>(rng.below(256));
    sent.push_back(std::move(m));
  }
  std::vector<BusMessage> got;
  std::thread reader([&, &rx = *b] {
    while (got.size() < sent.size()) {
      auto m = rx.receive(2s);
      if (!m) break;
      got.push_back(std::move(*m));
    }
  });
  for (const auto& m : sent) a->send(m);
  reader.join();
  const bool lossless = got == sent;
  return {faulted && lossless, std::string(faulted ? "causality fault raised" : "NO causality fault") + " (" + why +
                                   "); " + std::to_string(got.size()) + "/" + std::to_string(sent.size()) +
                                   " wire messages round-tripped " + (lossless ? "intact" : "WITH LOSS")};
}

Outcome conservation() {
  std::string detail = std::to_string(conserved_runs) + " runs checked";
  for (const auto& u : unconserved) detail += "; violated: " + u;
  return {unconserved.empty() && conserved_runs > 0, detail};
}

}  // namespace

int main() {
  criterion(1, "closure under coupling", kClosureBudget, closure);
  criterion(2, "determinism", kDeterminismBudget, determinism);
  criterion(3, "AODV routes match BFS", kOracleBudget, aodv_oracle);
  criterion(4, "physical-layer sensitivity", kSensitivityBudget, sensitivity);
  criterion(5, "cross-mode transparency", kCrossModeBudget, cross_mode);
  criterion(6, "SIL pacing", kPacingBudget, pacing);
  criterion(7, "scale", kScaleBudget, scale);
  criterion(8, "bus causality and wire", kBusBudget, bus_causality);
  criterion(9, "conservation", 1s, conservation);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
