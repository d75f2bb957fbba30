// manetsim: run MANET scenarios and compare their traces.
//
// Exit codes: 0 success, 1 traces differ (diff), 2 invalid scenario or
// usage, 3 runtime fault.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "devsnet/scenario/compare.hpp"
#include "devsnet/scenario/config.hpp"
#include "devsnet/scenario/runner.hpp"

namespace {

using namespace devsnet;
using namespace devsnet::scenario;

constexpr int kOk = 0;
constexpr int kDiffer = 1;
constexpr int kInvalid = 2;
constexpr int kFault = 3;

int report_config_error(const ConfigError& e) {
  std::cerr << e.what() << '\n';
  return kInvalid;
}

struct RunArgs {
  std::string file;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string trace;
  std::string metrics;
};

int cmd_run(const RunArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(a.file);
    if (!a.mode.empty()) cfg.mode = vcs::parse_mode(a.mode);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
  } catch (const ConfigError& e) {
    return report_config_error(e);
  } catch (const std::invalid_argument& e) {
    std::cerr << "--mode: " << e.what() << '\n';
    return kInvalid;
  }

  std::ofstream trace;
  RunOptions opt;
  if (!a.trace.empty()) {
    trace.open(a.trace, std::ios::trunc);
    if (!trace) {
      std::cerr << "cannot write " << a.trace << '\n';
      return kFault;
    }
    opt.trace = &trace;
  }
  RunResult r;
  try {
    r = run_scenario(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kFault;
  }
  trace.close();

  std::string text = "mode " + std::string(vcs::to_string(cfg.mode)) + "\nseed " + std::to_string(cfg.seed) +
                     "\ntrace_lines " + std::to_string(r.trace_lines) + "\ntrace_digest " + hex16(r.trace_digest) +
                     "\n" + format_metrics(r.metrics);
  if (a.metrics.empty()) {
    std::cout << text;
  } else {
    std::ofstream m(a.metrics, std::ios::trunc);
    if (!(m << text)) {
      std::cerr << "cannot write " << a.metrics << '\n';
      return kFault;
    }
  }
  if (!r.metrics.conserved()) {
    std::cerr << "conservation identity violated: sent " << r.metrics.sent << " != delivered " << r.metrics.delivered
              << " + dropped " << r.metrics.dropped() << " + in_flight " << r.metrics.in_flight << '\n';
    return kFault;
  }
  return kOk;
}

int cmd_validate(const std::string& file) {
  try {
    const auto cfg = load_scenario(file);
    std::cout << file << ": ok (" << cfg.node_count << " nodes, " << cfg.traffic.size() << " flows, horizon "
              << format_duration(cfg.horizon) << ")\n";
    return kOk;
  } catch (const ConfigError& e) {
    return report_config_error(e);
  }
}

int cmd_diff(const std::string& a, const std::string& b, bool payload_only) {
  try {
    const auto d = compare_trace_files(a, b, payload_only);
    std::cout << d.summary() << '\n';
    return d.equivalent ? kOk : kDiffer;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kFault;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event MANET simulator with execution, emulation and simulation modes"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print every scenario key with its default value");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario");
  run_cmd->add_option("scenario", run.file, "Scenario file")->required();
  run_cmd->add_option("--mode", run.mode, "Override vcs.mode")
      ->check(CLI::IsMember({"execution", "emulation", "simulation"}));
  run_cmd->add_option("--seed", run.seed, "Override the seed");
  run_cmd->add_option("--trace", run.trace, "Write the trace here");
  run_cmd->add_option("--metrics", run.metrics, "Write metrics here instead of stdout");

  std::string validate_file;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", validate_file, "Scenario file")->required();

  std::string trace_a, trace_b;
  bool payload_only = false;
  auto* diff_cmd = app.add_subcommand("diff", "Compare two traces");
  diff_cmd->add_option("trace_a", trace_a)->required();
  diff_cmd->add_option("trace_b", trace_b)->required();
  diff_cmd->add_flag("--payload-only", payload_only, "Compare delivered payload multisets only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (print_defaults) {
    std::cout << default_scenario_text();
    return kOk;
  }
  if (*run_cmd) return cmd_run(run);
  if (*validate_cmd) return cmd_validate(validate_file);
  if (*diff_cmd) return cmd_diff(trace_a, trace_b, payload_only);
  std::cout << app.help();
  return kInvalid;
}
