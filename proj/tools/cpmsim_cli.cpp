#include "cpmsim/config.hpp"
#include "cpmsim/fig1.hpp"
#include "cpmsim/mobility.hpp"
#include "cpmsim/output.hpp"
#include "cpmsim/simulation.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cpmsim;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::string out = "out";
  double duration = 0.0;
  int parallel = 1;
  bool logs = false;
};

ScenarioConfig load(const std::string& path, double duration) {
  ScenarioConfig c = path.empty() ? ScenarioConfig{} : load_config(path);
  if (duration > 0.0) c.duration_s = duration;
  validate(c);
  return c;
}

int cmd_run(const Common& o) {
  ScenarioConfig c = load(o.config, o.duration);
  if (!o.policies.empty()) c.cpm.policy = parse_policy(o.policies.front());
  if (!o.seeds.empty()) c.seed = o.seeds.front();
  RunOptions opts;
  opts.record_logs = o.logs;
  const RunResult r = run(c, opts);
  for (const auto& p : write_run(o.out, r)) std::cout << p.string() << '\n';
  const auto& s = r.summary;
  std::cout << fmt::format(
      "policy={} seed={} vehicles={} cpm_rate_hz={:.3f} objects_per_cpm={:.3f} mean_cbr={:.4f} "
      "pdr090_los_m={:.1f}\n",
      to_string(r.policy), r.seed, r.vehicles, s.cpm_rate_hz, s.objects_per_cpm, s.mean_cbr,
      s.pdr_distance("los"));
  return 0;
}

int cmd_sweep(const Common& o, const std::vector<std::string>& configs) {
  std::vector<std::pair<std::string, ScenarioConfig>> scenarios;
  for (const auto& path : configs) scenarios.emplace_back(fs::path(path).stem().string(), load(path, o.duration));
  std::vector<PolicyVariant> policies;
  for (const auto& p : o.policies) policies.push_back(parse_policy(p));
  if (policies.empty()) policies = {PolicyVariant::etsi, PolicyVariant::look_ahead};
  const auto cells = make_sweep(scenarios, policies, o.seeds);
  const auto rows = sweep(cells, o.parallel, [](const SweepRow& row) {
    std::cerr << fmt::format("[{}] {} {} seed={} {:.1f}s{}\n", row.ok ? "ok" : "failed",
                             row.cell.scenario, to_string(row.cell.policy), row.cell.seed,
                             row.wall_seconds, row.ok ? "" : ": " + row.error);
  });
  for (const auto& p : write_sweep(o.out, rows)) std::cout << p.string() << '\n';
  int failed = 0;
  for (const auto& row : rows) failed += row.ok ? 0 : 1;
  if (failed) std::cerr << failed << " of " << rows.size() << " cells failed\n";
  return failed == static_cast<int>(rows.size()) ? 1 : 0;
}

int cmd_fig1(const Common& o, int scenario) {
  std::vector<PolicyVariant> policies;
  for (const auto& p : o.policies) policies.push_back(parse_policy(p));
  if (policies.empty()) policies = {PolicyVariant::etsi, PolicyVariant::look_ahead};
  for (const auto policy : policies) {
    Fig1Options opt;
    opt.scenario = scenario;
    opt.policy = policy;
    if (o.duration > 0.0) opt.duration_s = o.duration;
    const std::string text = format_schedule(run_fig1(opt));
    std::cout << text;
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      const auto path = fs::path(o.out) / fmt::format("fig1_s{}_{}.csv", scenario, to_string(policy));
      std::ofstream(path, std::ios::binary) << text;
    }
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const ScenarioConfig c = load_config(path);
  validate(c);
  std::cout << fmt::format("ok layout={} config_hash={:016x}\n", to_string(c.layout), config_hash(c));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for collective perception message generation"};
  app.require_subcommand(1);
  Common o;
  std::vector<std::string> sweep_configs;
  int scenario = 1;

  auto add_policy = [&](CLI::App* sub, bool many) {
    auto* opt = sub->add_option("--policy", o.policies, "etsi or look_ahead")
                    ->check(CLI::IsMember({"etsi", "look_ahead", "look-ahead"}));
    if (!many) opt->expected(1);
  };

  auto* run_cmd = app.add_subcommand("run", "Run one scenario under one policy");
  run_cmd->add_option("--config", o.config, "Configuration file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  add_policy(run_cmd, false);
  run_cmd->add_option("--seed", o.seeds, "Master seed")->expected(1);
  run_cmd->add_option("--out", o.out, "Output directory");
  run_cmd->add_option("--duration", o.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--logs", o.logs, "Also write frames.csv and receptions.csv");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run configs x policies x seeds");
  sweep_cmd->add_option("--config", sweep_configs, "Configuration file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  add_policy(sweep_cmd, true);
  sweep_cmd->add_option("--seed", o.seeds, "Seeds (repeatable)")->required();
  sweep_cmd->add_option("--out", o.out, "Output directory");
  sweep_cmd->add_option("--duration", o.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--parallel", o.parallel, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* fig1_cmd = app.add_subcommand("fig1", "Print the CPM schedule of the scripted toy scenario");
  fig1_cmd->add_option("--scenario", scenario, "1 or 2")->check(CLI::IsMember({1, 2}));
  add_policy(fig1_cmd, true);
  fig1_cmd->add_option("--duration", o.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  std::string fig1_out;
  fig1_cmd->add_option("--out", fig1_out, "Also write the schedule as CSV into this directory");

  auto* validate_cmd = app.add_subcommand("validate", "Check a configuration file");
  validate_cmd->add_option("--config", o.config, "Configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return cmd_run(o);
    if (*sweep_cmd) return cmd_sweep(o, sweep_configs);
    if (*fig1_cmd) {
      o.out = fig1_out;
      return cmd_fig1(o, scenario);
    }
    if (*validate_cmd) return cmd_validate(o.config);
  } catch (const ConfigParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.line() > 0) std::cerr << " (line " << e.line() << ")";
    std::cerr << '\n';
    return 2;
  } catch (const ConfigValidationError& e) {
    std::cerr << "error: invalid " << e.what() << '\n';
    return 2;
  } catch (const TraceError& e) {
    std::cerr << "error: trace: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
