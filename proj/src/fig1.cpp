#include "cpmsim/fig1.hpp"

#include "cpmsim/mobility.hpp"
#include "cpmsim/output.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace cpmsim {

Fig1Result run_fig1(const Fig1Options& opt) {
  if (opt.scenario != 1 && opt.scenario != 2)
    throw std::invalid_argument("fig1: scenario must be 1 or 2");

  constexpr int kObjects = 6;
  const double end = opt.duration_s + 1.0;
  TraceData trace;
  auto add = [&](double appear, double x0, double y) {
    TraceSample a{appear, Vec2(x0 + opt.speed_mps * appear, y), opt.speed_mps, 0.0};
    TraceSample b{end, Vec2(x0 + opt.speed_mps * end, y), opt.speed_mps, 0.0};
    trace.source_ids.push_back(static_cast<long long>(trace.vehicles.size()));
    trace.vehicles.push_back({a, b});
  };
  add(0.0, 0.0, 0.0);  // ego
  for (int k = 0; k < kObjects; ++k) {
    const double appear = opt.scenario == 1 ? 0.0 : 0.1 * (k / 2);
    add(appear, 20.0 * (k + 1), k % 2 == 0 ? 3.5 : -3.5);
  }

  ScenarioConfig config;
  config.layout = Layout::trace;
  config.trace.path = "<scripted>";
  config.duration_s = opt.duration_s;
  config.cpm.policy = opt.policy;
  config.metrics.warmup_s = 0.0;
  validate(config);

  RunOptions run_opts;
  run_opts.phase_offsets =
      std::vector<SimTime>(trace.vehicles.size(), from_seconds(opt.phase_s));
  const Geometry geometry = Geometry::open();
  const StatsRegion everywhere{Box2(Vec2(-1e12, -1e12), Vec2(1e12, 1e12))};
  auto mobility =
      std::make_unique<TraceMobility>(std::move(trace), from_seconds(config.mobility_step_s));
  RunResult r = run(config, std::move(mobility), geometry, everywhere, run_opts);

  Fig1Result out{opt, {}};
  for (auto& c : r.cpms)
    if (c.sender == 0) out.ego.push_back(std::move(c));
  return out;
}

std::string format_schedule(const Fig1Result& result) {
  std::string s = fmt::format("# scenario={} policy={}\n", result.options.scenario,
                              to_string(result.options.policy));
  s += "time_s,objects,object_ids,size_bytes,sensor_info\n";
  for (const auto& c : result.ego) {
    std::string ids;
    for (std::size_t k = 0; k < c.objects.size(); ++k)
      ids += (k ? ";" : "") + std::to_string(c.objects[k]);
    s += fmt::format("{},{},{},{},{}\n", format_seconds(c.time), c.objects.size(), ids, c.size_bytes,
                     c.sensor_info ? 1 : 0);
  }
  return s;
}

}  // namespace cpmsim
