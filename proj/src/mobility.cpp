#include "cpmsim/mobility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace cpmsim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-9;

// Acceleration chosen by the headway governor for a follower.
double follow_accel(double speed, double leader_speed, double gap, const DynamicsConfig& d) {
  if (gap < 1.0) return -d.max_decel_mps2;
  if (gap < speed * d.headway_s && speed > leader_speed) return -d.comfort_decel_mps2;
  return std::numeric_limits<double>::infinity();
}

double cruise_accel(double speed, double desired, double dt, const DynamicsConfig& d) {
  return std::clamp((desired - speed) / dt, -d.comfort_decel_mps2, d.max_accel_mps2);
}

}  // namespace

// ---------------------------------------------------------------- highway

HighwayMobility::HighwayMobility(const ScenarioConfig& config, Rng rng)
    : MobilityModel(from_seconds(config.mobility_step_s)),
      road_(config.highway),
      dyn_(config.dynamics),
      geometry_(Geometry::ring(config.highway.length_m)) {
  const int lanes = road_.lanes;
  const int per_dir = lanes / road_.directions;
  lane_speed_.resize(lanes);
  for (int l = 0; l < lanes; ++l) {
    const int k = l % per_dir;
    lane_speed_[l] = per_dir == 1 ? 0.5 * (road_.speed_min_mps + road_.speed_max_mps)
                                  : road_.speed_min_mps + (road_.speed_max_mps - road_.speed_min_mps) *
                                                              k / double(per_dir - 1);
  }

  const double length = road_.length_m;
  const auto total = static_cast<long long>(std::llround(road_.density_veh_per_km * length / 1000.0));
  for (int l = 0; l < lanes; ++l) {
    const long long n = total / lanes + (l < total % lanes ? 1 : 0);
    if (n == 0) continue;
    const double spacing = length / double(n);
    if (spacing < 2.0 * dyn_.vehicle_length_m)
      throw ConfigValidationError("highway.density_veh_per_km",
                                  "inter-vehicle gap " + std::to_string(spacing) +
                                      " m is below twice the vehicle length");
    const double offset = rng.uniform(0.0, spacing);
    for (long long i = 0; i < n; ++i) {
      const double jitter = road_.speed_jitter * rng.uniform(-1.0, 1.0);
      const double desired =
          std::clamp(lane_speed_[l] * (1.0 + jitter), road_.speed_min_mps, road_.speed_max_mps);
      VehicleState v;
      v.id = static_cast<VehicleId>(states_.size());
      v.lane = l;
      v.speed = desired;
      states_.push_back(v);
      desired_.push_back(desired);
      s_.push_back(std::fmod(offset + double(i) * spacing, length));
    }
  }
  active_.assign(states_.size(), 1);
  for (std::size_t i = 0; i < states_.size(); ++i) sync_state(i);
}

void HighwayMobility::sync_state(std::size_t i) {
  auto& v = states_[i];
  const int per_dir = road_.lanes / road_.directions;
  const bool forward = v.lane < per_dir;
  const double x = forward ? s_[i] : road_.length_m - s_[i];
  v.position = geometry_.wrap(Vec2(x, (v.lane + 0.5) * road_.lane_width_m));
  v.heading = forward ? 0.0 : kPi;
  v.axis = Axis::horizontal;
}

void HighwayMobility::advance(SimTime step) {
  const double dt = to_seconds(step);
  const double length = road_.length_m;
  const std::size_t n = states_.size();

  std::vector<std::vector<std::size_t>> by_lane(road_.lanes);
  for (std::size_t i = 0; i < n; ++i) by_lane[states_[i].lane].push_back(i);

  std::vector<double> next_speed(n);
  for (auto& lane : by_lane) {
    std::sort(lane.begin(), lane.end(), [&](std::size_t a, std::size_t b) {
      return s_[a] != s_[b] ? s_[a] < s_[b] : a < b;
    });
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const std::size_t i = lane[k];
      const double v = states_[i].speed;
      double a = cruise_accel(v, desired_[i], dt, dyn_);
      if (lane.size() > 1) {
        const std::size_t lead = lane[(k + 1) % lane.size()];
        double gap = s_[lead] - s_[i];
        if (gap <= 0.0) gap += length;
        gap -= dyn_.vehicle_length_m;
        a = std::min(a, follow_accel(v, states_[lead].speed, gap, dyn_));
      }
      next_speed[i] = std::max(0.0, v + a * dt);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& v = states_[i];
    v.acceleration = (next_speed[i] - v.speed) / dt;
    v.speed = next_speed[i];
    s_[i] = std::fmod(s_[i] + v.speed * dt, length);
    sync_state(i);
  }
}

// -------------------------------------------------------------- manhattan

ManhattanMobility::ManhattanMobility(const ScenarioConfig& config, Rng rng)
    : MobilityModel(from_seconds(config.mobility_step_s)),
      grid_(StreetGrid::from(config.manhattan)),
      cfg_(config.manhattan),
      dyn_(config.dynamics),
      rng_(std::move(rng)) {
  const int roads = grid_.blocks_x + 1 + grid_.blocks_y + 1;
  const int groups = cfg_.lanes_per_street;
  for (int r = 0; r < roads; ++r) {
    const double length = road_length(r);
    const auto total = static_cast<long long>(std::llround(cfg_.density_veh_per_km * length / 1000.0));
    for (int g = 0; g < groups; ++g) {
      const long long n = total / groups + (g < total % groups ? 1 : 0);
      if (n == 0) continue;
      const double spacing = length / double(n);
      if (spacing < 2.0 * dyn_.vehicle_length_m)
        throw ConfigValidationError("manhattan.density_veh_per_km",
                                    "inter-vehicle gap " + std::to_string(spacing) +
                                        " m is below twice the vehicle length");
      const double offset = rng_.uniform(0.0, spacing);
      for (long long i = 0; i < n; ++i) {
        Agent a;
        a.road = r;
        a.dir = g % 2 == 0 ? 1 : -1;
        a.lane = g / 2;
        a.s = std::fmod(offset + double(i) * spacing, length);
        a.desired = rng_.uniform(cfg_.speed_min_mps, cfg_.speed_max_mps);
        a.speed = a.desired;
        a.next_turn = draw_turn();
        agents_.push_back(a);
      }
    }
  }
  states_.resize(agents_.size());
  active_.assign(agents_.size(), 1);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    states_[i].id = static_cast<VehicleId>(i);
    sync_state(i);
  }
}

ManhattanMobility::Turn ManhattanMobility::draw_turn() {
  const double u = rng_.uniform();
  const auto& p = cfg_.turn_probabilities;
  if (u < p[0]) return left;
  if (u < p[0] + p[1]) return straight;
  return right;
}

double ManhattanMobility::next_crossing(const Agent& a) const {
  const double pitch = crossing_pitch(a.road);
  if (a.dir > 0) {
    double c = (std::floor(a.s / pitch) + 1.0) * pitch;
    if (c - a.s < kEps) c += pitch;
    return c;
  }
  double c = (std::ceil(a.s / pitch) - 1.0) * pitch;
  if (a.s - c < kEps) c -= pitch;
  return c;
}

// Applies the pending turn decision at the crossing the agent has just reached.
void ManhattanMobility::cross(Agent& a) {
  const double pitch = crossing_pitch(a.road);
  const int m = static_cast<int>(std::lround(a.s / pitch));
  const int crossings = vertical(a.road) ? grid_.blocks_y : grid_.blocks_x;
  const bool at_end = (a.dir > 0 && m == crossings) || (a.dir < 0 && m == 0);

  bool turned = false;
  if (a.next_turn != straight) {
    const bool from_vertical = vertical(a.road);
    const int new_road = from_vertical ? grid_.blocks_x + 1 + m : m;
    const double new_s = from_vertical ? grid_.street_x(a.road)
                                       : grid_.street_y(a.road - (grid_.blocks_x + 1));
    const bool is_left = a.next_turn == left;
    const int new_dir = from_vertical ? (is_left ? -a.dir : a.dir) : (is_left ? a.dir : -a.dir);
    const double new_len = road_length(new_road);
    const bool dead_end = (new_dir > 0 && new_s >= new_len - kEps) || (new_dir < 0 && new_s <= kEps);
    if (!dead_end) {
      a.road = new_road;
      a.dir = new_dir;
      a.s = new_s;
      turned = true;
    }
  }
  if (!turned && at_end) a.s = a.dir > 0 ? 0.0 : road_length(a.road);
  a.next_turn = draw_turn();
}

void ManhattanMobility::sync_state(std::size_t i) {
  const auto& a = agents_[i];
  auto& v = states_[i];
  const double offset = (a.lane + 0.5) * cfg_.lane_width_m;
  if (vertical(a.road)) {
    v.position = Vec2(grid_.street_x(a.road) + a.dir * offset, a.s);
    v.heading = a.dir > 0 ? kPi / 2 : -kPi / 2;
    v.axis = Axis::vertical;
  } else {
    v.position = Vec2(a.s, grid_.street_y(a.road - (grid_.blocks_x + 1)) - a.dir * offset);
    v.heading = a.dir > 0 ? 0.0 : kPi;
    v.axis = Axis::horizontal;
  }
  v.road = a.road;
  v.lane = a.dir > 0 ? a.lane : cfg_.lanes_per_street / 2 + a.lane;
  v.speed = a.speed;
  v.acceleration = a.accel;
}

void ManhattanMobility::advance(SimTime step) {
  const double dt = to_seconds(step);
  const std::size_t n = agents_.size();

  auto progress = [&](const Agent& a) { return a.dir > 0 ? a.s : road_length(a.road) - a.s; };
  std::map<std::tuple<int, int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i)
    groups[{agents_[i].road, agents_[i].dir, agents_[i].lane}].push_back(i);

  std::vector<double> next_speed(n);
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
      const double px = progress(agents_[x]), py = progress(agents_[y]);
      return px != py ? px < py : x < y;
    });
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t i = members[k];
      const Agent& a = agents_[i];
      double acc = cruise_accel(a.speed, a.desired, dt, dyn_);

      if (a.next_turn != straight) {
        const double dist = std::abs(next_crossing(a) - a.s);
        const double allowed =
            std::sqrt(cfg_.turn_speed_mps * cfg_.turn_speed_mps + 2.0 * dyn_.comfort_decel_mps2 * dist);
        if (a.speed > allowed) acc = std::min(acc, std::max(-dyn_.comfort_decel_mps2, (allowed - a.speed) / dt));
      }
      if (members.size() > 1) {
        const Agent& lead = agents_[members[(k + 1) % members.size()]];
        double gap = progress(lead) - progress(a);
        if (gap <= 0.0) gap += road_length(a.road);
        gap -= dyn_.vehicle_length_m;
        acc = std::min(acc, follow_accel(a.speed, lead.speed, gap, dyn_));
      }
      next_speed[i] = std::max(0.0, a.speed + acc * dt);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Agent& a = agents_[i];
    a.accel = (next_speed[i] - a.speed) / dt;
    a.speed = next_speed[i];
    double remaining = a.speed * dt;
    while (remaining > 0.0) {
      const double c = next_crossing(a);
      const double dist = std::abs(c - a.s);
      if (remaining < dist) {
        a.s += a.dir * remaining;
        break;
      }
      remaining -= dist;
      a.s = c;
      cross(a);
    }
    sync_state(i);
  }
}

// ------------------------------------------------------------------ trace

namespace {

bool parse_double(std::string_view tok, double& out) {
  std::string buf(tok);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && !buf.empty() && std::isfinite(out);
}

bool parse_id(std::string_view tok, long long& out) {
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

}  // namespace

TraceData parse_trace(std::istream& in) {
  std::map<long long, std::vector<TraceSample>> by_id;
  std::map<long long, int> last_line;
  std::string line;
  int lineno = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    double time_s = 0;
    if (!seen_data && !parse_double(tok[0], time_s)) {
      seen_data = true;  // header
      continue;
    }
    seen_data = true;
    if (tok.size() < 4 || tok.size() > 6)
      throw TraceError("line " + std::to_string(lineno) + ": expected 4 to 6 fields, got " +
                           std::to_string(tok.size()),
                       lineno);
    TraceSample s;
    long long id = 0;
    double x = 0, y = 0;
    if (!parse_double(tok[0], s.time_s) || !parse_id(tok[1], id) || !parse_double(tok[2], x) ||
        !parse_double(tok[3], y))
      throw TraceError("line " + std::to_string(lineno) + ": malformed record", lineno);
    s.position = Vec2(x, y);
    double extra = 0;
    if (tok.size() >= 5) {
      if (!parse_double(tok[4], extra) || extra < 0)
        throw TraceError("line " + std::to_string(lineno) + ": bad speed", lineno);
      s.speed = extra;
    }
    if (tok.size() == 6) {
      if (!parse_double(tok[5], extra))
        throw TraceError("line " + std::to_string(lineno) + ": bad heading", lineno);
      s.heading = extra;
    }
    auto& samples = by_id[id];
    if (!samples.empty() && s.time_s <= samples.back().time_s)
      throw TraceError("vehicle " + std::to_string(id) + ": timestamp " + tok[0] +
                           " at line " + std::to_string(lineno) +
                           " does not increase (previous at line " +
                           std::to_string(last_line[id]) + ")",
                       lineno);
    samples.push_back(s);
    last_line[id] = lineno;
  }

  TraceData data;
  for (auto& [id, samples] : by_id) {
    data.source_ids.push_back(id);
    data.vehicles.push_back(std::move(samples));
  }
  return data;
}

TraceData load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot read trace file '" + path.string() + "'", 0);
  return parse_trace(in);
}

TraceMobility::TraceMobility(TraceData data, SimTime dt) : MobilityModel(dt), data_(std::move(data)) {
  states_.resize(data_.vehicles.size());
  active_.assign(data_.vehicles.size(), 0);
  for (std::size_t i = 0; i < states_.size(); ++i) states_[i].id = static_cast<VehicleId>(i);
  evaluate(now_);
}

void TraceMobility::advance(SimTime dt) { evaluate(now_ + dt); }

void TraceMobility::evaluate(SimTime t) {
  const double ts = to_seconds(t);
  for (std::size_t i = 0; i < data_.vehicles.size(); ++i) {
    const auto& smp = data_.vehicles[i];
    auto& v = states_[i];
    if (smp.empty() || ts < smp.front().time_s - kEps || ts > smp.back().time_s + kEps) {
      active_[i] = 0;
      continue;
    }
    active_[i] = 1;
    if (smp.size() == 1) {
      v.position = smp[0].position;
      v.speed = smp[0].speed.value_or(0.0);
      v.acceleration = 0.0;
      if (smp[0].heading) v.heading = *smp[0].heading;
      continue;
    }

    auto it = std::upper_bound(smp.begin(), smp.end(), ts,
                               [](double x, const TraceSample& s) { return x < s.time_s; });
    std::size_t k = it == smp.begin() ? 0 : std::size_t(it - smp.begin()) - 1;
    k = std::min(k, smp.size() - 2);
    const auto& a = smp[k];
    const auto& b = smp[k + 1];
    const double span = b.time_s - a.time_s;
    const double f = std::clamp((ts - a.time_s) / span, 0.0, 1.0);
    const Vec2 disp = b.position - a.position;
    v.position = a.position + f * disp;

    auto segment_speed = [&](std::size_t j) {
      return (smp[j + 1].position - smp[j].position).norm() / (smp[j + 1].time_s - smp[j].time_s);
    };
    if (a.speed && b.speed) {
      v.speed = *a.speed + f * (*b.speed - *a.speed);
      v.acceleration = (*b.speed - *a.speed) / span;
    } else {
      v.speed = segment_speed(k);
      v.acceleration =
          k == 0 ? 0.0
                 : (segment_speed(k) - segment_speed(k - 1)) / (0.5 * (b.time_s - smp[k - 1].time_s));
    }
    if (a.heading)
      v.heading = *a.heading;
    else if (disp.norm() > 0.0)
      v.heading = std::atan2(disp.y(), disp.x());
  }
}

// ---------------------------------------------------------------- factory

std::unique_ptr<MobilityModel> make_mobility(const ScenarioConfig& config) {
  Rng rng(config.seed, "mobility");
  switch (config.layout) {
    case Layout::highway: return std::make_unique<HighwayMobility>(config, std::move(rng));
    case Layout::manhattan: return std::make_unique<ManhattanMobility>(config, std::move(rng));
    case Layout::trace:
      return std::make_unique<TraceMobility>(load_trace(config.trace.path),
                                             from_seconds(config.mobility_step_s));
  }
  return nullptr;
}

Geometry make_geometry(const ScenarioConfig& config) {
  switch (config.layout) {
    case Layout::highway: return Geometry::ring(config.highway.length_m);
    case Layout::manhattan: return Geometry::manhattan(StreetGrid::from(config.manhattan));
    case Layout::trace: return Geometry::open();
  }
  return Geometry::open();
}

StatsRegion make_stats_region(const ScenarioConfig& config) {
  constexpr double kInf = 1e12;
  switch (config.layout) {
    case Layout::highway: {
      const auto& h = config.highway;
      const double mid = h.length_m / 2;
      const double half = std::min(1000.0, h.length_m / 2);
      const double lo = h.stats_x_min_m.value_or(mid - half);
      const double hi = h.stats_x_max_m.value_or(mid + half);
      return {Box2(Vec2(lo, -kInf), Vec2(hi, kInf))};
    }
    case Layout::manhattan: {
      const auto grid = StreetGrid::from(config.manhattan);
      const int sx = std::min(config.manhattan.stats_blocks_x, grid.blocks_x);
      const int sy = std::min(config.manhattan.stats_blocks_y, grid.blocks_y);
      const int i0 = (grid.blocks_x - sx) / 2;
      const int j0 = (grid.blocks_y - sy) / 2;
      const double h = grid.street_width / 2;
      return {Box2(Vec2(grid.street_x(i0) - h, grid.street_y(j0) - h),
                   Vec2(grid.street_x(i0 + sx) + h, grid.street_y(j0 + sy) + h))};
    }
    case Layout::trace: return {Box2(Vec2(-kInf, -kInf), Vec2(kInf, kInf))};
  }
  return {};
}

}  // namespace cpmsim
