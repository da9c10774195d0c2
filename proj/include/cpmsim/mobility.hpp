#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/geometry.hpp"
#include "cpmsim/random.hpp"
#include "cpmsim/time.hpp"
#include "cpmsim/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cpmsim {

/// Time-indexed vehicle states. Vehicle ids are dense indices into states();
/// a slot may be inactive (e.g. a trace vehicle outside its sampled span).
class MobilityModel {
 public:
  virtual ~MobilityModel() = default;

  std::size_t size() const { return states_.size(); }
  const std::vector<VehicleState>& states() const { return states_; }
  bool active(VehicleId id) const { return active_[id] != 0; }
  SimTime now() const { return now_; }
  SimTime step_size() const { return dt_; }

  /// Advances every vehicle by one step.
  void step() {
    advance(dt_);
    now_ += dt_;
  }

  /// Position at `t` in [now, now + step), extrapolated along the heading.
  Vec2 position_at(VehicleId id, SimTime t) const {
    const auto& s = states_[id];
    return s.position + s.direction() * (s.speed * to_seconds(t - now_));
  }

  /// Full state at `t`, position extrapolated as in position_at().
  VehicleState state_at(VehicleId id, SimTime t) const {
    VehicleState s = states_[id];
    s.position = position_at(id, t);
    return s;
  }

 protected:
  explicit MobilityModel(SimTime dt) : dt_(dt) {}
  virtual void advance(SimTime dt) = 0;

  std::vector<VehicleState> states_;
  std::vector<char> active_;
  SimTime now_{0};
  SimTime dt_;
};

/// Wrap-around multi-lane highway. Lanes are split evenly between the
/// directions; within a direction, lane nominal speeds are evenly spaced over
/// [speed_min, speed_max] and each vehicle jitters its own desired speed,
/// clamped to that interval. A headway governor slows vehicles closing in on
/// their leader.
class HighwayMobility final : public MobilityModel {
 public:
  HighwayMobility(const ScenarioConfig& config, Rng rng);

  double lane_speed(int lane) const { return lane_speed_[lane]; }

 private:
  void advance(SimTime dt) override;
  void sync_state(std::size_t i);

  HighwayConfig road_;
  DynamicsConfig dyn_;
  Geometry geometry_;
  std::vector<double> lane_speed_;
  std::vector<double> desired_;
  std::vector<double> s_;  // distance travelled along the lane direction, mod length
};

/// Manhattan street lattice. Vehicles cruise at their desired speed, slow
/// down ahead of intersections where they will turn, and pick left, straight
/// or right at every intersection. Leaving the lattice on a perimeter street
/// re-enters at the opposite end of the same street.
class ManhattanMobility final : public MobilityModel {
 public:
  ManhattanMobility(const ScenarioConfig& config, Rng rng);

  const StreetGrid& grid() const { return grid_; }

 private:
  enum Turn : int { left = 0, straight = 1, right = 2 };

  struct Agent {
    int road = 0;  // vertical 0..blocks_x, horizontal blocks_x+1..
    int dir = 1;   // +1 towards increasing coordinate
    int lane = 0;  // within the direction
    double s = 0;  // coordinate along the road axis
    double speed = 0;
    double desired = 0;
    double accel = 0;
    Turn next_turn = straight;
  };

  bool vertical(int road) const { return road <= grid_.blocks_x; }
  double road_length(int road) const { return vertical(road) ? grid_.height() : grid_.width(); }
  double crossing_pitch(int road) const { return vertical(road) ? grid_.pitch_y() : grid_.pitch_x(); }
  double next_crossing(const Agent& a) const;
  Turn draw_turn();
  void cross(Agent& a);
  void sync_state(std::size_t i);
  void advance(SimTime dt) override;

  StreetGrid grid_;
  ManhattanConfig cfg_;
  DynamicsConfig dyn_;
  Rng rng_;
  std::vector<Agent> agents_;
};

/// One trace record. Speed and heading are optional columns.
struct TraceSample {
  double time_s = 0;
  Vec2 position = Vec2::Zero();
  std::optional<double> speed;
  std::optional<double> heading;
};

/// Samples per vehicle, time-ascending. Index = dense vehicle id; the
/// original ids from the file are kept in `source_ids`.
struct TraceData {
  std::vector<std::vector<TraceSample>> vehicles;
  std::vector<long long> source_ids;
};

class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Parses `time_s vehicle_id x_m y_m [speed_mps] [heading_rad]` records.
TraceData parse_trace(std::istream& in);
TraceData load_trace(const std::filesystem::path& path);

/// Replays a trace: linear position interpolation, speed and acceleration by
/// finite differences where the trace omits them.
class TraceMobility final : public MobilityModel {
 public:
  TraceMobility(TraceData data, SimTime dt);

 private:
  void advance(SimTime dt) override;
  void evaluate(SimTime t);

  TraceData data_;
};

std::unique_ptr<MobilityModel> make_mobility(const ScenarioConfig& config);

/// Scenario geometry matching the layout.
Geometry make_geometry(const ScenarioConfig& config);

}  // namespace cpmsim
