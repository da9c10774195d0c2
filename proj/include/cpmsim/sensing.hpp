#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/geometry.hpp"
#include "cpmsim/random.hpp"
#include "cpmsim/time.hpp"
#include "cpmsim/types.hpp"

#include <span>
#include <vector>

namespace cpmsim {

struct PerceivedObject {
  VehicleId id = 0;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;
  double acceleration = 0.0;
  SimTime timestamp{0};
};

inline bool line_of_sight(const Vec2& a, const Vec2& b, const Geometry& geometry) {
  return geometry.line_of_sight(a, b);
}

/// Objects the observer's sensor sees at `now`: every other vehicle within
/// range and field of view whose sight line clears all buildings (and, when
/// enabled, all other vehicle bodies). `vehicles` holds the active vehicles;
/// the observer may be among them. `noise` is only drawn from when position
/// noise is configured.
std::vector<PerceivedObject> detect(const VehicleState& observer,
                                    std::span<const VehicleState> vehicles,
                                    const Geometry& geometry, const SensingConfig& sensor,
                                    SimTime now, Rng* noise = nullptr);

}  // namespace cpmsim
