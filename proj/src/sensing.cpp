#include "cpmsim/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cpmsim {

namespace {

// Distance from p to segment [a, b] and whether p projects strictly inside it.
bool blocks_segment(const Vec2& a, const Vec2& b, const Vec2& p, double radius) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return false;
  const double t = (p - a).dot(ab) / len2;
  if (t <= 0.0 || t >= 1.0) return false;
  return (a + t * ab - p).norm() < radius;
}

}  // namespace

std::vector<PerceivedObject> detect(const VehicleState& observer,
                                    std::span<const VehicleState> vehicles,
                                    const Geometry& geometry, const SensingConfig& sensor,
                                    SimTime now, Rng* noise) {
  std::vector<PerceivedObject> out;
  const double half_fov = sensor.fov_deg * std::numbers::pi / 360.0;
  const bool full_circle = sensor.fov_deg >= 360.0;
  const Vec2 heading = observer.direction();

  for (const auto& v : vehicles) {
    if (v.id == observer.id) continue;
    const Vec2 d = geometry.displacement(observer.position, v.position);
    const double dist = d.norm();
    if (dist > sensor.range_m) continue;
    if (!full_circle && dist > 0.0) {
      const double angle = std::acos(std::clamp(heading.dot(d) / dist, -1.0, 1.0));
      if (angle > half_fov) continue;
    }
    const Vec2 target = observer.position + d;
    if (!geometry.line_of_sight(observer.position, target)) continue;
    if (sensor.vehicle_occlusion) {
      bool hidden = false;
      for (const auto& c : vehicles) {
        if (c.id == observer.id || c.id == v.id) continue;
        const Vec2 pc = observer.position + geometry.displacement(observer.position, c.position);
        if (blocks_segment(observer.position, target, pc, sensor.vehicle_radius_m)) {
          hidden = true;
          break;
        }
      }
      if (hidden) continue;
    }

    PerceivedObject obj{v.id, v.position, v.speed, v.acceleration, now};
    if (sensor.position_noise_m > 0.0 && noise) {
      obj.position.x() += noise->normal(0.0, sensor.position_noise_m);
      obj.position.y() += noise->normal(0.0, sensor.position_noise_m);
    }
    out.push_back(obj);
  }
  return out;
}

}  // namespace cpmsim
