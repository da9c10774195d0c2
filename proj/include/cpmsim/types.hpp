#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace cpmsim {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

using Vec2 = Point2<double>;

using VehicleId = std::uint32_t;

inline constexpr double kmh_to_mps(double kmh) noexcept { return kmh / 3.6; }

/// Watts/milliwatts live only inside power sums; dBm is a boundary unit.
inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

/// Axis of the road a vehicle is on. Highway roads are horizontal.
enum class Axis : std::uint8_t { horizontal, vertical };

struct VehicleState {
  VehicleId id = 0;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;         // m/s, >= 0
  double acceleration = 0.0;  // m/s^2 along heading
  double heading = 0.0;       // rad
  int lane = 0;
  int road = -1;  // street index (urban), -1 when not on a street network
  Axis axis = Axis::horizontal;

  Vec2 direction() const { return {std::cos(heading), std::sin(heading)}; }
};

}  // namespace cpmsim
