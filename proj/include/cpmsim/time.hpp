#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>

namespace cpmsim {

/// Simulation time. Integer nanoseconds keep event ordering and interval
/// arithmetic exact, so streaming metrics and brute-force recomputations agree
/// bit for bit.
using SimTime = std::chrono::nanoseconds;

inline constexpr SimTime kNever = SimTime{std::numeric_limits<std::int64_t>::min() / 2};

inline constexpr double to_seconds(SimTime t) noexcept {
  return static_cast<double>(t.count()) / 1e9;
}

/// Rounds to the nearest nanosecond.
inline SimTime from_seconds(double s) noexcept {
  return SimTime{static_cast<std::int64_t>(std::llround(s * 1e9))};
}

inline constexpr SimTime milliseconds(std::int64_t ms) noexcept { return SimTime{ms * 1'000'000}; }
inline constexpr SimTime microseconds(std::int64_t us) noexcept { return SimTime{us * 1'000}; }

/// Monotone clock owned by the scheduler.
class SimClock {
 public:
  SimTime now() const noexcept { return now_; }

  /// Returns false (and leaves the clock untouched) if `t` lies in the past.
  bool advance_to(SimTime t) noexcept {
    if (t < now_) return false;
    now_ = t;
    return true;
  }

 private:
  SimTime now_{0};
};

}  // namespace cpmsim
