#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/cpm.hpp"
#include "cpmsim/geometry.hpp"
#include "cpmsim/random.hpp"
#include "cpmsim/time.hpp"
#include "cpmsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cpmsim {

class MobilityModel;

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Free-space loss in dB, distance in metres, carrier in Hz.
template <typename Scalar>
Scalar free_space_loss(Scalar d, Scalar fc_hz) {
  using std::log10;
  using std::max;
  d = max(d, Scalar(1));
  return Scalar(20) * log10(d) + Scalar(20) * log10(fc_hz) - Scalar(147.55);
}

/// Winner+ B1 line-of-sight loss with effective antenna heights h - 1 m.
template <typename Scalar>
Scalar winner_b1_los(Scalar d, Scalar fc_hz, Scalar antenna_height) {
  using std::log10;
  using std::max;
  d = max(d, Scalar(1));
  const Scalar fc_ghz = fc_hz / Scalar(1e9);
  const Scalar h_eff = max(antenna_height - Scalar(1), Scalar(0.1));
  const Scalar d_bp = Scalar(4) * h_eff * h_eff * fc_hz / Scalar(kSpeedOfLight);
  const Scalar pl = d < d_bp ? Scalar(22.7) * log10(d) + Scalar(27) + Scalar(20) * log10(fc_ghz)
                             : Scalar(40) * log10(d) + Scalar(7.56) -
                                   Scalar(34.6) * log10(h_eff) + Scalar(2.7) * log10(fc_ghz);
  return max(pl, free_space_loss(d, fc_hz));
}

/// Winner+ B1 Manhattan-grid non-line-of-sight loss. `d1` runs along the
/// transmitter's street to the corner, `d2` along the perpendicular street.
template <typename Scalar>
Scalar winner_b1_nlos_leg(Scalar d1, Scalar d2, Scalar fc_hz, Scalar antenna_height) {
  using std::log10;
  using std::max;
  d1 = max(d1, Scalar(1));
  d2 = max(d2, Scalar(1));
  const Scalar n_j = max(Scalar(2.8) - Scalar(0.0024) * d1, Scalar(1.84));
  return winner_b1_los(d1, fc_hz, antenna_height) + Scalar(20) - Scalar(12.5) * n_j +
         Scalar(10) * n_j * log10(d2) + Scalar(3) * log10(fc_hz / Scalar(1e9));
}

/// NLOS loss for displacement (dx, dy): the better of the two corner routes,
/// never below the LOS loss at the same distance.
template <typename Scalar>
Scalar winner_b1_nlos(Scalar dx, Scalar dy, Scalar fc_hz, Scalar antenna_height) {
  using std::abs;
  using std::hypot;
  using std::max;
  using std::min;
  dx = abs(dx);
  dy = abs(dy);
  const Scalar pl = min(winner_b1_nlos_leg(dx, dy, fc_hz, antenna_height),
                        winner_b1_nlos_leg(dy, dx, fc_hz, antenna_height));
  return max(pl, winner_b1_los(hypot(dx, dy), fc_hz, antenna_height));
}

/// Mean path loss between two positions plus a shadowing sample.
struct PathLossModel {
  double carrier_hz = 5.9e9;
  double antenna_height_m = 1.5;

  double mean(const Vec2& displacement, bool los) const {
    return los ? winner_b1_los(displacement.norm(), carrier_hz, antenna_height_m)
               : winner_b1_nlos(displacement.x(), displacement.y(), carrier_hz, antenna_height_m);
  }
  double operator()(const Vec2& displacement, bool los, double shadow_db) const {
    return mean(displacement, los) + shadow_db;
  }
};

/// Thermal noise over `bandwidth_hz` plus the receiver noise figure, dBm.
inline double noise_floor_dbm(double bandwidth_hz, double noise_figure_db) {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

/// Preamble plus payload bits at the data rate, rounded up to whole ns.
inline SimTime airtime(int size_bytes, double data_rate_bps, SimTime preamble) {
  const double ns = std::ceil(static_cast<double>(size_bytes) * 8.0 * 1e9 / data_rate_bps - 1e-6);
  return preamble + SimTime{static_cast<std::int64_t>(ns)};
}

/// One on-air transmission. `rx_mw[v]` is the power vehicle v receives
/// (shadowing included); the sender's own entry holds the tx power.
struct FrameEvent {
  std::uint64_t id = 0;
  VehicleId sender = 0;
  Vec2 sender_position = Vec2::Zero();
  double tx_power_dbm = 23.0;
  SimTime start{0};
  SimTime duration{0};
  int size_bytes = 0;
  std::shared_ptr<const Cpm> payload;
  std::vector<double> rx_mw;
  std::vector<float> distance;  // metres at tx start
  std::vector<char> los;

  SimTime end() const { return start + duration; }
};

enum class Outcome { decoded, collision_loss, below_sensitivity };

std::string_view to_string(Outcome o);

struct ReceptionOutcome {
  VehicleId receiver = 0;
  std::uint64_t frame = 0;
  Outcome outcome = Outcome::below_sensitivity;
  double rx_power_dbm = 0.0;
  double sinr_db = 0.0;
  double distance = 0.0;
  bool los = true;
};

/// Decision rule for one receiver given its signal and the worst
/// instantaneous interference (noise excluded) over the frame.
struct ReceptionRule {
  double sensitivity_dbm = -85.0;
  double decode_threshold_db = 8.0;
  double noise_mw = 0.0;

  Outcome decide(double signal_mw, double interference_mw, double* sinr_db = nullptr) const {
    const double sinr = 10.0 * std::log10(signal_mw / (noise_mw + interference_mw));
    if (sinr_db) *sinr_db = sinr;
    if (mw_to_dbm(signal_mw) < sensitivity_dbm) return Outcome::below_sensitivity;
    return sinr >= decode_threshold_db ? Outcome::decoded : Outcome::collision_loss;
  }
};

/// Largest total power of `others` active at any instant within
/// [start, end) at vehicle `v`. Interference is piecewise constant and only
/// rises at a frame start, so checking `start` and every other start inside
/// the interval suffices.
double worst_interference(std::span<const FrameEvent* const> others, SimTime start, SimTime end,
                          VehicleId v);

/// Standard normal shadowing sample of the unordered link {a, b} during
/// `epoch`. Keyed by link and time, so paired runs share the realisation.
double link_shadowing(std::uint64_t seed, VehicleId a, VehicleId b, std::int64_t epoch);

struct ChannelParams {
  double tx_power_dbm = 23.0;
  double sensing_threshold_mw = 0.0;
  ReceptionRule rule;
  PathLossModel path_loss;
  double shadowing_los_db = 3.0;
  double shadowing_nlos_db = 4.0;
  SimTime shadowing_coherence = milliseconds(100);
  double data_rate_bps = 6e6;
  SimTime preamble = microseconds(40);
  SimTime aifs = microseconds(110);
  SimTime slot = microseconds(13);
  int contention_window = 15;
  /// Links whose mean received power is below this are not evaluated.
  double cutoff_dbm = -130.0;

  static ChannelParams from(const RadioConfig& radio, const MacConfig& mac);
};

/// Callbacks into the event scheduler.
struct ChannelHooks {
  std::function<void(VehicleId, SimTime, std::uint64_t generation)> schedule_timer;
  std::function<void(std::uint64_t frame, SimTime end)> schedule_frame_end;
  std::function<void(VehicleId, bool busy, SimTime)> busy_changed;
};

/// Shared broadcast medium with per-vehicle CSMA/CA. Carrier sense uses the
/// aggregate received power (own transmission included); reception uses the
/// SINR against the worst interference seen during the frame.
class Channel {
 public:
  Channel(ChannelParams params, const Geometry& geometry, const MobilityModel& mobility,
          std::uint64_t shadowing_seed, Rng backoff, ChannelHooks hooks);

  /// Hands a generated CPM to the sender's MAC.
  void enqueue(VehicleId v, std::shared_ptr<const Cpm> cpm, SimTime now);

  /// Fires a MAC timer; stale generations are ignored. Returns the started
  /// frame, if any.
  const FrameEvent* on_timer(VehicleId v, std::uint64_t generation, SimTime now);

  /// Ends a frame and decides reception at every vehicle in reach.
  std::vector<ReceptionOutcome> on_frame_end(std::uint64_t frame, SimTime now);

  bool busy(VehicleId v) const { return busy_[v] != 0; }
  double sensed_mw(VehicleId v) const { return sensed_mw_[v]; }
  std::size_t queued(VehicleId v) const { return mac_[v].queue.size(); }
  const FrameEvent* frame(std::uint64_t id) const;
  const ChannelParams& params() const { return params_; }

 private:
  struct MacState {
    std::deque<std::shared_ptr<const Cpm>> queue;
    bool transmitting = false;
    int backoff = -1;             // remaining slots, -1 when none drawn
    SimTime countdown_from = kNever;  // instant the slot countdown (re)starts
    std::uint64_t generation = 0;
    bool armed = false;
  };

  void arm(VehicleId v, SimTime now);
  void freeze(VehicleId v, SimTime now);
  void update_busy(VehicleId v, SimTime now);
  int draw_backoff();

  ChannelParams params_;
  const Geometry& geometry_;
  const MobilityModel& mobility_;
  std::uint64_t shadowing_seed_;
  Rng backoff_;
  ChannelHooks hooks_;

  std::vector<MacState> mac_;
  std::vector<double> sensed_mw_;
  std::vector<char> busy_;
  std::deque<FrameEvent> frames_;  // active and recently ended, ascending id
  std::vector<std::uint64_t> active_;
  std::uint64_t next_frame_ = 0;
};

}  // namespace cpmsim
