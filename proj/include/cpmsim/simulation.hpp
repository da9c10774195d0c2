#pragma once

#include "cpmsim/channel.hpp"
#include "cpmsim/config.hpp"
#include "cpmsim/geometry.hpp"
#include "cpmsim/metrics.hpp"
#include "cpmsim/mobility.hpp"
#include "cpmsim/time.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cpmsim {

/// Event classes, in tie-breaking order at equal timestamps.
enum class EventKind : std::uint8_t {
  frame_end = 0,
  mobility_step = 1,
  cbr_window = 2,
  generation_check = 3,
  mac_timer = 4,
};

struct Event {
  SimTime time{0};
  EventKind kind = EventKind::mobility_step;
  VehicleId vehicle = 0;
  std::uint64_t seq = 0;      // insertion order, last tie breaker
  std::uint64_t payload = 0;  // frame id or timer generation

  /// Ordering for a min-heap: (time, kind, vehicle, seq).
  friend bool operator>(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.vehicle != b.vehicle) return a.vehicle > b.vehicle;
    return a.seq > b.seq;
  }
};

struct CpmLogRecord {
  SimTime time{0};
  VehicleId sender = 0;
  std::vector<VehicleId> objects;
  int size_bytes = 0;
  bool sensor_info = false;
  bool sender_in_region = false;
  std::size_t detected = 0;
};

struct FrameLogRecord {
  std::uint64_t id = 0;
  VehicleId sender = 0;
  SimTime start{0};
  SimTime duration{0};
  int size_bytes = 0;
  bool sender_in_region = false;
  std::vector<double> rx_mw;  // per vehicle, own entry = tx power
};

struct ReceptionLogRecord {
  std::uint64_t frame = 0;
  VehicleId sender = 0;
  VehicleId receiver = 0;
  SimTime tx_start{0};
  SimTime time{0};  // end of the frame
  Outcome outcome = Outcome::below_sensitivity;
  double distance = 0.0;
  bool los = true;
  double rx_power_dbm = 0.0;
  double sinr_db = 0.0;
};

struct TrajectorySample {
  SimTime time{0};
  VehicleId id = 0;
  bool active = false;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;
  double heading = 0.0;
  int road = -1;
  Axis axis = Axis::horizontal;
  bool in_region = false;
};

struct RunOptions {
  /// Keeps per-CPM, per-frame, per-reception and trajectory logs.
  bool record_logs = false;
  /// Overrides the seeded per-vehicle generation-check offsets.
  std::optional<std::vector<SimTime>> phase_offsets;
  /// Overrides the look-ahead prediction horizon.
  std::optional<SimTime> prediction_horizon;
};

struct RunResult {
  PolicyVariant policy = PolicyVariant::etsi;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::size_t vehicles = 0;
  RunSummary summary;
  std::vector<CpmLogRecord> cpms;  // always kept
  std::vector<FrameLogRecord> frames;
  std::vector<ReceptionLogRecord> receptions;
  std::vector<TrajectorySample> trajectory;
  std::vector<std::pair<VehicleId, Interval>> busy_intervals;
  SimTime duration{0};
};

/// One deterministic simulation of `config` under `config.cpm.policy`.
RunResult run(const ScenarioConfig& config, const RunOptions& options = {});

/// As above with a caller-supplied mobility model and geometry.
RunResult run(const ScenarioConfig& config, std::unique_ptr<MobilityModel> mobility,
              const Geometry& geometry, const StatsRegion& region, const RunOptions& options = {});

/// Street relation of two vehicles on a grid; same_street on highways.
StreetRelation street_relation(const VehicleState& a, const VehicleState& b);

struct SweepCell {
  std::string scenario;  // label, e.g. the config file stem
  ScenarioConfig config;
  PolicyVariant policy = PolicyVariant::etsi;
  std::uint64_t seed = 0;
};

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string error;
  RunSummary summary;
  double wall_seconds = 0.0;
};

/// Paired ETSI vs. look-ahead difference for one scenario and seed,
/// (look_ahead - etsi) / etsi * 100 per metric.
struct ComparisonRow {
  std::string scenario;
  std::optional<std::uint64_t> seed;  // unset: mean over all paired seeds
  std::string metric;
  double etsi = 0.0;
  double look_ahead = 0.0;
  double difference_pct = 0.0;
};

/// Full matrix of scenarios x policies x seeds. Throws ConfigValidationError
/// on an empty matrix or seed list.
std::vector<SweepCell> make_sweep(const std::vector<std::pair<std::string, ScenarioConfig>>& scenarios,
                                  const std::vector<PolicyVariant>& policies,
                                  const std::vector<std::uint64_t>& seeds);

/// Runs every cell, up to `parallel` at a time. A failing cell is reported in
/// its row and the sweep continues. Rows keep the cell order.
std::vector<SweepRow> sweep(const std::vector<SweepCell>& cells, int parallel = 1,
                            const std::function<void(const SweepRow&)>& progress = {});

std::vector<ComparisonRow> compare(const std::vector<SweepRow>& rows);

/// Summary metrics used in comparisons, in output order.
std::vector<std::pair<std::string, double>> headline_metrics(const RunSummary& s, bool urban);

}  // namespace cpmsim
