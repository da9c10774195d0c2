#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/geometry.hpp"
#include "cpmsim/sensing.hpp"
#include "cpmsim/time.hpp"
#include "cpmsim/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace cpmsim {

/// Generation rule set. The look-ahead variant predicts one check ahead with
/// a horizon that defaults to T_GenCpm; a zero horizon makes it coincide with
/// the ETSI rules.
struct GenerationPolicy {
  PolicyVariant variant = PolicyVariant::etsi;
  double position_threshold_m = 4.0;
  double speed_threshold_mps = 0.5;
  SimTime time_threshold = SimTime{1'000'000'000};
  SimTime t_gen_cpm = milliseconds(100);
  std::optional<SimTime> prediction_horizon;

  SimTime horizon() const { return prediction_horizon.value_or(t_gen_cpm); }

  static GenerationPolicy from(const CpmConfig& cpm);
};

/// Reference values of an object as of its last CPM inclusion.
struct TrackedObjectRecord {
  VehicleId id = 0;
  Vec2 position = Vec2::Zero();
  double speed = 0.0;
  SimTime included_at = kNever;
  bool ever_included = false;
  SimTime last_seen = kNever;
};

using RecordMap = std::map<VehicleId, TrackedObjectRecord>;

/// Change of one detected object since its last inclusion.
struct ObjectDelta {
  double position = 0.0;  // |current - last included position|, m
  double speed = 0.0;     // |current - last included speed|, m/s
  SimTime elapsed{0};     // now - last inclusion time
  bool is_new = false;    // no record, or never included
};

ObjectDelta object_delta(const TrackedObjectRecord* record, const PerceivedObject& obj, SimTime now,
                         const Geometry* geometry = nullptr);

/// Predicted deltas at the next check, assuming constant acceleration over
/// the policy horizon.
struct PredictedDelta {
  double position = 0.0;
  double speed = 0.0;
  SimTime elapsed{0};
};

PredictedDelta predict_delta(const ObjectDelta& current, const PerceivedObject& obj,
                             SimTime horizon);

bool exceeds_thresholds(double dp, double ds, SimTime dt, const GenerationPolicy& policy);

struct TriggerResult {
  bool triggered = false;
  std::vector<VehicleId> include;  // ascending id
};

/// ETSI rules: include every new object and every object whose position,
/// speed or time since inclusion crossed its threshold.
TriggerResult check_etsi_triggers(const RecordMap& records,
                                  std::span<const PerceivedObject> detections, SimTime now,
                                  const GenerationPolicy& policy,
                                  const Geometry* geometry = nullptr);

/// Look-ahead: objects not yet included whose predicted deltas would cross a
/// threshold at the next check. Only meaningful when a CPM was triggered.
std::vector<VehicleId> look_ahead_extension(const RecordMap& records,
                                            std::span<const PerceivedObject> detections,
                                            SimTime now, const GenerationPolicy& policy,
                                            std::span<const VehicleId> already_included,
                                            const Geometry* geometry = nullptr);

struct CpmSizeModel {
  int lower_layer_bytes = 80;
  int base_container_bytes = 121;
  int sensor_container_bytes = 14;
  int sensors = 1;
  int object_container_bytes = 35;

  int size(bool with_sensor_info, std::size_t objects) const {
    return lower_layer_bytes + base_container_bytes +
           (with_sensor_info ? sensor_container_bytes * sensors : 0) +
           object_container_bytes * static_cast<int>(objects);
  }

  static CpmSizeModel from(const CpmConfig& cpm);
};

struct Cpm {
  VehicleId sender = 0;
  SimTime generated_at{0};
  bool sensor_info = false;
  std::vector<PerceivedObject> objects;
  int size_bytes = 0;
  int dropped_objects = 0;  // beyond the per-message object limit
};

/// An object selected for inclusion and the time since it was last included
/// (SimTime::max() for a new object).
struct Inclusion {
  PerceivedObject object;
  SimTime staleness{0};
};

/// Builds the message. Beyond `max_objects`, the stalest objects are kept.
Cpm assemble_cpm(const VehicleState& sender, std::vector<Inclusion> include, SimTime now,
                 bool sensor_info_due, const CpmSizeModel& size, int max_objects = 128);

/// True once a full second has passed since the last CPM.
inline bool fallback_timer(SimTime last_cpm, SimTime now,
                           SimTime period = SimTime{1'000'000'000}) {
  return now - last_cpm >= period;
}

/// Per-vehicle generation state machine, run once per T_GenCpm.
class CpmGenerator {
 public:
  CpmGenerator(GenerationPolicy policy, CpmSizeModel size, int max_objects, SimTime record_grace,
               const Geometry* geometry = nullptr)
      : policy_(policy),
        size_(size),
        max_objects_(max_objects),
        grace_(record_grace),
        geometry_(geometry) {}

  static CpmGenerator from(const CpmConfig& cpm, PolicyVariant variant,
                           const Geometry* geometry = nullptr);

  std::optional<Cpm> on_check(const VehicleState& self, std::span<const PerceivedObject> detections,
                              SimTime now);

  const RecordMap& records() const { return records_; }
  const GenerationPolicy& policy() const { return policy_; }
  SimTime last_cpm() const { return last_cpm_; }

 private:
  GenerationPolicy policy_;
  CpmSizeModel size_;
  int max_objects_;
  SimTime grace_;
  const Geometry* geometry_;
  RecordMap records_;
  SimTime last_cpm_ = kNever;
  SimTime last_sensor_info_ = kNever;
};

}  // namespace cpmsim
