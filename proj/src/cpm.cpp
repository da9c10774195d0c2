#include "cpmsim/cpm.hpp"

#include <algorithm>
#include <iostream>

namespace cpmsim {

GenerationPolicy GenerationPolicy::from(const CpmConfig& cpm) {
  GenerationPolicy p;
  p.variant = cpm.policy;
  p.position_threshold_m = cpm.position_threshold_m;
  p.speed_threshold_mps = cpm.speed_threshold_mps;
  p.time_threshold = from_seconds(cpm.time_threshold_s);
  p.t_gen_cpm = from_seconds(cpm.t_gen_cpm_s);
  return p;
}

CpmSizeModel CpmSizeModel::from(const CpmConfig& cpm) {
  return {cpm.lower_layer_bytes, cpm.base_container_bytes, cpm.sensor_container_bytes,
          cpm.sensors_per_vehicle, cpm.object_container_bytes};
}

ObjectDelta object_delta(const TrackedObjectRecord* record, const PerceivedObject& obj, SimTime now,
                         const Geometry* geometry) {
  ObjectDelta d;
  if (!record || !record->ever_included) {
    d.is_new = true;
    return d;
  }
  const Vec2 moved = geometry ? geometry->displacement(record->position, obj.position)
                              : Vec2(obj.position - record->position);
  d.position = moved.norm();
  d.speed = std::abs(obj.speed - record->speed);
  d.elapsed = now - record->included_at;
  return d;
}

PredictedDelta predict_delta(const ObjectDelta& current, const PerceivedObject& obj,
                             SimTime horizon) {
  const double h = to_seconds(horizon);
  return {current.position + obj.speed * h + 0.5 * obj.acceleration * h * h,
          current.speed + obj.acceleration * h, current.elapsed + horizon};
}

bool exceeds_thresholds(double dp, double ds, SimTime dt, const GenerationPolicy& policy) {
  return dp > policy.position_threshold_m || ds > policy.speed_threshold_mps ||
         dt > policy.time_threshold;
}

namespace {

const TrackedObjectRecord* find(const RecordMap& records, VehicleId id) {
  const auto it = records.find(id);
  return it == records.end() ? nullptr : &it->second;
}

}  // namespace

TriggerResult check_etsi_triggers(const RecordMap& records,
                                  std::span<const PerceivedObject> detections, SimTime now,
                                  const GenerationPolicy& policy, const Geometry* geometry) {
  TriggerResult r;
  for (const auto& obj : detections) {
    const ObjectDelta d = object_delta(find(records, obj.id), obj, now, geometry);
    if (d.is_new || exceeds_thresholds(d.position, d.speed, d.elapsed, policy))
      r.include.push_back(obj.id);
  }
  std::sort(r.include.begin(), r.include.end());
  r.triggered = !r.include.empty();
  return r;
}

std::vector<VehicleId> look_ahead_extension(const RecordMap& records,
                                            std::span<const PerceivedObject> detections,
                                            SimTime now, const GenerationPolicy& policy,
                                            std::span<const VehicleId> already_included,
                                            const Geometry* geometry) {
  std::vector<VehicleId> extra;
  for (const auto& obj : detections) {
    if (std::find(already_included.begin(), already_included.end(), obj.id) !=
        already_included.end())
      continue;
    const ObjectDelta d = object_delta(find(records, obj.id), obj, now, geometry);
    if (d.is_new) {
      extra.push_back(obj.id);
      continue;
    }
    const PredictedDelta next = predict_delta(d, obj, policy.horizon());
    if (exceeds_thresholds(next.position, next.speed, next.elapsed, policy))
      extra.push_back(obj.id);
  }
  std::sort(extra.begin(), extra.end());
  return extra;
}

Cpm assemble_cpm(const VehicleState& sender, std::vector<Inclusion> include, SimTime now,
                 bool sensor_info_due, const CpmSizeModel& size, int max_objects) {
  Cpm cpm;
  cpm.sender = sender.id;
  cpm.generated_at = now;
  cpm.sensor_info = sensor_info_due;

  const auto limit = static_cast<std::size_t>(std::max(0, max_objects));
  if (include.size() > limit) {
    std::stable_sort(include.begin(), include.end(), [](const Inclusion& a, const Inclusion& b) {
      return a.staleness != b.staleness ? a.staleness > b.staleness : a.object.id < b.object.id;
    });
    cpm.dropped_objects = static_cast<int>(include.size() - limit);
    std::clog << "warning: vehicle " << sender.id << " at t=" << to_seconds(now) << " s: "
              << include.size() << " objects selected, keeping the " << limit << " stalest\n";
    include.resize(limit);
    std::sort(include.begin(), include.end(),
              [](const Inclusion& a, const Inclusion& b) { return a.object.id < b.object.id; });
  }

  cpm.objects.reserve(include.size());
  for (auto& inc : include) cpm.objects.push_back(inc.object);
  cpm.size_bytes = size.size(sensor_info_due, cpm.objects.size());
  return cpm;
}

CpmGenerator CpmGenerator::from(const CpmConfig& cpm, PolicyVariant variant,
                                const Geometry* geometry) {
  auto policy = GenerationPolicy::from(cpm);
  policy.variant = variant;
  return CpmGenerator(policy, CpmSizeModel::from(cpm), cpm.max_objects,
                      from_seconds(cpm.record_grace_s), geometry);
}

std::optional<Cpm> CpmGenerator::on_check(const VehicleState& self,
                                          std::span<const PerceivedObject> detections,
                                          SimTime now) {
  std::erase_if(records_, [&](const auto& kv) { return now - kv.second.last_seen > grace_; });

  TriggerResult trig = check_etsi_triggers(records_, detections, now, policy_, geometry_);
  std::vector<VehicleId> ids = trig.include;
  if (trig.triggered && policy_.variant == PolicyVariant::look_ahead) {
    const auto extra = look_ahead_extension(records_, detections, now, policy_, ids, geometry_);
    ids.insert(ids.end(), extra.begin(), extra.end());
    std::sort(ids.begin(), ids.end());
  }

  for (const auto& obj : detections) {
    auto [it, inserted] = records_.try_emplace(obj.id);
    if (inserted) it->second.id = obj.id;
    it->second.last_seen = now;
  }

  if (!trig.triggered && !fallback_timer(last_cpm_, now)) return std::nullopt;

  std::vector<Inclusion> include;
  include.reserve(ids.size());
  for (const auto& obj : detections) {
    if (!std::binary_search(ids.begin(), ids.end(), obj.id)) continue;
    const auto& rec = records_.at(obj.id);
    const SimTime staleness = rec.ever_included ? now - rec.included_at : SimTime::max();
    include.push_back({obj, staleness});
  }

  const bool sensor_info = fallback_timer(last_sensor_info_, now);
  Cpm cpm = assemble_cpm(self, std::move(include), now, sensor_info, size_, max_objects_);

  for (const auto& obj : cpm.objects) {
    auto& rec = records_.at(obj.id);
    rec.position = obj.position;
    rec.speed = obj.speed;
    rec.included_at = now;
    rec.ever_included = true;
  }
  last_cpm_ = now;
  if (sensor_info) last_sensor_info_ = now;
  return cpm;
}

}  // namespace cpmsim
