#include "cpmsim/metrics.hpp"

#include <algorithm>

namespace cpmsim {

SimTime union_length(std::vector<Interval> intervals, Interval window) {
  for (auto& iv : intervals) {
    iv.begin = std::max(iv.begin, window.begin);
    iv.end = std::min(iv.end, window.end);
  }
  std::erase_if(intervals, [](const Interval& iv) { return iv.end <= iv.begin; });
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  SimTime total{0};
  SimTime cur_begin{0}, cur_end{0};
  bool open = false;
  for (const auto& iv : intervals) {
    if (open && iv.begin <= cur_end) {
      cur_end = std::max(cur_end, iv.end);
      continue;
    }
    if (open) total += cur_end - cur_begin;
    cur_begin = iv.begin;
    cur_end = iv.end;
    open = true;
  }
  if (open) total += cur_end - cur_begin;
  return total;
}

double cbr(std::span<const Interval> busy, SimTime window_start, SimTime window) {
  const SimTime t = union_length({busy.begin(), busy.end()}, {window_start, window_start + window});
  return std::clamp(static_cast<double>(t.count()) / static_cast<double>(window.count()), 0.0, 1.0);
}

SimTime opr_window(double speed, SimTime t_gen_cpm, double position_threshold_m, SimTime cap) {
  if (speed <= 0.0) return cap;
  const double periods = position_threshold_m / (speed * to_seconds(t_gen_cpm));
  if (periods * to_seconds(t_gen_cpm) >= to_seconds(cap)) return cap;
  // Tolerance absorbs binary rounding of exact integers such as 4 / (40 * 0.1).
  const auto k = static_cast<std::int64_t>(std::ceil(periods - 1e-9));
  return std::min(cap, t_gen_cpm * std::max<std::int64_t>(k, 1));
}

double pdr_distance_at(std::span<const CurvePoint> curve, double level) {
  double reach = 0.0;
  for (const auto& p : curve) {
    if (p.value < level) break;
    reach = p.distance;
  }
  return reach;
}

std::string_view to_string(LinkClass c) { return c == LinkClass::los ? "los" : "nlos"; }

std::string_view to_string(StreetRelation r) {
  switch (r) {
    case StreetRelation::same_street: return "same_street";
    case StreetRelation::perpendicular: return "perpendicular";
    case StreetRelation::parallel: return "parallel";
  }
  return "?";
}

namespace {

const Curve* find_curve(const std::vector<Curve>& curves, std::string_view label) {
  for (const auto& c : curves)
    if (c.label == label) return &c;
  return nullptr;
}

}  // namespace

const Curve* RunSummary::find_pdr(std::string_view label) const { return find_curve(pdr, label); }
const Curve* RunSummary::find_opr(std::string_view label) const { return find_curve(opr, label); }
const Curve* RunSummary::find_tbu(std::string_view label) const {
  return find_curve(time_between_updates, label);
}

double RunSummary::pdr_distance(std::string_view label, double level) const {
  const Curve* c = find_pdr(label);
  return c ? pdr_distance_at(c->points, level) : 0.0;
}

MetricsStore::MetricsStore(const MetricsConfig& config, bool urban, std::size_t vehicles,
                           SimTime t_gen_cpm, double position_threshold_m)
    : bins_{config.bin_width_m, config.max_distance_m},
      urban_(urban),
      n_(vehicles),
      warmup_(from_seconds(config.warmup_s)),
      cbr_window_(from_seconds(config.cbr_window_s)),
      t_gen_(t_gen_cpm),
      position_threshold_(position_threshold_m),
      cbr_(vehicles),
      pdr_(vehicles * 2 * static_cast<std::size_t>(bins_.count())),
      last_update_(vehicles * vehicles, kNever),
      tbu_sum_(3 * static_cast<std::size_t>(bins_.count()), SimTime{0}),
      tbu_count_(3 * static_cast<std::size_t>(bins_.count()), 0) {}

void MetricsStore::on_check(SimTime t, bool in_region, std::size_t detected) {
  if (!after_warmup(t) || !in_region) return;
  ++checks_;
  detected_sum_ += detected;
  ++detected_hist_[static_cast<int>(detected)];
}

void MetricsStore::on_cpm(SimTime t, bool in_region, std::size_t objects, int dropped) {
  if (!after_warmup(t) || !in_region) return;
  ++cpm_count_;
  object_sum_ += objects;
  dropped_ += static_cast<std::uint64_t>(dropped);
  ++objects_hist_[static_cast<int>(objects)];
}

void MetricsStore::on_vehicle_time(SimTime t, bool in_region, SimTime dt) {
  if (after_warmup(t) && in_region) vehicle_time_ += dt;
}

void MetricsStore::on_busy_change(VehicleId v, bool busy, SimTime t) {
  auto& tr = cbr_[v];
  if (busy == tr.busy) return;
  if (busy) {
    tr.since = t;
  } else {
    tr.window_busy += t - std::max(tr.since, window_start_);
  }
  tr.busy = busy;
}

void MetricsStore::close_cbr_window(SimTime t, std::span<const char> in_region) {
  const bool counted = window_start_ >= warmup_;
  const SimTime length = t - window_start_;
  for (std::size_t v = 0; v < cbr_.size(); ++v) {
    auto& tr = cbr_[v];
    if (tr.busy) tr.window_busy += t - std::max(tr.since, window_start_);
    if (counted && length.count() > 0 && v < in_region.size() && in_region[v]) {
      cbr_sum_ += std::clamp(static_cast<double>(tr.window_busy.count()) /
                                 static_cast<double>(length.count()),
                             0.0, 1.0);
      ++cbr_samples_;
    }
    tr.window_busy = SimTime{0};
  }
  window_start_ = t;
}

void MetricsStore::on_reception(VehicleId sender, SimTime tx_start, bool sender_in_region,
                                double distance, LinkClass link, bool decoded) {
  if (!after_warmup(tx_start) || !sender_in_region || !bins_.contains(distance)) return;
  const auto nb = static_cast<std::size_t>(bins_.count());
  auto& c = pdr_[(sender * 2 + static_cast<std::size_t>(link)) * nb +
                 static_cast<std::size_t>(bins_.index(distance))];
  ++c.total;
  if (decoded) ++c.decoded;
}

void MetricsStore::on_update(VehicleId receiver, VehicleId object, SimTime t,
                             bool receiver_in_region, double distance, StreetRelation relation) {
  if (receiver == object) return;
  SimTime& last = last_update_[receiver * n_ + object];
  if (last != kNever && after_warmup(t) && receiver_in_region && bins_.contains(distance)) {
    const int cls = urban_ ? static_cast<int>(relation) : 0;
    const auto idx = static_cast<std::size_t>(cls * bins_.count() + bins_.index(distance));
    tbu_sum_[idx] += t - last;
    ++tbu_count_[idx];
  }
  last = t;
}

std::uint64_t MetricsStore::opr_key(int cls, int bin, VehicleId i, VehicleId j) const {
  return ((static_cast<std::uint64_t>(cls) * static_cast<std::uint64_t>(bins_.count()) +
           static_cast<std::uint64_t>(bin)) *
              n_ +
          i) *
             n_ +
         j;
}

void MetricsStore::on_pair_sample(VehicleId receiver, VehicleId object, SimTime t, double distance,
                                  StreetRelation relation, double object_speed, SimTime dt) {
  if (receiver == object || !after_warmup(t) || !bins_.contains(distance)) return;
  const int cls = urban_ ? static_cast<int>(relation) : 0;
  auto& cov = opr_[opr_key(cls, bins_.index(distance), receiver, object)];
  cov.total_ns += dt.count();
  const SimTime last = last_update_[receiver * n_ + object];
  if (last != kNever && t - last < opr_window(object_speed, t_gen_, position_threshold_))
    cov.perceived_ns += dt.count();
}

RunSummary MetricsStore::summarize() const {
  RunSummary s;
  const int nb = bins_.count();
  s.cpm_count = cpm_count_;
  s.vehicle_seconds = to_seconds(vehicle_time_);
  s.cpm_rate_hz = s.vehicle_seconds > 0 ? static_cast<double>(cpm_count_) / s.vehicle_seconds : 0.0;
  s.objects_per_cpm =
      cpm_count_ > 0 ? static_cast<double>(object_sum_) / static_cast<double>(cpm_count_) : 0.0;
  s.detected_per_check =
      checks_ > 0 ? static_cast<double>(detected_sum_) / static_cast<double>(checks_) : 0.0;
  s.dropped_objects = dropped_;
  s.objects_histogram = objects_hist_;
  s.detected_histogram = detected_hist_;
  s.cbr_samples = cbr_samples_;
  s.mean_cbr = cbr_samples_ > 0 ? cbr_sum_ / static_cast<double>(cbr_samples_) : 0.0;

  // PDR: per-transmitter ratio, then the mean over transmitters.
  const int link_classes = urban_ ? 2 : 1;
  for (int cls = 0; cls < link_classes; ++cls) {
    Curve curve{std::string(to_string(static_cast<LinkClass>(cls))), {}};
    for (int b = 0; b < nb; ++b) {
      double sum = 0.0;
      std::size_t senders = 0;
      for (std::size_t v = 0; v < n_; ++v) {
        const auto& c = pdr_[(v * 2 + static_cast<std::size_t>(cls)) * static_cast<std::size_t>(nb) +
                             static_cast<std::size_t>(b)];
        if (c.total == 0) continue;
        sum += static_cast<double>(c.decoded) / static_cast<double>(c.total);
        ++senders;
      }
      if (senders > 0) curve.points.push_back({bins_.center(b), sum / double(senders), senders});
    }
    s.pdr.push_back(std::move(curve));
  }

  // OPR: mean over (receiver, object) pairs of the perceived time fraction.
  std::vector<std::pair<std::uint64_t, Coverage>> entries(opr_.begin(), opr_.end());
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::uint64_t per_bin = static_cast<std::uint64_t>(n_) * n_;
  for (int cls = 0; cls < classes(); ++cls) {
    Curve opr{urban_ ? std::string(to_string(static_cast<StreetRelation>(cls))) : "all", {}};
    Curve tbu{opr.label, {}};
    for (int b = 0; b < nb; ++b) {
      const std::uint64_t lo = opr_key(cls, b, 0, 0);
      auto it = std::lower_bound(entries.begin(), entries.end(), lo,
                                 [](const auto& e, std::uint64_t k) { return e.first < k; });
      double sum = 0.0;
      std::size_t pairs = 0;
      for (; it != entries.end() && it->first < lo + per_bin; ++it) {
        if (it->second.total_ns == 0) continue;
        sum += static_cast<double>(it->second.perceived_ns) /
               static_cast<double>(it->second.total_ns);
        ++pairs;
      }
      if (pairs > 0) opr.points.push_back({bins_.center(b), sum / double(pairs), pairs});

      const auto idx = static_cast<std::size_t>(cls * nb + b);
      if (tbu_count_[idx] > 0)
        tbu.points.push_back({bins_.center(b),
                              to_seconds(tbu_sum_[idx]) / static_cast<double>(tbu_count_[idx]),
                              tbu_count_[idx]});
    }
    s.opr.push_back(std::move(opr));
    s.time_between_updates.push_back(std::move(tbu));
  }
  return s;
}

}  // namespace cpmsim
