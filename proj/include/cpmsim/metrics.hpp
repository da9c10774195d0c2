#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/time.hpp"
#include "cpmsim/types.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cpmsim {

/// Bin k is centred on k * width and covers [k*width - width/2, k*width + width/2).
struct DistanceBins {
  double width = 25.0;
  double max_distance = 500.0;

  int index(double d) const { return static_cast<int>(std::floor(d / width + 0.5)); }
  double center(int k) const { return k * width; }
  int count() const { return index(max_distance) + 1; }
  bool contains(double d) const { return d >= 0.0 && index(d) < count(); }
};

struct Interval {
  SimTime begin{0};
  SimTime end{0};
};

/// Length of the union of `intervals` clipped to `window`.
SimTime union_length(std::vector<Interval> intervals, Interval window);

/// Channel busy ratio over [window_start, window_start + window), clamped to [0, 1].
double cbr(std::span<const Interval> busy, SimTime window_start,
           SimTime window = milliseconds(100));

/// Perception window for an object moving at `speed`: the CPM period the
/// position rule produces, T_GenCpm * ceil(threshold / (speed * T_GenCpm)),
/// capped at `cap`.
SimTime opr_window(double speed, SimTime t_gen_cpm, double position_threshold_m = 4.0,
                   SimTime cap = SimTime{1'000'000'000});

struct CurvePoint {
  double distance = 0.0;
  double value = 0.0;
  std::size_t samples = 0;  // contributing transmitters / pairs / intervals
};

/// Largest bin centre up to which every bin reaches `level`; 0 if the first
/// bin already falls short. Points must be sorted by distance.
double pdr_distance_at(std::span<const CurvePoint> curve, double level = 0.9);

/// Pair classes. PDR uses {los, nlos}; OPR and update intervals use the
/// street relation of receiver and object. Highways use class 0 throughout.
enum class LinkClass : int { los = 0, nlos = 1 };
enum class StreetRelation : int { same_street = 0, perpendicular = 1, parallel = 2 };

std::string_view to_string(LinkClass c);
std::string_view to_string(StreetRelation r);

struct Curve {
  std::string label;
  std::vector<CurvePoint> points;
};

struct RunSummary {
  double cpm_rate_hz = 0.0;
  double objects_per_cpm = 0.0;
  double detected_per_check = 0.0;
  std::uint64_t cpm_count = 0;
  double vehicle_seconds = 0.0;
  std::uint64_t dropped_objects = 0;
  std::map<int, std::uint64_t> objects_histogram;
  std::map<int, std::uint64_t> detected_histogram;
  double mean_cbr = 0.0;
  std::uint64_t cbr_samples = 0;
  std::vector<Curve> pdr;  // per link class
  std::vector<Curve> opr;  // per street relation
  std::vector<Curve> time_between_updates;

  /// PDR >= 0.9 distance for the given PDR curve label (0 if absent).
  double pdr_distance(std::string_view label, double level = 0.9) const;
  const Curve* find_pdr(std::string_view label) const;
  const Curve* find_opr(std::string_view label) const;
  const Curve* find_tbu(std::string_view label) const;
};

/// Streaming accumulators fed by the scheduler. Every quantity is restricted
/// to samples taken at or after the warm-up time, with the relevant vehicle
/// inside the statistics region.
class MetricsStore {
 public:
  MetricsStore(const MetricsConfig& config, bool urban, std::size_t vehicles, SimTime t_gen_cpm,
               double position_threshold_m);

  bool after_warmup(SimTime t) const { return t >= warmup_; }

  // CPM generation
  void on_check(SimTime t, bool in_region, std::size_t detected);
  void on_cpm(SimTime t, bool in_region, std::size_t objects, int dropped);
  void on_vehicle_time(SimTime t, bool in_region, SimTime dt);

  // Channel busy tracking (every vehicle, continuous time)
  void on_busy_change(VehicleId v, bool busy, SimTime t);
  /// Closes the window ending at `t` for every vehicle; `in_region[v]`
  /// selects which vehicles contribute a sample.
  void close_cbr_window(SimTime t, std::span<const char> in_region);

  // Packet delivery
  void on_reception(VehicleId sender, SimTime tx_start, bool sender_in_region, double distance,
                    LinkClass link, bool decoded);

  // Perception: a decoded CPM about `object` reached `receiver` at `t`.
  void on_update(VehicleId receiver, VehicleId object, SimTime t, bool receiver_in_region,
                 double distance, StreetRelation relation);
  /// One OPR sample for the pair at time `t`, weighted by `dt`.
  void on_pair_sample(VehicleId receiver, VehicleId object, SimTime t, double distance,
                      StreetRelation relation, double object_speed, SimTime dt);

  RunSummary summarize() const;

  const DistanceBins& bins() const { return bins_; }
  std::size_t vehicles() const { return n_; }

 private:
  struct Counts {
    std::uint64_t decoded = 0;
    std::uint64_t total = 0;
  };
  struct Coverage {
    std::int64_t perceived_ns = 0;
    std::int64_t total_ns = 0;
  };
  struct CbrTracker {
    bool busy = false;
    SimTime since{0};
    SimTime window_busy{0};
  };

  int classes() const { return urban_ ? 3 : 1; }
  std::uint64_t opr_key(int cls, int bin, VehicleId i, VehicleId j) const;

  DistanceBins bins_;
  bool urban_;
  std::size_t n_;
  SimTime warmup_;
  SimTime cbr_window_;
  SimTime t_gen_;
  double position_threshold_;

  std::uint64_t cpm_count_ = 0;
  std::uint64_t object_sum_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t checks_ = 0;
  std::uint64_t detected_sum_ = 0;
  SimTime vehicle_time_{0};
  std::map<int, std::uint64_t> objects_hist_;
  std::map<int, std::uint64_t> detected_hist_;

  std::vector<CbrTracker> cbr_;
  SimTime window_start_{0};
  double cbr_sum_ = 0.0;
  std::uint64_t cbr_samples_ = 0;

  std::vector<Counts> pdr_;  // [sender][class][bin]
  std::vector<SimTime> last_update_;  // [receiver][object]
  std::vector<SimTime> tbu_sum_;      // [class][bin]
  std::vector<std::uint64_t> tbu_count_;
  std::unordered_map<std::uint64_t, Coverage> opr_;
};

}  // namespace cpmsim
