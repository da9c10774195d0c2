#include "cpmsim/simulation.hpp"

#include "cpmsim/cpm.hpp"
#include "cpmsim/sensing.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <thread>

namespace cpmsim {

StreetRelation street_relation(const VehicleState& a, const VehicleState& b) {
  if (a.road == b.road) return StreetRelation::same_street;
  return a.axis != b.axis ? StreetRelation::perpendicular : StreetRelation::parallel;
}

namespace {

class Scheduler {
 public:
  Scheduler(const ScenarioConfig& config, std::unique_ptr<MobilityModel> mobility,
            const Geometry& geometry, const StatsRegion& region, const RunOptions& options)
      : config_(config),
        options_(options),
        mobility_(std::move(mobility)),
        geometry_(geometry),
        region_(region),
        n_(mobility_->size()),
        t_gen_(from_seconds(config.cpm.t_gen_cpm_s)),
        duration_(from_seconds(config.duration_s)),
        cbr_window_(from_seconds(config.metrics.cbr_window_s)),
        metrics_(config.metrics, geometry.has_grid(), n_, t_gen_, config.cpm.position_threshold_m),
        sensor_noise_(config.seed, "sensing"),
        in_region_(n_, 0),
        busy_since_(n_, kNever) {
    auto policy = GenerationPolicy::from(config.cpm);
    policy.prediction_horizon = options.prediction_horizon;
    generators_.reserve(n_);
    for (std::size_t v = 0; v < n_; ++v)
      generators_.emplace_back(policy, CpmSizeModel::from(config.cpm), config.cpm.max_objects,
                               from_seconds(config.cpm.record_grace_s), &geometry_);

    ChannelHooks hooks;
    hooks.schedule_timer = [this](VehicleId v, SimTime t, std::uint64_t gen) {
      push(t, EventKind::mac_timer, v, gen);
    };
    hooks.schedule_frame_end = [this](std::uint64_t id, SimTime t) {
      push(t, EventKind::frame_end, channel_->frame(id)->sender, id);
    };
    hooks.busy_changed = [this](VehicleId v, bool busy, SimTime t) { on_busy(v, busy, t); };
    channel_ = std::make_unique<Channel>(ChannelParams::from(config.radio, config.mac), geometry_,
                                         *mobility_, derive_seed(config.seed, "shadowing"),
                                         Rng(config.seed, "backoff"), std::move(hooks));
  }

  RunResult execute() {
    RunResult result;
    result.policy = config_.cpm.policy;
    result.seed = config_.seed;
    result.config_hash = config_hash(config_);
    result.vehicles = n_;
    result.duration = duration_;
    result_ = &result;

    std::vector<SimTime> phase;
    if (options_.phase_offsets) {
      phase = *options_.phase_offsets;
      if (phase.size() != n_) throw std::invalid_argument("phase offsets: one per vehicle required");
    } else {
      Rng rng(config_.seed, "phase");
      phase.resize(n_);
      for (auto& p : phase) p = SimTime{static_cast<std::int64_t>(rng.below(t_gen_.count()))};
    }
    for (VehicleId v = 0; v < n_; ++v)
      if (phase[v] < duration_) push(phase[v], EventKind::generation_check, v, 0);
    if (mobility_->step_size() < duration_) push(mobility_->step_size(), EventKind::mobility_step, 0, 0);
    if (cbr_window_ <= duration_) push(cbr_window_, EventKind::cbr_window, 0, 0);
    sample_step(SimTime{0});

    while (!queue_.empty()) {
      const Event e = queue_.top();
      if (e.time > duration_) break;
      queue_.pop();
      if (!clock_.advance_to(e.time)) throw std::logic_error("scheduler: event in the past");
      dispatch(e);
    }

    if (options_.record_logs)
      for (VehicleId v = 0; v < n_; ++v)
        if (busy_since_[v] != kNever)
          result.busy_intervals.push_back({v, {busy_since_[v], duration_}});

    result.summary = metrics_.summarize();
    result_ = nullptr;
    return result;
  }

 private:
  void push(SimTime t, EventKind kind, VehicleId v, std::uint64_t payload) {
    queue_.push(Event{t, kind, v, seq_++, payload});
  }

  bool in_region_at(VehicleId v, SimTime t) const {
    return mobility_->active(v) && region_.contains(mobility_->position_at(v, t));
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::frame_end: on_frame_end(e.payload, e.time); break;
      case EventKind::mobility_step: on_mobility(e.time); break;
      case EventKind::cbr_window: on_cbr_window(e.time); break;
      case EventKind::generation_check: on_generation(e.vehicle, e.time); break;
      case EventKind::mac_timer: on_timer(e.vehicle, e.payload, e.time); break;
    }
  }

  void on_busy(VehicleId v, bool busy, SimTime t) {
    metrics_.on_busy_change(v, busy, t);
    if (!options_.record_logs) return;
    if (busy) {
      busy_since_[v] = t;
    } else {
      result_->busy_intervals.push_back({v, {busy_since_[v], t}});
      busy_since_[v] = kNever;
    }
  }

  void on_mobility(SimTime t) {
    mobility_->step();
    if (mobility_->now() != t) throw std::logic_error("scheduler: mobility clock out of step");
    sample_step(t);
    const SimTime next = t + mobility_->step_size();
    if (next < duration_) push(next, EventKind::mobility_step, 0, 0);
  }

  // Per-step samples covering [t, t + step): vehicle time, OPR pairs, trajectory.
  void sample_step(SimTime t) {
    const SimTime dt = std::min(mobility_->step_size(), duration_ - t);
    const auto& states = mobility_->states();
    for (VehicleId v = 0; v < n_; ++v)
      in_region_[v] = mobility_->active(v) && region_.contains(states[v].position) ? 1 : 0;

    for (VehicleId i = 0; i < n_; ++i) {
      if (!mobility_->active(i)) continue;
      metrics_.on_vehicle_time(t, in_region_[i] != 0, dt);
      if (options_.record_logs) {
        const auto& s = states[i];
        result_->trajectory.push_back(
            {t, i, true, s.position, s.speed, s.heading, s.road, s.axis, in_region_[i] != 0});
      }
      if (!in_region_[i] || !metrics_.after_warmup(t)) continue;
      for (VehicleId j = 0; j < n_; ++j) {
        if (j == i || !mobility_->active(j)) continue;
        const double d = geometry_.distance(states[i].position, states[j].position);
        if (!metrics_.bins().contains(d)) continue;
        metrics_.on_pair_sample(i, j, t, d, street_relation(states[i], states[j]), states[j].speed,
                                dt);
      }
    }
  }

  void on_cbr_window(SimTime t) {
    std::vector<char> flags(n_, 0);
    for (VehicleId v = 0; v < n_; ++v) flags[v] = in_region_at(v, t) ? 1 : 0;
    metrics_.close_cbr_window(t, flags);
    const SimTime next = t + cbr_window_;
    if (next <= duration_) push(next, EventKind::cbr_window, 0, 0);
  }

  void on_generation(VehicleId v, SimTime t) {
    const SimTime next = t + t_gen_;
    if (next < duration_) push(next, EventKind::generation_check, v, 0);
    if (!mobility_->active(v)) return;

    snapshot_.clear();
    for (VehicleId u = 0; u < n_; ++u)
      if (mobility_->active(u)) snapshot_.push_back(mobility_->state_at(u, t));
    const VehicleState self = mobility_->state_at(v, t);
    const auto detections = detect(self, snapshot_, geometry_, config_.sensing, t, &sensor_noise_);
    const bool in_region = region_.contains(self.position);
    metrics_.on_check(t, in_region, detections.size());

    auto cpm = generators_[v].on_check(self, detections, t);
    if (!cpm) return;
    metrics_.on_cpm(t, in_region, cpm->objects.size(), cpm->dropped_objects);

    CpmLogRecord rec;
    rec.time = t;
    rec.sender = v;
    rec.size_bytes = cpm->size_bytes;
    rec.sensor_info = cpm->sensor_info;
    rec.sender_in_region = in_region;
    rec.detected = detections.size();
    rec.objects.reserve(cpm->objects.size());
    for (const auto& o : cpm->objects) rec.objects.push_back(o.id);
    result_->cpms.push_back(std::move(rec));

    channel_->enqueue(v, std::make_shared<const Cpm>(std::move(*cpm)), t);
  }

  void on_timer(VehicleId v, std::uint64_t generation, SimTime t) {
    const FrameEvent* f = channel_->on_timer(v, generation, t);
    if (!f || !options_.record_logs) return;
    result_->frames.push_back({f->id, f->sender, f->start, f->duration, f->size_bytes,
                               region_.contains(f->sender_position), f->rx_mw});
  }

  void on_frame_end(std::uint64_t id, SimTime t) {
    const FrameEvent* f = channel_->frame(id);
    const VehicleId sender = f->sender;
    const SimTime start = f->start;
    const bool sender_in_region = region_.contains(f->sender_position);
    const std::shared_ptr<const Cpm> payload = f->payload;

    const auto outcomes = channel_->on_frame_end(id, t);
    for (const auto& r : outcomes) {
      const bool decoded = r.outcome == Outcome::decoded;
      metrics_.on_reception(sender, start, sender_in_region, r.distance,
                            r.los ? LinkClass::los : LinkClass::nlos, decoded);
      if (options_.record_logs)
        result_->receptions.push_back({id, sender, r.receiver, start, t, r.outcome, r.distance, r.los,
                                       r.rx_power_dbm, r.sinr_db});
      if (!decoded) continue;
      const VehicleState receiver = mobility_->state_at(r.receiver, t);
      const bool receiver_in_region = region_.contains(receiver.position);
      for (const auto& obj : payload->objects) {
        if (obj.id == r.receiver || !mobility_->active(obj.id)) continue;
        const VehicleState object = mobility_->state_at(obj.id, t);
        metrics_.on_update(r.receiver, obj.id, t, receiver_in_region,
                           geometry_.distance(receiver.position, object.position),
                           street_relation(receiver, object));
      }
    }
  }

  const ScenarioConfig& config_;
  const RunOptions& options_;
  std::unique_ptr<MobilityModel> mobility_;
  const Geometry& geometry_;
  StatsRegion region_;
  std::size_t n_;
  SimTime t_gen_;
  SimTime duration_;
  SimTime cbr_window_;
  MetricsStore metrics_;
  Rng sensor_noise_;
  std::vector<CpmGenerator> generators_;
  std::unique_ptr<Channel> channel_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t seq_ = 0;
  SimClock clock_;
  std::vector<char> in_region_;
  std::vector<SimTime> busy_since_;
  std::vector<VehicleState> snapshot_;
  RunResult* result_ = nullptr;
};

}  // namespace

RunResult run(const ScenarioConfig& config, std::unique_ptr<MobilityModel> mobility,
              const Geometry& geometry, const StatsRegion& region, const RunOptions& options) {
  Scheduler scheduler(config, std::move(mobility), geometry, region, options);
  return scheduler.execute();
}

RunResult run(const ScenarioConfig& config, const RunOptions& options) {
  validate(config);
  const Geometry geometry = make_geometry(config);
  return run(config, make_mobility(config), geometry, make_stats_region(config), options);
}

std::vector<SweepCell> make_sweep(
    const std::vector<std::pair<std::string, ScenarioConfig>>& scenarios,
    const std::vector<PolicyVariant>& policies, const std::vector<std::uint64_t>& seeds) {
  if (scenarios.empty()) throw ConfigValidationError("sweep.configs", "no scenario given");
  if (policies.empty()) throw ConfigValidationError("sweep.policies", "no policy given");
  if (seeds.empty()) throw ConfigValidationError("sweep.seeds", "seed list is empty");
  std::vector<SweepCell> cells;
  for (const auto& [name, config] : scenarios)
    for (const auto seed : seeds)
      for (const auto policy : policies) {
        SweepCell cell{name, config, policy, seed};
        cell.config.seed = seed;
        cell.config.cpm.policy = policy;
        cells.push_back(std::move(cell));
      }
  return cells;
}

std::vector<SweepRow> sweep(const std::vector<SweepCell>& cells, int parallel,
                            const std::function<void(const SweepRow&)>& progress) {
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      SweepRow& row = rows[k];
      row.cell = cells[k];
      const auto begin = std::chrono::steady_clock::now();
      try {
        row.summary = run(cells[k].config).summary;
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
      if (progress) {
        std::lock_guard lock(report);
        progress(row);
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallel, static_cast<int>(cells.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return rows;
}

std::vector<std::pair<std::string, double>> headline_metrics(const RunSummary& s, bool urban) {
  std::vector<std::pair<std::string, double>> m{
      {"cpm_rate_hz", s.cpm_rate_hz},
      {"objects_per_cpm", s.objects_per_cpm},
      {"mean_cbr", s.mean_cbr},
      {"pdr090_distance_los_m", s.pdr_distance("los")},
  };
  if (urban) m.emplace_back("pdr090_distance_nlos_m", s.pdr_distance("nlos"));
  return m;
}

namespace {

double percent_change(double etsi, double look_ahead) {
  return etsi != 0.0 ? (look_ahead - etsi) / etsi * 100.0 : std::nan("");
}

}  // namespace

std::vector<ComparisonRow> compare(const std::vector<SweepRow>& rows) {
  struct Pair {
    const SweepRow* etsi = nullptr;
    const SweepRow* look_ahead = nullptr;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, Pair>> pairs;
  for (const auto& row : rows) {
    if (!row.ok) continue;
    if (!pairs.contains(row.cell.scenario)) order.push_back(row.cell.scenario);
    auto& p = pairs[row.cell.scenario][row.cell.seed];
    (row.cell.policy == PolicyVariant::etsi ? p.etsi : p.look_ahead) = &row;
  }

  std::vector<ComparisonRow> out;
  for (const auto& scenario : order) {
    std::vector<ComparisonRow> per_seed;
    for (const auto& [seed, p] : pairs[scenario]) {
      if (!p.etsi || !p.look_ahead) continue;
      const bool urban = p.etsi->cell.config.layout == Layout::manhattan;
      const auto a = headline_metrics(p.etsi->summary, urban);
      const auto b = headline_metrics(p.look_ahead->summary, urban);
      for (std::size_t k = 0; k < a.size(); ++k)
        per_seed.push_back({scenario, seed, a[k].first, a[k].second, b[k].second,
                            percent_change(a[k].second, b[k].second)});
    }
    std::vector<std::string> metrics;
    std::map<std::string, std::pair<double, double>> sums;
    std::map<std::string, int> counts;
    for (const auto& r : per_seed) {
      if (!sums.contains(r.metric)) metrics.push_back(r.metric);
      sums[r.metric].first += r.etsi;
      sums[r.metric].second += r.look_ahead;
      ++counts[r.metric];
    }
    out.insert(out.end(), per_seed.begin(), per_seed.end());
    for (const auto& m : metrics) {
      const double e = sums[m].first / counts[m];
      const double l = sums[m].second / counts[m];
      out.push_back({scenario, std::nullopt, m, e, l, percent_change(e, l)});
    }
  }
  return out;
}

}  // namespace cpmsim
