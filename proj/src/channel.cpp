#include "cpmsim/channel.hpp"

#include "cpmsim/mobility.hpp"

#include <numbers>
#include <stdexcept>

namespace cpmsim {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::decoded: return "decoded";
    case Outcome::collision_loss: return "collision_loss";
    case Outcome::below_sensitivity: return "below_sensitivity";
  }
  return "?";
}

double worst_interference(std::span<const FrameEvent* const> others, SimTime start, SimTime end,
                          VehicleId v) {
  auto power_at = [&](SimTime t) {
    double sum = 0.0;
    for (const FrameEvent* g : others)
      if (g->start <= t && t < g->end()) sum += g->rx_mw[v];
    return sum;
  };
  double worst = power_at(start);
  for (const FrameEvent* g : others)
    if (g->start > start && g->start < end) worst = std::max(worst, power_at(g->start));
  return worst;
}

double link_shadowing(std::uint64_t seed, VehicleId a, VehicleId b, std::int64_t epoch) {
  if (a > b) std::swap(a, b);
  const std::uint64_t key =
      mix64(mix64(mix64(seed ^ a) ^ (std::uint64_t{b} << 1)) ^ static_cast<std::uint64_t>(epoch));
  const std::uint64_t u_bits = mix64(key);
  const std::uint64_t v_bits = mix64(key + 0x9e3779b97f4a7c15ULL);
  const double u = (static_cast<double>(u_bits >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double v = static_cast<double>(v_bits >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

ChannelParams ChannelParams::from(const RadioConfig& radio, const MacConfig& mac) {
  ChannelParams p;
  p.tx_power_dbm = radio.tx_power_dbm;
  p.sensing_threshold_mw = dbm_to_mw(radio.sensing_threshold_dbm);
  p.rule.sensitivity_dbm = radio.sensitivity_dbm;
  p.rule.decode_threshold_db = radio.decode_threshold_db;
  p.rule.noise_mw = dbm_to_mw(noise_floor_dbm(radio.bandwidth_hz, radio.noise_figure_db));
  p.path_loss = {radio.carrier_hz, radio.antenna_height_m};
  p.shadowing_los_db = radio.shadowing_los_db;
  p.shadowing_nlos_db = radio.shadowing_nlos_db;
  p.shadowing_coherence = from_seconds(radio.shadowing_coherence_s);
  p.data_rate_bps = radio.data_rate_bps;
  p.preamble = from_seconds(mac.preamble_us * 1e-6);
  p.aifs = from_seconds(mac.aifs_us * 1e-6);
  p.slot = from_seconds(mac.slot_us * 1e-6);
  p.contention_window = mac.contention_window;
  return p;
}

Channel::Channel(ChannelParams params, const Geometry& geometry, const MobilityModel& mobility,
                 std::uint64_t shadowing_seed, Rng backoff, ChannelHooks hooks)
    : params_(std::move(params)),
      geometry_(geometry),
      mobility_(mobility),
      shadowing_seed_(shadowing_seed),
      backoff_(std::move(backoff)),
      hooks_(std::move(hooks)),
      mac_(mobility.size()),
      sensed_mw_(mobility.size(), 0.0),
      busy_(mobility.size(), 0) {}

const FrameEvent* Channel::frame(std::uint64_t id) const {
  const auto it = std::lower_bound(frames_.begin(), frames_.end(), id,
                                   [](const FrameEvent& f, std::uint64_t k) { return f.id < k; });
  return it != frames_.end() && it->id == id ? &*it : nullptr;
}

int Channel::draw_backoff() {
  return static_cast<int>(backoff_.below(static_cast<std::uint64_t>(params_.contention_window) + 1));
}

void Channel::arm(VehicleId v, SimTime now) {
  auto& m = mac_[v];
  m.countdown_from = now + params_.aifs;
  const SimTime fire = m.countdown_from + params_.slot * std::max(m.backoff, 0);
  ++m.generation;
  m.armed = true;
  hooks_.schedule_timer(v, fire, m.generation);
}

void Channel::freeze(VehicleId v, SimTime now) {
  auto& m = mac_[v];
  if (!m.armed) return;
  m.armed = false;
  ++m.generation;
  if (m.backoff < 0) {
    m.backoff = draw_backoff();
  } else if (now > m.countdown_from) {
    const auto elapsed = static_cast<int>((now - m.countdown_from) / params_.slot);
    m.backoff = std::max(0, m.backoff - elapsed);
  }
}

void Channel::update_busy(VehicleId v, SimTime now) {
  double sum = 0.0;
  for (const auto id : active_) sum += frame(id)->rx_mw[v];
  sensed_mw_[v] = sum;
  const bool busy = sum >= params_.sensing_threshold_mw;
  if (busy == (busy_[v] != 0)) return;
  busy_[v] = busy ? 1 : 0;
  if (hooks_.busy_changed) hooks_.busy_changed(v, busy, now);
  auto& m = mac_[v];
  if (busy) {
    freeze(v, now);
  } else if (!m.queue.empty() && !m.transmitting) {
    arm(v, now);
  }
}

void Channel::enqueue(VehicleId v, std::shared_ptr<const Cpm> cpm, SimTime now) {
  auto& m = mac_[v];
  m.queue.push_back(std::move(cpm));
  if (m.transmitting || m.armed || m.queue.size() > 1) return;
  if (busy_[v]) {
    if (m.backoff < 0) m.backoff = draw_backoff();
    return;
  }
  arm(v, now);
}

const FrameEvent* Channel::on_timer(VehicleId v, std::uint64_t generation, SimTime now) {
  auto& m = mac_[v];
  if (!m.armed || generation != m.generation) return nullptr;
  if (m.queue.empty()) throw std::logic_error("channel: timer fired with an empty queue");
  m.armed = false;
  m.backoff = -1;
  m.transmitting = true;

  const std::size_t n = mobility_.size();
  FrameEvent f;
  f.id = next_frame_++;
  f.sender = v;
  f.sender_position = mobility_.position_at(v, now);
  f.tx_power_dbm = params_.tx_power_dbm;
  f.start = now;
  f.payload = m.queue.front();
  f.size_bytes = f.payload->size_bytes;
  f.duration = airtime(f.size_bytes, params_.data_rate_bps, params_.preamble);
  f.rx_mw.assign(n, 0.0);
  f.distance.assign(n, 0.0f);
  f.los.assign(n, 1);
  const std::int64_t epoch = now / params_.shadowing_coherence;
  for (VehicleId u = 0; u < n; ++u) {
    if (u == v) {
      f.rx_mw[u] = dbm_to_mw(params_.tx_power_dbm);
      continue;
    }
    if (!mobility_.active(u)) continue;
    const Vec2 d = geometry_.displacement(f.sender_position, mobility_.position_at(u, now));
    const bool los = geometry_.line_of_sight(f.sender_position, f.sender_position + d);
    const double mean = params_.path_loss.mean(d, los);
    f.distance[u] = static_cast<float>(d.norm());
    f.los[u] = los ? 1 : 0;
    if (params_.tx_power_dbm - mean < params_.cutoff_dbm) continue;
    const double sigma = los ? params_.shadowing_los_db : params_.shadowing_nlos_db;
    const double shadow = sigma > 0.0 ? sigma * link_shadowing(shadowing_seed_, v, u, epoch) : 0.0;
    f.rx_mw[u] = dbm_to_mw(params_.tx_power_dbm - mean - shadow);
  }

  frames_.push_back(std::move(f));
  const FrameEvent& started = frames_.back();
  active_.push_back(started.id);
  hooks_.schedule_frame_end(started.id, started.end());
  for (VehicleId u = 0; u < n; ++u) update_busy(u, now);
  return &started;
}

std::vector<ReceptionOutcome> Channel::on_frame_end(std::uint64_t id, SimTime now) {
  const FrameEvent* f = frame(id);
  if (!f) throw std::logic_error("channel: unknown frame");
  std::erase(active_, id);

  std::vector<const FrameEvent*> others;
  for (const auto& g : frames_)
    if (g.id != id && g.start < f->end() && g.end() > f->start) others.push_back(&g);

  std::vector<ReceptionOutcome> out;
  for (VehicleId u = 0; u < f->rx_mw.size(); ++u) {
    if (u == f->sender || f->rx_mw[u] <= 0.0) continue;
    ReceptionOutcome r;
    r.receiver = u;
    r.frame = id;
    r.rx_power_dbm = mw_to_dbm(f->rx_mw[u]);
    r.distance = f->distance[u];
    r.los = f->los[u] != 0;
    const double interference = worst_interference(others, f->start, f->end(), u);
    r.outcome = params_.rule.decide(f->rx_mw[u], interference, &r.sinr_db);
    out.push_back(r);
  }

  auto& m = mac_[f->sender];
  m.transmitting = false;
  m.queue.pop_front();
  if (!m.queue.empty()) m.backoff = draw_backoff();
  for (VehicleId u = 0; u < mobility_.size(); ++u) update_busy(u, now);

  SimTime keep_from = SimTime::max();
  for (const auto a : active_) keep_from = std::min(keep_from, frame(a)->start);
  std::erase_if(frames_, [&](const FrameEvent& g) {
    return g.end() <= keep_from && std::find(active_.begin(), active_.end(), g.id) == active_.end();
  });
  return out;
}

}  // namespace cpmsim
