#include "cpmsim/config.hpp"

#include "cpmsim/random.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace cpmsim {

std::string_view to_string(Layout layout) {
  switch (layout) {
    case Layout::highway: return "highway";
    case Layout::manhattan: return "manhattan";
    case Layout::trace: return "trace";
  }
  return "?";
}

std::string_view to_string(PolicyVariant variant) {
  return variant == PolicyVariant::etsi ? "etsi" : "look_ahead";
}

PolicyVariant parse_policy(std::string_view name) {
  if (name == "etsi") return PolicyVariant::etsi;
  if (name == "look_ahead" || name == "look-ahead") return PolicyVariant::look_ahead;
  throw ConfigValidationError("cpm.policy", "unknown policy '" + std::string(name) +
                                                "' (expected etsi or look_ahead)");
}

namespace {

Layout parse_layout(const std::string& name) {
  if (name == "highway") return Layout::highway;
  if (name == "manhattan") return Layout::manhattan;
  if (name == "trace") return Layout::trace;
  throw ConfigValidationError("scenario.layout", "unknown layout '" + name + "'");
}

int line_of(const YAML::Node& node) { return node.Mark().is_null() ? 0 : node.Mark().line + 1; }

// Reads the keys of one top-level section and rejects the ones nobody asked for.
class Section {
 public:
  Section(const YAML::Node& root, std::string name) : name_(std::move(name)) {
    if (root[name_]) {
      node_ = root[name_];
      if (!node_.IsMap() && !node_.IsNull())
        throw ConfigParseError("section '" + name_ + "' must be a mapping", line_of(node_));
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (!node_ || !node_.IsMap() || !node_[key]) return;
    const YAML::Node value = node_[key];
    try {
      out = value.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigParseError(name_ + "." + key + ": cannot convert value '" +
                                 (value.IsScalar() ? value.Scalar() : std::string("<non-scalar>")) +
                                 "'",
                             line_of(value));
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    T tmp{};
    known_.insert(key);
    if (!node_ || !node_.IsMap() || !node_[key]) return;
    get(key, tmp);
    out = tmp;
  }

  // Speeds accept `<base>_kmh` or `<base>_mps`; conversion happens here only.
  void get_speed(const std::string& base, double& out_mps) {
    std::optional<double> kmh, mps;
    get(base + "_kmh", kmh);
    get(base + "_mps", mps);
    if (kmh && mps)
      throw ConfigValidationError(name_ + "." + base, "give either _kmh or _mps, not both");
    if (kmh) out_mps = *kmh / 3.6;
    if (mps) out_mps = *mps;
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.contains(key))
        throw ConfigParseError("unknown key '" + name_ + "." + key + "'", line_of(kv.first));
    }
  }

 private:
  std::string name_;
  YAML::Node node_;
  std::set<std::string> known_;
};

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigValidationError(field, what);
}

}  // namespace

ScenarioConfig parse_config(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::ParserException& e) {
    throw ConfigParseError(e.msg, e.mark.line + 1);
  }
  ScenarioConfig c;
  if (root.IsNull()) {
    validate(c);
    return c;
  }
  if (!root.IsMap()) throw ConfigParseError("configuration root must be a mapping", line_of(root));

  static const std::set<std::string> sections{"scenario", "highway", "manhattan", "trace",
                                              "dynamics", "sensing",  "cpm",       "radio",
                                              "mac",      "metrics"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!sections.contains(key))
      throw ConfigParseError("unknown section '" + key + "'", line_of(kv.first));
  }

  {
    Section s(root, "scenario");
    std::string layout(to_string(c.layout));
    s.get("layout", layout);
    c.layout = parse_layout(layout);
    s.get("seed", c.seed);
    s.get("duration_s", c.duration_s);
    s.get("mobility_step_s", c.mobility_step_s);
    s.finish();
  }
  {
    Section s(root, "highway");
    auto& h = c.highway;
    s.get("length_m", h.length_m);
    s.get("lanes", h.lanes);
    s.get("directions", h.directions);
    s.get("lane_width_m", h.lane_width_m);
    s.get("density_veh_per_km", h.density_veh_per_km);
    s.get_speed("speed_min", h.speed_min_mps);
    s.get_speed("speed_max", h.speed_max_mps);
    s.get("speed_jitter", h.speed_jitter);
    s.get("stats_x_min_m", h.stats_x_min_m);
    s.get("stats_x_max_m", h.stats_x_max_m);
    s.finish();
  }
  {
    Section s(root, "manhattan");
    auto& m = c.manhattan;
    s.get("blocks_x", m.blocks_x);
    s.get("blocks_y", m.blocks_y);
    s.get("block_width_m", m.block_width_m);
    s.get("block_height_m", m.block_height_m);
    s.get("lanes_per_street", m.lanes_per_street);
    s.get("lane_width_m", m.lane_width_m);
    s.get("density_veh_per_km", m.density_veh_per_km);
    s.get_speed("speed_min", m.speed_min_mps);
    s.get_speed("speed_max", m.speed_max_mps);
    s.get_speed("turn_speed", m.turn_speed_mps);
    std::vector<double> turns(m.turn_probabilities.begin(), m.turn_probabilities.end());
    s.get("turn_probabilities", turns);
    require(turns.size() == 3, "manhattan.turn_probabilities",
            "expected three values (left, straight, right)");
    std::copy(turns.begin(), turns.end(), m.turn_probabilities.begin());
    s.get("stats_blocks_x", m.stats_blocks_x);
    s.get("stats_blocks_y", m.stats_blocks_y);
    s.finish();
  }
  {
    Section s(root, "trace");
    s.get("path", c.trace.path);
    s.finish();
  }
  {
    Section s(root, "dynamics");
    auto& d = c.dynamics;
    s.get("vehicle_length_m", d.vehicle_length_m);
    s.get("headway_s", d.headway_s);
    s.get("max_accel_mps2", d.max_accel_mps2);
    s.get("comfort_decel_mps2", d.comfort_decel_mps2);
    s.get("max_decel_mps2", d.max_decel_mps2);
    s.finish();
  }
  {
    Section s(root, "sensing");
    auto& d = c.sensing;
    s.get("range_m", d.range_m);
    s.get("fov_deg", d.fov_deg);
    s.get("position_noise_m", d.position_noise_m);
    s.get("vehicle_occlusion", d.vehicle_occlusion);
    s.get("vehicle_radius_m", d.vehicle_radius_m);
    s.finish();
  }
  {
    Section s(root, "cpm");
    auto& p = c.cpm;
    std::string policy(to_string(p.policy));
    s.get("policy", policy);
    p.policy = parse_policy(policy);
    s.get("t_gen_cpm_s", p.t_gen_cpm_s);
    s.get("position_threshold_m", p.position_threshold_m);
    s.get("speed_threshold_mps", p.speed_threshold_mps);
    s.get("time_threshold_s", p.time_threshold_s);
    s.get("record_grace_s", p.record_grace_s);
    s.get("lower_layer_bytes", p.lower_layer_bytes);
    s.get("base_container_bytes", p.base_container_bytes);
    s.get("sensor_container_bytes", p.sensor_container_bytes);
    s.get("object_container_bytes", p.object_container_bytes);
    s.get("sensors_per_vehicle", p.sensors_per_vehicle);
    s.get("max_objects", p.max_objects);
    s.finish();
  }
  {
    Section s(root, "radio");
    auto& r = c.radio;
    s.get("tx_power_dbm", r.tx_power_dbm);
    s.get("sensing_threshold_dbm", r.sensing_threshold_dbm);
    s.get("sensitivity_dbm", r.sensitivity_dbm);
    s.get("decode_threshold_db", r.decode_threshold_db);
    s.get("noise_figure_db", r.noise_figure_db);
    s.get("data_rate_bps", r.data_rate_bps);
    s.get("bandwidth_hz", r.bandwidth_hz);
    s.get("carrier_hz", r.carrier_hz);
    s.get("antenna_height_m", r.antenna_height_m);
    s.get("shadowing_los_db", r.shadowing_los_db);
    s.get("shadowing_nlos_db", r.shadowing_nlos_db);
    s.get("shadowing_coherence_s", r.shadowing_coherence_s);
    s.finish();
  }
  {
    Section s(root, "mac");
    s.get("aifs_us", c.mac.aifs_us);
    s.get("slot_us", c.mac.slot_us);
    s.get("contention_window", c.mac.contention_window);
    s.get("preamble_us", c.mac.preamble_us);
    s.finish();
  }
  {
    Section s(root, "metrics");
    s.get("bin_width_m", c.metrics.bin_width_m);
    s.get("max_distance_m", c.metrics.max_distance_m);
    s.get("cbr_window_s", c.metrics.cbr_window_s);
    s.get("warmup_s", c.metrics.warmup_s);
    s.finish();
  }

  validate(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot read configuration file '" + path.string() + "'", 0);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ScenarioConfig& c) {
  require(c.duration_s > 0.0, "scenario.duration_s", "must be > 0");
  require(c.mobility_step_s > 0.0 && c.mobility_step_s <= 1.0, "scenario.mobility_step_s",
          "must be in (0, 1]");

  const auto& p = c.cpm;
  require(p.t_gen_cpm_s >= 0.1 - 1e-12 && p.t_gen_cpm_s <= 1.0 + 1e-12, "cpm.t_gen_cpm_s",
          "must lie in [0.1, 1.0] s");
  require(p.position_threshold_m > 0.0, "cpm.position_threshold_m", "must be > 0");
  require(p.speed_threshold_mps > 0.0, "cpm.speed_threshold_mps", "must be > 0");
  require(p.time_threshold_s > 0.0, "cpm.time_threshold_s", "must be > 0");
  require(p.record_grace_s >= 0.0, "cpm.record_grace_s", "must be >= 0");
  require(p.max_objects >= 1 && p.max_objects <= 128, "cpm.max_objects", "must lie in [1, 128]");
  require(p.lower_layer_bytes >= 0 && p.base_container_bytes >= 0 &&
              p.sensor_container_bytes >= 0 && p.object_container_bytes > 0,
          "cpm.object_container_bytes", "container sizes must be non-negative");

  const auto& h = c.highway;
  require(h.length_m > 0.0, "highway.length_m", "must be > 0");
  require(h.lanes >= 1, "highway.lanes", "must be >= 1");
  require(h.directions == 1 || h.directions == 2, "highway.directions", "must be 1 or 2");
  require(h.lanes % h.directions == 0, "highway.lanes", "must be divisible by directions");
  require(h.density_veh_per_km >= 0.0, "highway.density_veh_per_km", "must be >= 0");
  require(h.speed_min_mps >= 0.0 && h.speed_min_mps <= h.speed_max_mps, "highway.speed_min",
          "need 0 <= speed_min <= speed_max");
  require(h.speed_jitter >= 0.0 && h.speed_jitter < 1.0, "highway.speed_jitter",
          "must lie in [0, 1)");

  const auto& m = c.manhattan;
  require(m.blocks_x >= 1 && m.blocks_y >= 1, "manhattan.blocks_x", "need at least 1x1 blocks");
  require(m.block_width_m > 0.0 && m.block_height_m > 0.0, "manhattan.block_width_m",
          "must be > 0");
  require(m.lanes_per_street >= 2 && m.lanes_per_street % 2 == 0, "manhattan.lanes_per_street",
          "must be a positive even number");
  require(m.density_veh_per_km >= 0.0, "manhattan.density_veh_per_km", "must be >= 0");
  require(m.speed_min_mps > 0.0 && m.speed_min_mps <= m.speed_max_mps, "manhattan.speed_min",
          "need 0 < speed_min <= speed_max");
  require(m.turn_speed_mps > 0.0, "manhattan.turn_speed", "must be > 0");
  double turn_sum = 0.0;
  for (double q : m.turn_probabilities) {
    require(q >= 0.0, "manhattan.turn_probabilities", "must be non-negative");
    turn_sum += q;
  }
  require(std::abs(turn_sum - 1.0) < 1e-9, "manhattan.turn_probabilities", "must sum to 1");
  require(m.stats_blocks_x >= 1 && m.stats_blocks_y >= 1, "manhattan.stats_blocks_x",
          "must be >= 1");

  if (c.layout == Layout::trace)
    require(!c.trace.path.empty(), "trace.path", "required for layout 'trace'");

  const auto& d = c.dynamics;
  require(d.vehicle_length_m > 0.0, "dynamics.vehicle_length_m", "must be > 0");
  require(d.headway_s >= 0.0, "dynamics.headway_s", "must be >= 0");
  require(d.max_accel_mps2 > 0.0, "dynamics.max_accel_mps2", "must be > 0");
  require(d.comfort_decel_mps2 > 0.0 && d.comfort_decel_mps2 <= d.max_decel_mps2,
          "dynamics.comfort_decel_mps2", "need 0 < comfort_decel <= max_decel");

  const auto& s = c.sensing;
  require(s.range_m > 0.0, "sensing.range_m", "must be > 0");
  require(s.fov_deg > 0.0 && s.fov_deg <= 360.0, "sensing.fov_deg", "must lie in (0, 360]");
  require(s.position_noise_m >= 0.0, "sensing.position_noise_m", "must be >= 0");

  const auto& r = c.radio;
  require(r.data_rate_bps > 0.0, "radio.data_rate_bps", "must be > 0");
  require(r.bandwidth_hz > 0.0, "radio.bandwidth_hz", "must be > 0");
  require(r.carrier_hz > 0.0, "radio.carrier_hz", "must be > 0");
  require(r.antenna_height_m > 1.0, "radio.antenna_height_m",
          "must exceed the 1 m environment height");
  require(r.shadowing_coherence_s > 0.0, "radio.shadowing_coherence_s", "must be > 0");
  require(r.shadowing_los_db >= 0.0 && r.shadowing_nlos_db >= 0.0, "radio.shadowing_los_db",
          "must be >= 0");

  require(c.mac.slot_us > 0.0 && c.mac.aifs_us >= 0.0 && c.mac.preamble_us >= 0.0, "mac.slot_us",
          "timings must be non-negative, slot > 0");
  require(c.mac.contention_window >= 0, "mac.contention_window", "must be >= 0");

  require(c.metrics.bin_width_m > 0.0, "metrics.bin_width_m", "must be > 0");
  require(c.metrics.max_distance_m > 0.0, "metrics.max_distance_m", "must be > 0");
  require(c.metrics.cbr_window_s > 0.0, "metrics.cbr_window_s", "must be > 0");
  require(c.metrics.warmup_s >= 0.0 && c.metrics.warmup_s < c.duration_s, "metrics.warmup_s",
          "must lie in [0, duration)");
}

std::string to_yaml(const ScenarioConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "layout" << YAML::Value << std::string(to_string(c.layout));
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "duration_s" << YAML::Value << c.duration_s;
  out << YAML::Key << "mobility_step_s" << YAML::Value << c.mobility_step_s;
  out << YAML::EndMap;

  const auto& h = c.highway;
  out << YAML::Key << "highway" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "length_m" << YAML::Value << h.length_m;
  out << YAML::Key << "lanes" << YAML::Value << h.lanes;
  out << YAML::Key << "directions" << YAML::Value << h.directions;
  out << YAML::Key << "lane_width_m" << YAML::Value << h.lane_width_m;
  out << YAML::Key << "density_veh_per_km" << YAML::Value << h.density_veh_per_km;
  out << YAML::Key << "speed_min_mps" << YAML::Value << h.speed_min_mps;
  out << YAML::Key << "speed_max_mps" << YAML::Value << h.speed_max_mps;
  out << YAML::Key << "speed_jitter" << YAML::Value << h.speed_jitter;
  if (h.stats_x_min_m) out << YAML::Key << "stats_x_min_m" << YAML::Value << *h.stats_x_min_m;
  if (h.stats_x_max_m) out << YAML::Key << "stats_x_max_m" << YAML::Value << *h.stats_x_max_m;
  out << YAML::EndMap;

  const auto& m = c.manhattan;
  out << YAML::Key << "manhattan" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "blocks_x" << YAML::Value << m.blocks_x;
  out << YAML::Key << "blocks_y" << YAML::Value << m.blocks_y;
  out << YAML::Key << "block_width_m" << YAML::Value << m.block_width_m;
  out << YAML::Key << "block_height_m" << YAML::Value << m.block_height_m;
  out << YAML::Key << "lanes_per_street" << YAML::Value << m.lanes_per_street;
  out << YAML::Key << "lane_width_m" << YAML::Value << m.lane_width_m;
  out << YAML::Key << "density_veh_per_km" << YAML::Value << m.density_veh_per_km;
  out << YAML::Key << "speed_min_mps" << YAML::Value << m.speed_min_mps;
  out << YAML::Key << "speed_max_mps" << YAML::Value << m.speed_max_mps;
  out << YAML::Key << "turn_speed_mps" << YAML::Value << m.turn_speed_mps;
  out << YAML::Key << "turn_probabilities" << YAML::Value << YAML::Flow << YAML::BeginSeq
      << m.turn_probabilities[0] << m.turn_probabilities[1] << m.turn_probabilities[2]
      << YAML::EndSeq;
  out << YAML::Key << "stats_blocks_x" << YAML::Value << m.stats_blocks_x;
  out << YAML::Key << "stats_blocks_y" << YAML::Value << m.stats_blocks_y;
  out << YAML::EndMap;

  out << YAML::Key << "trace" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "path" << YAML::Value << c.trace.path;
  out << YAML::EndMap;

  const auto& d = c.dynamics;
  out << YAML::Key << "dynamics" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "vehicle_length_m" << YAML::Value << d.vehicle_length_m;
  out << YAML::Key << "headway_s" << YAML::Value << d.headway_s;
  out << YAML::Key << "max_accel_mps2" << YAML::Value << d.max_accel_mps2;
  out << YAML::Key << "comfort_decel_mps2" << YAML::Value << d.comfort_decel_mps2;
  out << YAML::Key << "max_decel_mps2" << YAML::Value << d.max_decel_mps2;
  out << YAML::EndMap;

  const auto& s = c.sensing;
  out << YAML::Key << "sensing" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "range_m" << YAML::Value << s.range_m;
  out << YAML::Key << "fov_deg" << YAML::Value << s.fov_deg;
  out << YAML::Key << "position_noise_m" << YAML::Value << s.position_noise_m;
  out << YAML::Key << "vehicle_occlusion" << YAML::Value << s.vehicle_occlusion;
  out << YAML::Key << "vehicle_radius_m" << YAML::Value << s.vehicle_radius_m;
  out << YAML::EndMap;

  const auto& p = c.cpm;
  out << YAML::Key << "cpm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "policy" << YAML::Value << std::string(to_string(p.policy));
  out << YAML::Key << "t_gen_cpm_s" << YAML::Value << p.t_gen_cpm_s;
  out << YAML::Key << "position_threshold_m" << YAML::Value << p.position_threshold_m;
  out << YAML::Key << "speed_threshold_mps" << YAML::Value << p.speed_threshold_mps;
  out << YAML::Key << "time_threshold_s" << YAML::Value << p.time_threshold_s;
  out << YAML::Key << "record_grace_s" << YAML::Value << p.record_grace_s;
  out << YAML::Key << "lower_layer_bytes" << YAML::Value << p.lower_layer_bytes;
  out << YAML::Key << "base_container_bytes" << YAML::Value << p.base_container_bytes;
  out << YAML::Key << "sensor_container_bytes" << YAML::Value << p.sensor_container_bytes;
  out << YAML::Key << "object_container_bytes" << YAML::Value << p.object_container_bytes;
  out << YAML::Key << "sensors_per_vehicle" << YAML::Value << p.sensors_per_vehicle;
  out << YAML::Key << "max_objects" << YAML::Value << p.max_objects;
  out << YAML::EndMap;

  const auto& r = c.radio;
  out << YAML::Key << "radio" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tx_power_dbm" << YAML::Value << r.tx_power_dbm;
  out << YAML::Key << "sensing_threshold_dbm" << YAML::Value << r.sensing_threshold_dbm;
  out << YAML::Key << "sensitivity_dbm" << YAML::Value << r.sensitivity_dbm;
  out << YAML::Key << "decode_threshold_db" << YAML::Value << r.decode_threshold_db;
  out << YAML::Key << "noise_figure_db" << YAML::Value << r.noise_figure_db;
  out << YAML::Key << "data_rate_bps" << YAML::Value << r.data_rate_bps;
  out << YAML::Key << "bandwidth_hz" << YAML::Value << r.bandwidth_hz;
  out << YAML::Key << "carrier_hz" << YAML::Value << r.carrier_hz;
  out << YAML::Key << "antenna_height_m" << YAML::Value << r.antenna_height_m;
  out << YAML::Key << "shadowing_los_db" << YAML::Value << r.shadowing_los_db;
  out << YAML::Key << "shadowing_nlos_db" << YAML::Value << r.shadowing_nlos_db;
  out << YAML::Key << "shadowing_coherence_s" << YAML::Value << r.shadowing_coherence_s;
  out << YAML::EndMap;

  out << YAML::Key << "mac" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "aifs_us" << YAML::Value << c.mac.aifs_us;
  out << YAML::Key << "slot_us" << YAML::Value << c.mac.slot_us;
  out << YAML::Key << "contention_window" << YAML::Value << c.mac.contention_window;
  out << YAML::Key << "preamble_us" << YAML::Value << c.mac.preamble_us;
  out << YAML::EndMap;

  out << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "bin_width_m" << YAML::Value << c.metrics.bin_width_m;
  out << YAML::Key << "max_distance_m" << YAML::Value << c.metrics.max_distance_m;
  out << YAML::Key << "cbr_window_s" << YAML::Value << c.metrics.cbr_window_s;
  out << YAML::Key << "warmup_s" << YAML::Value << c.metrics.warmup_s;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t config_hash(const ScenarioConfig& config) { return fnv1a(to_yaml(config)); }

}  // namespace cpmsim
