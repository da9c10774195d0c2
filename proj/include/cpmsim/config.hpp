#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cpmsim {

enum class Layout { highway, manhattan, trace };
enum class PolicyVariant { etsi, look_ahead };

std::string_view to_string(Layout layout);
std::string_view to_string(PolicyVariant variant);
PolicyVariant parse_policy(std::string_view name);

/// Malformed configuration document. `line` is 1-based, 0 when unknown.
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Well-formed document whose values break a constraint. `field()` is the
/// dotted key, e.g. "cpm.t_gen_cpm_s".
class ConfigValidationError : public std::runtime_error {
 public:
  ConfigValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct HighwayConfig {
  double length_m = 5000.0;
  int lanes = 6;
  int directions = 2;  // lanes are split evenly between directions
  double lane_width_m = 3.5;
  double density_veh_per_km = 60.0;  // all lanes together
  double speed_min_mps = 118.0 / 3.6;
  double speed_max_mps = 140.0 / 3.6;
  double speed_jitter = 0.05;  // per-vehicle relative jitter around the lane speed
  // Statistics segment; unset means the middle 2 km (or the whole road if shorter).
  std::optional<double> stats_x_min_m;
  std::optional<double> stats_x_max_m;
};

struct ManhattanConfig {
  int blocks_x = 9;
  int blocks_y = 7;
  double block_width_m = 433.0;
  double block_height_m = 250.0;
  int lanes_per_street = 4;  // split evenly between the two directions
  double lane_width_m = 3.5;
  double density_veh_per_km = 25.0;  // per km of street, all lanes together
  double speed_min_mps = 60.0 / 3.6;
  double speed_max_mps = 70.0 / 3.6;
  double turn_speed_mps = 25.0 / 3.6;
  std::array<double, 3> turn_probabilities{0.25, 0.5, 0.25};  // left, straight, right
  int stats_blocks_x = 3;
  int stats_blocks_y = 3;
};

struct TraceConfig {
  std::string path;
};

struct DynamicsConfig {
  double vehicle_length_m = 5.0;
  double headway_s = 1.5;
  double max_accel_mps2 = 1.5;
  double comfort_decel_mps2 = 2.5;
  double max_decel_mps2 = 6.0;
};

struct SensingConfig {
  double range_m = 150.0;
  double fov_deg = 360.0;
  double position_noise_m = 0.0;  // Gaussian sigma per axis; 0 disables noise
  bool vehicle_occlusion = false;
  double vehicle_radius_m = 1.0;  // occluder disk radius when occlusion is on
};

struct CpmConfig {
  PolicyVariant policy = PolicyVariant::etsi;
  double t_gen_cpm_s = 0.1;
  double position_threshold_m = 4.0;
  double speed_threshold_mps = 0.5;
  double time_threshold_s = 1.0;
  double record_grace_s = 1.0;
  int lower_layer_bytes = 80;
  int base_container_bytes = 121;
  int sensor_container_bytes = 14;
  int object_container_bytes = 35;
  int sensors_per_vehicle = 1;
  int max_objects = 128;
};

struct RadioConfig {
  double tx_power_dbm = 23.0;
  double sensing_threshold_dbm = -85.0;
  double sensitivity_dbm = -85.0;
  double decode_threshold_db = 8.0;
  double noise_figure_db = 9.0;
  double data_rate_bps = 6e6;
  double bandwidth_hz = 10e6;
  double carrier_hz = 5.9e9;
  double antenna_height_m = 1.5;
  double shadowing_los_db = 3.0;
  double shadowing_nlos_db = 4.0;
  double shadowing_coherence_s = 0.1;  // a link keeps its shadowing sample this long
};

struct MacConfig {
  double aifs_us = 110.0;
  double slot_us = 13.0;
  int contention_window = 15;
  double preamble_us = 40.0;
};

struct MetricsConfig {
  double bin_width_m = 25.0;
  double max_distance_m = 500.0;
  double cbr_window_s = 0.1;
  double warmup_s = 5.0;
};

struct ScenarioConfig {
  Layout layout = Layout::highway;
  std::uint64_t seed = 0;
  double duration_s = 100.0;
  double mobility_step_s = 0.1;
  HighwayConfig highway;
  ManhattanConfig manhattan;
  TraceConfig trace;
  DynamicsConfig dynamics;
  SensingConfig sensing;
  CpmConfig cpm;
  RadioConfig radio;
  MacConfig mac;
  MetricsConfig metrics;
};

/// Parses a YAML configuration document. Omitted keys keep their defaults;
/// unknown keys are rejected. Throws ConfigParseError or ConfigValidationError.
ScenarioConfig parse_config(std::string_view document);

ScenarioConfig load_config(const std::filesystem::path& path);

/// Throws ConfigValidationError naming the first offending field.
void validate(const ScenarioConfig& config);

/// Canonical YAML rendering of every field, defaults included.
std::string to_yaml(const ScenarioConfig& config);

/// FNV-1a of the canonical rendering; recorded in every output file.
std::uint64_t config_hash(const ScenarioConfig& config);

}  // namespace cpmsim
