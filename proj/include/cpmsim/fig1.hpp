#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/simulation.hpp"

#include <vector>

namespace cpmsim {

/// Scripted toy scenario: an ego vehicle and six objects driving together at
/// 70 km/h within sensor range, every vehicle checking at the same phase.
/// Scenario 1: all six objects appear at t = 0.
/// Scenario 2: two objects appear at t = 0, 0.1 and 0.2 s.
struct Fig1Options {
  int scenario = 1;
  PolicyVariant policy = PolicyVariant::etsi;
  double duration_s = 2.0;
  double speed_mps = 70.0 / 3.6;
  double phase_s = 0.05;
};

struct Fig1Result {
  Fig1Options options;
  std::vector<CpmLogRecord> ego;  // CPMs generated by the ego vehicle
};

/// Throws std::invalid_argument for a scenario other than 1 or 2.
Fig1Result run_fig1(const Fig1Options& options);

/// Human-readable schedule: one line per ego CPM.
std::string format_schedule(const Fig1Result& result);

}  // namespace cpmsim
