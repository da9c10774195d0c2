#include "cpmsim/mobility.hpp"
#include "cpmsim/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace cpmsim {
namespace {

ScenarioConfig highway(double length, int lanes, int directions, double density) {
  ScenarioConfig c;
  c.layout = Layout::highway;
  c.highway.length_m = length;
  c.highway.lanes = lanes;
  c.highway.directions = directions;
  c.highway.density_veh_per_km = density;
  return c;
}

TEST(Highway, PopulationAndSpeedRange) {
  const auto c = highway(5000, 6, 2, 60);
  HighwayMobility m(c, Rng(1, "mobility"));
  ASSERT_EQ(m.size(), 300u);
  for (int step = 0; step < 50; ++step) {
    for (const auto& v : m.states()) {
      EXPECT_GE(v.speed, 118.0 / 3.6 - 1e-9);
      EXPECT_LE(v.speed, 140.0 / 3.6 + 1e-9);
    }
    m.step();
  }
}

TEST(Highway, SingleLaneSpacingAndSpeed) {
  auto c = highway(1000, 1, 1, 10);
  c.highway.speed_min_mps = c.highway.speed_max_mps = 70.0 / 3.6;
  c.highway.speed_jitter = 0.0;
  HighwayMobility m(c, Rng(7, "mobility"));
  ASSERT_EQ(m.size(), 10u);
  std::vector<double> xs;
  for (const auto& v : m.states()) {
    EXPECT_NEAR(v.speed, 19.444444444444443, 1e-12);
    xs.push_back(v.position.x());
  }
  std::sort(xs.begin(), xs.end());
  for (std::size_t k = 1; k < xs.size(); ++k) EXPECT_NEAR(xs[k] - xs[k - 1], 100.0, 1e-9);
  EXPECT_NEAR(xs.front() + 1000.0 - xs.back(), 100.0, 1e-9);
}

TEST(Highway, ZeroDensityIsEmpty) {
  auto c = highway(1000, 6, 2, 0);
  c.duration_s = 10;
  HighwayMobility m(c, Rng(1, "mobility"));
  EXPECT_EQ(m.size(), 0u);
  const auto r = run(c);
  EXPECT_EQ(r.vehicles, 0u);
  EXPECT_EQ(r.summary.cpm_count, 0u);
  EXPECT_EQ(r.summary.cbr_samples, 0u);
  for (const auto& curve : r.summary.pdr) EXPECT_TRUE(curve.points.empty());
  for (const auto& curve : r.summary.opr) EXPECT_TRUE(curve.points.empty());
}

TEST(Highway, TooDenseIsAConfigurationError) {
  const auto c = highway(100, 1, 1, 200);
  EXPECT_THROW(HighwayMobility(c, Rng(1)), ConfigValidationError);
}

TEST(Highway, DirectionsAndHeadings) {
  const auto c = highway(1000, 6, 2, 60);
  HighwayMobility m(c, Rng(3, "mobility"));
  for (const auto& v : m.states()) {
    if (v.lane < 3)
      EXPECT_EQ(v.heading, 0.0);
    else
      EXPECT_NEAR(v.heading, std::numbers::pi, 1e-15);
  }
}

TEST(Highway, KinematicInvariantsHold) {
  const auto c = highway(1000, 6, 2, 120);
  HighwayMobility m(c, Rng(5, "mobility"));
  const double dt = c.mobility_step_s;
  std::vector<double> prev(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) prev[i] = m.states()[i].speed;
  const StatsRegion region{Box2(Vec2(250, -1e9), Vec2(750, 1e9))};
  for (int step = 0; step < 600; ++step) {
    m.step();
    std::map<int, std::vector<double>> lanes;
    int inside = 0;
    for (const auto& v : m.states()) {
      EXPECT_GE(v.speed, 0.0);
      EXPECT_LE(std::abs(v.speed - prev[v.id]), c.dynamics.max_decel_mps2 * dt + 1e-9);
      prev[v.id] = v.speed;
      lanes[v.lane].push_back(v.position.x());
      if (region.contains(v.position)) ++inside;
    }
    for (auto& [lane, xs] : lanes) {
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); ++k)
        EXPECT_GE(xs[k + 1] - xs[k], c.dynamics.vehicle_length_m) << "lane " << lane;
    }
    // 120 veh/km over a 500 m segment.
    EXPECT_NEAR(inside, 60, 6);
  }
}

ScenarioConfig grid(int bx, int by, double density) {
  ScenarioConfig c;
  c.layout = Layout::manhattan;
  c.manhattan.blocks_x = bx;
  c.manhattan.blocks_y = by;
  c.manhattan.density_veh_per_km = density;
  return c;
}

TEST(Manhattan, PaperLayoutIsValid) {
  const auto c = grid(9, 7, 25);
  EXPECT_NO_THROW(validate(c));
  ManhattanMobility m(c, Rng(1, "mobility"));
  const double km = StreetGrid::from(c.manhattan).total_street_length() / 1000.0;
  EXPECT_NEAR(static_cast<double>(m.size()), 25.0 * km, 20.0);
  const Geometry g = make_geometry(c);
  EXPECT_EQ(g.buildings().size(), 63u);
  for (const auto& v : m.states()) EXPECT_TRUE(g.line_of_sight(v.position, v.position));
}

TEST(Manhattan, VehiclesStayOnStreets) {
  const auto c = grid(3, 3, 25);
  ManhattanMobility m(c, Rng(2, "mobility"));
  const Geometry g = make_geometry(c);
  for (int step = 0; step < 600; ++step) {
    m.step();
    for (const auto& v : m.states())
      for (const auto& b : g.buildings()) EXPECT_FALSE(b.contains(v.position)) << v.id;
  }
}

TEST(Manhattan, StraightOnlyNeverLeavesStreet) {
  auto c = grid(3, 3, 25);
  c.manhattan.turn_probabilities = {0.0, 1.0, 0.0};
  ManhattanMobility m(c, Rng(4, "mobility"));
  std::vector<int> road(m.size());
  for (const auto& v : m.states()) road[v.id] = v.road;
  for (int step = 0; step < 600; ++step) {
    m.step();
    for (const auto& v : m.states()) EXPECT_EQ(v.road, road[v.id]);
  }
}

TEST(Manhattan, LoneVehiclesCruise) {
  // One vehicle on each horizontal perimeter street, none on the vertical ones.
  auto c = grid(1, 1, 1.3);
  c.manhattan.turn_probabilities = {0.0, 1.0, 0.0};
  c.manhattan.speed_min_mps = c.manhattan.speed_max_mps = 70.0 / 3.6;
  ManhattanMobility m(c, Rng(1, "mobility"));
  ASSERT_EQ(m.size(), 2u);
  const double width = m.grid().width();
  std::vector<Vec2> start;
  for (const auto& v : m.states()) start.push_back(v.position);
  for (int k = 0; k < 10; ++k) m.step();
  for (const auto& v : m.states()) {
    EXPECT_EQ(v.position.y(), start[v.id].y());
    const double dx = std::abs(v.position.x() - start[v.id].x());
    EXPECT_NEAR(std::min(dx, width - dx), 19.444444444444443, 1e-6);
  }
}

TEST(Trace, SpeedFromFiniteDifference) {
  std::istringstream in("time_s id x y\n0 5 0 0\n1 5 10 0\n");
  TraceMobility m(parse_trace(in), milliseconds(100));
  ASSERT_EQ(m.size(), 1u);
  ASSERT_TRUE(m.active(0));
  EXPECT_DOUBLE_EQ(m.states()[0].speed, 10.0);
  for (int k = 0; k < 5; ++k) m.step();
  EXPECT_NEAR(m.states()[0].position.x(), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.states()[0].speed, 10.0);
}

TEST(Trace, ExplicitSpeedAndHeadingAreUsed) {
  std::istringstream in("0 1 0 0 3.0 1.5\n2 1 0 8 5.0 1.5\n");
  TraceMobility m(parse_trace(in), milliseconds(500));
  m.step();
  EXPECT_DOUBLE_EQ(m.states()[0].speed, 3.5);
  EXPECT_DOUBLE_EQ(m.states()[0].acceleration, 1.0);
  EXPECT_DOUBLE_EQ(m.states()[0].heading, 1.5);
}

TEST(Trace, EmptyTraceIsEmptyScenario) {
  std::istringstream in("# nothing here\n\n");
  const auto data = parse_trace(in);
  EXPECT_TRUE(data.vehicles.empty());
}

TEST(Trace, VehiclesOutsideTheirSpanAreInactive) {
  std::istringstream in("1 3 0 0\n2 3 1 0\n");
  TraceMobility m(parse_trace(in), milliseconds(500));
  EXPECT_FALSE(m.active(0));
  m.step();
  m.step();
  EXPECT_TRUE(m.active(0));
  for (int k = 0; k < 3; ++k) m.step();
  EXPECT_FALSE(m.active(0));
}

TEST(Trace, DecreasingTimestampNamesVehicleAndLine) {
  std::istringstream in("0 9 0 0\n1 9 1 0\n0.5 9 2 0\n");
  try {
    parse_trace(in);
    FAIL() << "expected a trace error";
  } catch (const TraceError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("vehicle 9"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Trace, SchemaMismatchIsRejected) {
  std::istringstream few("0 1 2\n");
  EXPECT_THROW(parse_trace(few), TraceError);
  std::istringstream bad("0 1 2 x\n");
  EXPECT_THROW(parse_trace(bad), TraceError);
}

}  // namespace
}  // namespace cpmsim
