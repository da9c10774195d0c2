#pragma once

#include "cpmsim/config.hpp"
#include "cpmsim/types.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <span>
#include <vector>

namespace cpmsim {

using Box2 = Eigen::AlignedBox2d;

/// True iff the segment [a, b] passes through the open interior of `box`.
/// Grazing an edge or a corner does not count.
template <typename Scalar>
bool segment_intersects_box(const Point2<Scalar>& a, const Point2<Scalar>& b,
                            const Eigen::AlignedBox<Scalar, 2>& box) {
  Scalar t0 = 0, t1 = 1;
  const Point2<Scalar> d = b - a;
  for (int k = 0; k < 2; ++k) {
    if (d[k] == Scalar(0)) {
      if (a[k] <= box.min()[k] || a[k] >= box.max()[k]) return false;
      continue;
    }
    Scalar ta = (box.min()[k] - a[k]) / d[k];
    Scalar tb = (box.max()[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  const Point2<Scalar> mid = a + d * ((t0 + t1) / Scalar(2));
  return (mid.array() > box.min().array()).all() && (mid.array() < box.max().array()).all();
}

/// Street lattice of a Manhattan layout. Street i (vertical) has its centreline
/// at x = i * (block_width + street_width); horizontal streets likewise in y.
/// The perimeter streets are part of the lattice.
struct StreetGrid {
  int blocks_x = 0;
  int blocks_y = 0;
  double block_width = 0.0;
  double block_height = 0.0;
  double street_width = 0.0;

  static StreetGrid from(const ManhattanConfig& m) {
    return {m.blocks_x, m.blocks_y, m.block_width_m, m.block_height_m,
            m.lanes_per_street * m.lane_width_m};
  }

  double pitch_x() const { return block_width + street_width; }
  double pitch_y() const { return block_height + street_width; }
  double street_x(int i) const { return i * pitch_x(); }
  double street_y(int j) const { return j * pitch_y(); }
  double width() const { return street_x(blocks_x); }
  double height() const { return street_y(blocks_y); }

  Box2 block(int i, int j) const {
    const double h = street_width / 2;
    return Box2(Vec2(street_x(i) + h, street_y(j) + h),
                Vec2(street_x(i + 1) - h, street_y(j + 1) - h));
  }

  /// Total centreline length of all streets, metres.
  double total_street_length() const {
    return (blocks_x + 1) * height() + (blocks_y + 1) * width();
  }
};

/// Scenario geometry: obstacles and the distance convention. Highways are
/// closed rings (periodic in x) so wrap-around traffic never meets an edge.
class Geometry {
 public:
  static Geometry open() { return Geometry{}; }

  static Geometry ring(double length) {
    Geometry g;
    g.period_ = length;
    return g;
  }

  static Geometry manhattan(const StreetGrid& grid) {
    Geometry g;
    for (int j = 0; j < grid.blocks_y; ++j)
      for (int i = 0; i < grid.blocks_x; ++i) g.buildings_.push_back(grid.block(i, j));
    g.grid_ = grid;
    return g;
  }

  /// `to - from`, using the minimum image along x on a ring.
  Vec2 displacement(const Vec2& from, const Vec2& to) const {
    Vec2 d = to - from;
    if (period_ > 0.0) d.x() -= period_ * std::round(d.x() / period_);
    return d;
  }

  double distance(const Vec2& a, const Vec2& b) const { return displacement(a, b).norm(); }

  bool line_of_sight(const Vec2& a, const Vec2& b) const {
    return std::none_of(buildings_.begin(), buildings_.end(),
                        [&](const Box2& box) { return segment_intersects_box(a, b, box); });
  }

  /// Maps a position back into [0, period) on a ring.
  Vec2 wrap(Vec2 p) const {
    if (period_ > 0.0) {
      p.x() = std::fmod(p.x(), period_);
      if (p.x() < 0.0) p.x() += period_;
    }
    return p;
  }

  std::span<const Box2> buildings() const { return buildings_; }
  double period() const { return period_; }
  bool has_grid() const { return !buildings_.empty(); }
  const StreetGrid& grid() const { return grid_; }

 private:
  Geometry() = default;

  std::vector<Box2> buildings_;
  double period_ = 0.0;
  StreetGrid grid_{};
};

/// Area in which statistics are collected.
struct StatsRegion {
  Box2 box;
  bool contains(const Vec2& p) const {
    return (p.array() >= box.min().array()).all() && (p.array() <= box.max().array()).all();
  }
};

StatsRegion make_stats_region(const ScenarioConfig& config);

}  // namespace cpmsim
