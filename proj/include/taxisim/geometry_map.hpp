#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace taxisim {

using IntersectionId = std::int32_t;
using RoadId = std::int32_t;
using Rng = std::mt19937_64;

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kDefaultSpeedLimitKmh = 60.0;
inline constexpr double kDefaultSnapToleranceKm = 0.005;
inline constexpr double kDefaultMajorLengthKm = 0.2;
inline constexpr int kLanesPerRoad = 2;

// Degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Kilometres east (x) and north (y) of the projection anchor.
using ProjectedPoint = Eigen::Vector2d;
using Polyline = std::vector<ProjectedPoint>;
using GeoPolyline = std::vector<GeoPoint>;

// Local equirectangular projection anchored at a reference point.
class Projection {
 public:
  // Throws MapBoundsError when the anchor cannot yield an invertible mapping.
  explicit Projection(GeoPoint anchor);

  // Anchors at the centroid of every vertex; throws MapBoundsError on
  // out-of-range coordinates or an empty input.
  static Projection fit(std::span<const GeoPolyline> records);

  ProjectedPoint forward(const GeoPoint& p) const;
  GeoPoint inverse(const ProjectedPoint& p) const;
  const GeoPoint& anchor() const { return anchor_; }

 private:
  GeoPoint anchor_;
  double cos_lat0_;
};

struct Intersection {
  IntersectionId id = 0;
  ProjectedPoint position = ProjectedPoint::Zero();
  std::vector<RoadId> in_roads;   // ascending
  std::vector<RoadId> out_roads;  // ascending
};

struct Road {
  RoadId id = 0;
  IntersectionId from = 0;
  IntersectionId to = 0;
  RoadId twin = 0;
  Polyline polyline;
  double length_km = 0.0;
  double speed_limit_kmh = kDefaultSpeedLimitKmh;
  bool is_major = false;
  // Fractions of the road length, each in [0.1, 0.9].
  std::vector<double> source_points;
  std::vector<double> sink_points;

  static constexpr int lane_count = kLanesPerRoad;
};

struct RoadPosition {
  RoadId road = 0;
  double fraction = 0.0;

  bool operator==(const RoadPosition&) const = default;
};

class RoadNetwork {
 public:
  std::vector<Intersection> intersections;
  std::vector<Road> roads;

  bool empty() const { return roads.empty(); }
  const Road& road(RoadId id) const { return roads.at(static_cast<std::size_t>(id)); }
  Road& road(RoadId id) { return roads.at(static_cast<std::size_t>(id)); }
  const Intersection& intersection(IntersectionId id) const {
    return intersections.at(static_cast<std::size_t>(id));
  }
  const std::vector<RoadId>& out_roads(IntersectionId id) const { return intersection(id).out_roads; }

  // Every source / sink point in ascending (road id, insertion) order.
  std::vector<RoadPosition> source_points() const;
  std::vector<RoadPosition> sink_points() const;

  ProjectedPoint point_at(const RoadPosition& pos) const;
};

double polyline_length(const Polyline& line);
// Point at `distance_km` along the line, clamped to its ends.
ProjectedPoint point_along(const Polyline& line, double distance_km);

// Snaps record endpoints within `snap_tolerance_km` of each other (transitively)
// into intersections placed at the mean of the merged endpoints, and emits two
// twin directed roads per record that joins two distinct intersections.
RoadNetwork build_network(std::span<const Polyline> records,
                          double snap_tolerance_km = kDefaultSnapToleranceKm);

// Marks roads longer than `threshold_km` as major, then propagates the flag to
// roads whose both endpoint intersections touch another major road, to fixpoint.
// Returns the number of propagation passes that changed something.
int mark_major_roads(RoadNetwork& network, double threshold_km = kDefaultMajorLengthKm);

void place_source_sink_points(RoadNetwork& network, Rng& rng);

// Jittered rows x cols lattice; roads run between horizontal and vertical
// neighbours. Applies major marking and source/sink placement.
RoadNetwork generate_synthetic_grid(int rows, int cols, double cell_km, Rng& rng,
                                    double major_threshold_km = kDefaultMajorLengthKm);

// Raw straight-segment records of the same grid, before network construction.
std::vector<Polyline> synthetic_grid_records(int rows, int cols, double cell_km, Rng& rng);

}  // namespace taxisim
