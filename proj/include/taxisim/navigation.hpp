#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "taxisim/geometry_map.hpp"

namespace taxisim {

using VehicleId = std::int32_t;

inline constexpr double kDefaultWindowS = 300.0;
inline constexpr double kDefaultGlobalTimeLimitS = 86400.0;

// One vehicle's traversal of one road. Positions are fractions of road length.
struct TrafficTimeRecord {
  VehicleId vehicle = 0;
  RoadId road = 0;
  double starting_position = 0.0;
  double current_position = 0.0;
  double ending_position = 0.0;
  double starting_time = 0.0;
  std::optional<double> ending_time;  // unset while the record is open

  bool open() const { return !ending_time.has_value(); }
};

// Full-road-equivalent traversal time implied by a record, if any.
// `global_time_limit_s` only matters for a clock that wrapped around.
std::optional<double> get_traffic_time(const TrafficTimeRecord& record, double now_s,
                                       double global_time_limit_s = kDefaultGlobalTimeLimitS);

// Free-flow traversal time length / limit, in seconds.
double min_traffic_time(const Road& road);

class RoadTrafficStats {
 public:
  // Closed records in closing order (non-decreasing ending_time).
  std::deque<TrafficTimeRecord> closed;
  // Open records keyed by vehicle.
  std::map<VehicleId, TrafficTimeRecord> open;

  // Drops closed records with ending_time < now - window.
  void prune(double now_s, double window_s);
  bool empty() const { return closed.empty() && open.empty(); }
};

// max(mean of defined record times, free-flow time); free-flow time when no
// record contributes.
double average_traffic_time(const RoadTrafficStats& stats, const Road& road, double now_s,
                            double global_time_limit_s = kDefaultGlobalTimeLimitS);

// Per-road record store with the open/update/close lifecycle.
class TrafficRecordStore {
 public:
  TrafficRecordStore() = default;
  TrafficRecordStore(std::size_t road_count, double window_s,
                     double global_time_limit_s = kDefaultGlobalTimeLimitS);

  // Returns false (and leaves the store unchanged) for a duplicate open.
  bool open_record(VehicleId vehicle, RoadId road, double fraction, double now_s);
  void update_record(VehicleId vehicle, RoadId road, double fraction);
  void close_record(VehicleId vehicle, RoadId road, double fraction, double now_s);
  void prune(double now_s);

  const RoadTrafficStats& stats(RoadId road) const { return roads_.at(static_cast<std::size_t>(road)); }
  double average_traffic_time(const Road& road, double now_s) const;
  // Weight snapshot for every road of `network`.
  std::vector<double> snapshot_weights(const RoadNetwork& network, double now_s) const;
  double window_s() const { return window_s_; }

 private:
  std::vector<RoadTrafficStats> roads_;
  double window_s_ = kDefaultWindowS;
  double global_time_limit_s_ = kDefaultGlobalTimeLimitS;
};

struct Route {
  std::vector<RoadId> roads;
  double cost_s = 0.0;
};

// Dijkstra over intersections with one weight per road. The first road costs
// (1 - origin fraction) x weight, the last road destination fraction x weight.
// Throws NoRouteError when the destination is unreachable.
Route shortest_route(const RoadNetwork& network, std::span<const double> weights,
                     const RoadPosition& origin, const RoadPosition& destination);

}  // namespace taxisim
