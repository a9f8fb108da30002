#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taxisim/dispatch.hpp"
#include "taxisim/geometry_map.hpp"
#include "taxisim/idm.hpp"
#include "taxisim/navigation.hpp"

namespace taxisim {

enum class VehicleKind { Car, Taxi, CrashedCar };

std::string_view to_string(VehicleKind kind);

struct Vehicle {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::Car;
  RoadId road = 0;
  int lane = 0;
  double offset_km = 0.0;
  double speed_kmh = 0.0;
  Route route;
  std::size_t route_index = 0;  // position of `road` inside `route.roads`
  RoadPosition destination;
  bool bound_for_crash = false;
  double lane_change_cooldown_s = 0.0;
  bool active = true;

  bool on_final_road() const { return route_index + 1 >= route.roads.size(); }
};

struct TrafficLightController {
  IntersectionId intersection = 0;
  std::vector<RoadId> in_roads;  // ascending; round-robin order
  double phase_duration_s = 15.0;
  std::size_t green_index = 0;
  double next_switch_time_s = 0.0;

  RoadId current_green() const { return in_roads[green_index]; }
};

struct SimClock {
  std::int64_t tick = 0;
  double dt_s = 0.3;
  double global_time_limit_s = kDefaultGlobalTimeLimitS;

  // Derived from the tick count so repeated additions never drift.
  double t() const { return static_cast<double>(tick) * dt_s; }
};

struct CrashEvent {
  RoadId road = 0;
  double fraction = 0.5;
  double time_s = 300.0;
  double reduced_limit_kmh = 10.0;
};

struct SimConfig {
  int cars = 500;
  int taxis = 20;
  double lambda_general = 0.00002;
  double lambda_major = 0.00006;
  double dt_s = 0.3;
  double major_share = 0.8;
  double light_phase_min_s = 15.0;
  double light_phase_max_s = 30.0;
  double reroute_interval_s = 30.0;
  double window_s = kDefaultWindowS;
  double global_time_limit_s = kDefaultGlobalTimeLimitS;
  // A vehicle has arrived once it is this close to its destination.
  double arrival_reach_km = 0.005;
  int arrivals_required = 10;
  IdmParams idm;
  LaneChangeParams lane_change;
  std::optional<CrashEvent> crash;
  DispatchPolicy policy = DispatchPolicy::PeriodicReroute;
};

struct RemovalNote {
  VehicleId vehicle = 0;
  double time_s = 0.0;
  std::string reason;
};

struct WorldCounters {
  std::int64_t initial = 0;
  std::int64_t spawned = 0;
  std::int64_t inserted = 0;  // crashed cars and other direct additions
  std::int64_t removed = 0;
  std::int64_t deferred_spawns = 0;
  // shortest_route calls made for taxis after dispatch.
  std::int64_t taxi_routes_after_dispatch = 0;
};

struct CrashState {
  bool applied = false;
  VehicleId crashed_car = -1;
  double road_time_before_s = 0.0;
  std::optional<double> road_time_after_60s;
};

// Complete simulation state. One World is confined to one thread.
class World {
 public:
  World(RoadNetwork network, SimConfig config, std::uint64_t seed);

  const RoadNetwork& network() const { return network_; }
  const SimConfig& config() const { return config_; }
  const SimClock& clock() const { return clock_; }
  double now() const { return clock_.t(); }

  const std::vector<VehicleId>& active_ids() const { return active_; }
  const Vehicle& vehicle(VehicleId id) const { return vehicles_.at(static_cast<std::size_t>(id)); }
  Vehicle& vehicle(VehicleId id) { return vehicles_.at(static_cast<std::size_t>(id)); }
  std::size_t vehicle_count() const { return active_.size(); }
  std::vector<VehicleId> taxi_ids() const;

  // Vehicles on one lane, ascending offset.
  const std::vector<VehicleId>& lane(RoadId road, int lane) const {
    return lanes_.at(static_cast<std::size_t>(road))[static_cast<std::size_t>(lane)];
  }
  const std::vector<TrafficLightController>& lights() const { return lights_; }
  bool is_green(RoadId road) const;

  const TrafficRecordStore& records() const { return records_; }
  TrafficRecordStore& records() { return records_; }
  const WorldCounters& counters() const { return counters_; }
  const std::vector<RemovalNote>& removal_notes() const { return notes_; }
  const CrashState& crash_state() const { return crash_; }
  const DispatchState& dispatch() const { return dispatch_; }
  DispatchState& dispatch() { return dispatch_; }
  Rng& rng() { return rng_; }

  // Current average traffic time of every road.
  std::vector<double> weights() const { return records_.snapshot_weights(network_, now()); }
  RoadPosition position_of(const Vehicle& v) const;

  // Adds a vehicle at the given spot and counts it as inserted; returns its
  // id. No spacing check.
  VehicleId add_vehicle(VehicleKind kind, RoadId road, int lane, double offset_km, double speed_kmh,
                        double record_time_s);
  void remove_vehicle(VehicleId id, double time_s, const std::string& reason = {});
  // Computes and installs a route; on NoRouteError the vehicle is removed and
  // false returned.
  bool assign_destination(VehicleId id, const RoadPosition& destination, double time_s);
  RoadPosition random_sink();
  // True when no vehicle on the lane sits within `spacing_km` of `offset_km`.
  bool lane_clear(RoadId road, int lane, double offset_km, double spacing_km) const;

  void step();
  void spawn(double time_s);
  void apply_crash(const CrashEvent& crash);

  // Throws std::logic_error naming the first violated invariant.
  void check_invariants() const;

 private:
  struct Front {
    VehicleId id = -1;
    double gap_km = kInfinity;
    bool same_road = false;
  };

  std::vector<VehicleId>& lane_mut(RoadId road, int lane) {
    return lanes_[static_cast<std::size_t>(road)][static_cast<std::size_t>(lane)];
  }
  VehicleId place_vehicle(VehicleKind kind, RoadId road, int lane, double offset_km, double speed_kmh,
                          double record_time_s);
  void insert_in_lane(const Vehicle& v);
  void erase_from_lane(const Vehicle& v);
  std::size_t index_in_lane(const Vehicle& v) const;
  Front sense_front(const Vehicle& v) const;
  double lane_average_speed(RoadId road, int lane, double from_offset_km) const;
  void try_lane_change(Vehicle& v);
  void move_vehicle(Vehicle& v, double now_s);
  void process_arrivals(double now_s);
  void update_lights(double t_s);

  RoadNetwork network_;
  SimConfig config_;
  SimClock clock_;
  Rng rng_;
  std::vector<Vehicle> vehicles_;  // indexed by id; ids are never reused
  std::vector<VehicleId> active_;  // ascending
  std::vector<std::array<std::vector<VehicleId>, kLanesPerRoad>> lanes_;
  std::vector<TrafficLightController> lights_;
  std::vector<std::int32_t> light_of_;  // per intersection, -1 if none
  std::vector<RoadPosition> sources_;
  std::vector<RoadPosition> sinks_;
  TrafficRecordStore records_;
  WorldCounters counters_;
  std::vector<RemovalNote> notes_;
  CrashState crash_;
  DispatchState dispatch_;

  friend World initialize_world(RoadNetwork network, const SimConfig& config, std::uint64_t seed);
};

// Places the initial cars (major_share of them on major roads) and taxis,
// assigns destinations and routes, and arms the traffic lights.
World initialize_world(RoadNetwork network, const SimConfig& config, std::uint64_t seed);

inline void step(World& world) { world.step(); }
inline void spawn(World& world) { world.spawn(world.now()); }
inline void apply_crash(World& world, const CrashEvent& crash) { world.apply_crash(crash); }

}  // namespace taxisim
