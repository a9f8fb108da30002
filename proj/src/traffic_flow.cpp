#include "taxisim/traffic_flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "taxisim/errors.hpp"

namespace taxisim {
namespace {

constexpr double kTimeEps = 1e-9;
// Closest a follower may come to its leader within one step.
constexpr double kMinSeparationKm = 1e-6;
constexpr int kPlacementAttempts = 10000;

void validate(const SimConfig& c, const RoadNetwork& net) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.cars >= 0 && c.taxis >= 0, "vehicle counts must be non-negative");
  require(c.dt_s > 0.0, "dt must be positive");
  require(c.lambda_general >= 0.0 && c.lambda_major >= 0.0, "spawn rates must be non-negative");
  require(c.major_share >= 0.0 && c.major_share <= 1.0, "major_share must lie in [0, 1]");
  require(c.light_phase_min_s > 0.0 && c.light_phase_max_s >= c.light_phase_min_s,
          "light phase range must be positive and ordered");
  require(c.reroute_interval_s > 0.0, "reroute interval must be positive");
  require(c.window_s > 0.0, "traffic-time window must be positive");
  require(c.arrival_reach_km >= 0.0, "arrival reach must be non-negative");
  require(c.idm.time_head_away_s > 0.0 && c.idm.dist_gap_km > 0.0 && c.idm.max_acceleration > 0.0 &&
              c.idm.max_deceleration > 0.0,
          "IDM constants must be positive");
  if (c.crash) {
    if (c.crash->road < 0 || static_cast<std::size_t>(c.crash->road) >= net.roads.size()) {
      throw ConfigError("crash road " + std::to_string(c.crash->road) + " does not exist");
    }
    require(c.crash->fraction > 0.0 && c.crash->fraction < 1.0, "crash fraction must lie in (0, 1)");
    require(c.crash->reduced_limit_kmh > 0.0, "crash speed limit must be positive");
  }
}

}  // namespace

std::string_view to_string(VehicleKind kind) {
  switch (kind) {
    case VehicleKind::Car: return "car";
    case VehicleKind::Taxi: return "taxi";
    case VehicleKind::CrashedCar: return "crashed";
  }
  return "unknown";
}

World::World(RoadNetwork network, SimConfig config, std::uint64_t seed)
    : network_(std::move(network)),
      config_(std::move(config)),
      rng_(seed),
      lanes_(network_.roads.size()),
      light_of_(network_.intersections.size(), -1),
      sources_(network_.source_points()),
      sinks_(network_.sink_points()),
      records_(network_.roads.size(), config_.window_s, config_.global_time_limit_s) {
  validate(config_, network_);
  clock_.dt_s = config_.dt_s;
  clock_.global_time_limit_s = config_.global_time_limit_s;
  dispatch_.policy = config_.policy;

  std::uniform_real_distribution<double> phase(config_.light_phase_min_s, config_.light_phase_max_s);
  for (const Intersection& x : network_.intersections) {
    if (x.in_roads.empty()) continue;
    TrafficLightController light;
    light.intersection = x.id;
    light.in_roads = x.in_roads;
    light.phase_duration_s = phase(rng_);
    light.green_index = std::uniform_int_distribution<std::size_t>(0, x.in_roads.size() - 1)(rng_);
    light.next_switch_time_s = light.phase_duration_s;
    light_of_[static_cast<std::size_t>(x.id)] = static_cast<std::int32_t>(lights_.size());
    lights_.push_back(std::move(light));
  }
}

std::vector<VehicleId> World::taxi_ids() const {
  std::vector<VehicleId> out;
  for (VehicleId id : active_)
    if (vehicle(id).kind == VehicleKind::Taxi) out.push_back(id);
  return out;
}

bool World::is_green(RoadId road) const {
  const auto light = light_of_[static_cast<std::size_t>(network_.road(road).to)];
  return light >= 0 && lights_[static_cast<std::size_t>(light)].current_green() == road;
}

RoadPosition World::position_of(const Vehicle& v) const {
  const double len = network_.road(v.road).length_km;
  return {v.road, std::clamp(v.offset_km / len, 0.0, 1.0)};
}

void World::insert_in_lane(const Vehicle& v) {
  auto& lane = lane_mut(v.road, v.lane);
  auto it = std::upper_bound(lane.begin(), lane.end(), v.offset_km,
                             [&](double off, VehicleId id) { return off < vehicle(id).offset_km; });
  lane.insert(it, v.id);
}

std::size_t World::index_in_lane(const Vehicle& v) const {
  const auto& lane = this->lane(v.road, v.lane);
  auto it = std::lower_bound(lane.begin(), lane.end(), v.offset_km,
                             [&](VehicleId id, double off) { return vehicle(id).offset_km < off; });
  while (it != lane.end() && *it != v.id) ++it;
  if (it == lane.end()) throw std::logic_error("vehicle " + std::to_string(v.id) + " missing from its lane");
  return static_cast<std::size_t>(it - lane.begin());
}

void World::erase_from_lane(const Vehicle& v) {
  auto& lane = lane_mut(v.road, v.lane);
  lane.erase(lane.begin() + static_cast<std::ptrdiff_t>(index_in_lane(v)));
}

bool World::lane_clear(RoadId road, int lane_index, double offset_km, double spacing_km) const {
  const auto& lane = this->lane(road, lane_index);
  auto it = std::lower_bound(lane.begin(), lane.end(), offset_km - spacing_km,
                             [&](VehicleId id, double off) { return vehicle(id).offset_km < off; });
  return it == lane.end() || vehicle(*it).offset_km > offset_km + spacing_km;
}

VehicleId World::add_vehicle(VehicleKind kind, RoadId road, int lane, double offset_km, double speed_kmh,
                             double record_time_s) {
  ++counters_.inserted;
  return place_vehicle(kind, road, lane, offset_km, speed_kmh, record_time_s);
}

VehicleId World::place_vehicle(VehicleKind kind, RoadId road, int lane, double offset_km, double speed_kmh,
                               double record_time_s) {
  Vehicle v;
  v.id = static_cast<VehicleId>(vehicles_.size());
  v.kind = kind;
  v.road = road;
  v.lane = lane;
  v.offset_km = std::clamp(offset_km, 0.0, network_.road(road).length_km);
  v.speed_kmh = speed_kmh;
  v.route.roads = {road};
  v.destination = position_of(v);
  vehicles_.push_back(v);
  active_.push_back(v.id);
  insert_in_lane(vehicles_.back());
  records_.open_record(v.id, road, position_of(v).fraction, record_time_s);
  return v.id;
}

void World::remove_vehicle(VehicleId id, double time_s, const std::string& reason) {
  Vehicle& v = vehicle(id);
  if (!v.active) return;
  records_.close_record(id, v.road, position_of(v).fraction, time_s);
  erase_from_lane(v);
  v.active = false;
  active_.erase(std::lower_bound(active_.begin(), active_.end(), id));
  ++counters_.removed;
  if (!reason.empty()) notes_.push_back({id, time_s, reason});
}

RoadPosition World::random_sink() {
  if (sinks_.empty()) throw ConfigError("network has no sink points");
  return sinks_[std::uniform_int_distribution<std::size_t>(0, sinks_.size() - 1)(rng_)];
}

bool World::assign_destination(VehicleId id, const RoadPosition& destination, double time_s) {
  Route route;
  try {
    const auto w = records_.snapshot_weights(network_, time_s);
    route = shortest_route(network_, w, position_of(vehicle(id)), destination);
  } catch (const NoRouteError& e) {
    remove_vehicle(id, time_s, std::string("no route: ") + e.what());
    return false;
  }
  Vehicle& v = vehicle(id);
  if (v.kind == VehicleKind::Taxi && dispatch_.decision) ++counters_.taxi_routes_after_dispatch;
  v.route = std::move(route);
  v.route_index = 0;
  v.destination = destination;
  return true;
}

World::Front World::sense_front(const Vehicle& v) const {
  Front f;
  const auto& lane = this->lane(v.road, v.lane);
  const std::size_t i = index_in_lane(v);
  if (i + 1 < lane.size()) {
    f.id = lane[i + 1];
    f.gap_km = vehicle(f.id).offset_km - v.offset_km;
    f.same_road = true;
    return f;
  }
  if (!v.on_final_road() && is_green(v.road)) {
    const RoadId next = v.route.roads[v.route_index + 1];
    const auto& ahead = this->lane(next, v.lane);
    if (!ahead.empty()) {
      f.id = ahead.front();
      f.gap_km = network_.road(v.road).length_km - v.offset_km + vehicle(f.id).offset_km;
    }
  }
  return f;
}

double World::lane_average_speed(RoadId road, int lane_index, double from_offset_km) const {
  const auto& lane = this->lane(road, lane_index);
  const double until = from_offset_km + config_.lane_change.lookahead_km;
  auto it = std::upper_bound(lane.begin(), lane.end(), from_offset_km,
                             [&](double off, VehicleId id) { return off < vehicle(id).offset_km; });
  double sum = 0.0;
  int n = 0;
  for (; it != lane.end() && vehicle(*it).offset_km <= until; ++it) {
    sum += vehicle(*it).speed_kmh;
    ++n;
  }
  if (n == 0) return network_.road(road).speed_limit_kmh;
  return sum / n;
}

void World::try_lane_change(Vehicle& v) {
  const int other = 1 - v.lane;
  const double own_avg = lane_average_speed(v.road, v.lane, v.offset_km);
  const double other_avg = lane_average_speed(v.road, other, v.offset_km);

  const auto& target = this->lane(v.road, other);
  auto it = std::lower_bound(target.begin(), target.end(), v.offset_km,
                             [&](VehicleId id, double off) { return vehicle(id).offset_km < off; });
  const double ahead = it == target.end() ? kInfinity : vehicle(*it).offset_km - v.offset_km;
  const double behind = it == target.begin() ? kInfinity : v.offset_km - vehicle(*std::prev(it)).offset_km;

  if (lane_change_decision(own_avg, other_avg, true, ahead, behind, v.lane_change_cooldown_s,
                           config_.lane_change) == LaneDecision::Switch) {
    erase_from_lane(v);
    v.lane = other;
    insert_in_lane(v);
    v.lane_change_cooldown_s = config_.lane_change.cooldown_s;
  }
}

void World::move_vehicle(Vehicle& v, double now_s) {
  const double dt = clock_.dt_s;
  v.lane_change_cooldown_s = std::max(0.0, v.lane_change_cooldown_s - dt);

  Front front = sense_front(v);
  if (front.same_road && v.lane_change_cooldown_s <= 0.0) {
    const int lane_before = v.lane;
    try_lane_change(v);
    if (v.lane != lane_before) front = sense_front(v);
  }

  const Road& road = network_.road(v.road);
  const bool final_road = v.on_final_road();
  const bool green = is_green(v.road);
  const double to_end = road.length_km - v.offset_km;

  DriverContext ctx;
  ctx.speed_kmh = v.speed_kmh;
  ctx.lane_speed_limit_kmh = road.speed_limit_kmh;
  ctx.front_gap_km = front.gap_km;
  ctx.delta_speed_kmh = front.id >= 0 ? v.speed_kmh - vehicle(front.id).speed_kmh : 0.0;
  ctx.must_stop = !final_road && !green;
  ctx.stop_line_distance_km = ctx.must_stop ? to_end : kInfinity;
  const double accel = acceleration_factor(ctx, config_.idm);

  double cap = std::isinf(front.gap_km) ? kInfinity : std::max(0.0, front.gap_km - kMinSeparationKm);
  if (ctx.must_stop || final_road) cap = std::min(cap, to_end);
  const AdvanceResult step = advance(v.speed_kmh, accel, dt, road.speed_limit_kmh, cap);
  v.speed_kmh = step.new_speed_kmh;
  const double offset = v.offset_km + step.moving_distance_km;

  if (offset < road.length_km || final_road || !green) {
    v.offset_km = std::min(offset, road.length_km);
    return;
  }

  // Cross the intersection onto the next road of the route.
  records_.close_record(v.id, v.road, 1.0, now_s);
  erase_from_lane(v);
  ++v.route_index;
  v.road = v.route.roads[v.route_index];
  const Road& next = network_.road(v.road);
  v.offset_km = std::min(offset - road.length_km, next.length_km);
  v.speed_kmh = std::min(v.speed_kmh, next.speed_limit_kmh);
  insert_in_lane(v);
  records_.open_record(v.id, v.road, 0.0, now_s);
}

void World::process_arrivals(double now_s) {
  const std::vector<VehicleId> ids = active_;
  for (VehicleId id : ids) {
    Vehicle& v = vehicle(id);
    if (!v.active || v.kind == VehicleKind::CrashedCar || !v.on_final_road()) continue;
    if (v.road != v.destination.road) continue;
    const double target = v.destination.fraction * network_.road(v.road).length_km;
    if (v.offset_km + config_.arrival_reach_km < target) continue;

    if (v.kind == VehicleKind::Car) {
      remove_vehicle(id, now_s);
    } else if (v.bound_for_crash) {
      record_arrival(*this, id, now_s);
    } else {
      assign_destination(id, random_sink(), now_s);
    }
  }
}

void World::update_lights(double t_s) {
  for (auto& light : lights_) {
    if (light.in_roads.size() < 2) continue;
    while (t_s >= light.next_switch_time_s - kTimeEps) {
      light.green_index = (light.green_index + 1) % light.in_roads.size();
      light.next_switch_time_s += light.phase_duration_s;
    }
  }
}

void World::spawn(double time_s) {
  const bool any_general = config_.lambda_general > 0.0;
  const bool any_major = config_.lambda_major > 0.0;
  std::poisson_distribution<int> general(any_general ? config_.lambda_general : 1.0);
  std::poisson_distribution<int> major(any_major ? config_.lambda_major : 1.0);
  std::uniform_int_distribution<int> pick_lane(0, kLanesPerRoad - 1);

  for (const RoadPosition& source : sources_) {
    const Road& road = network_.road(source.road);
    int k = 0;
    if (road.is_major) {
      if (any_major) k = major(rng_);
    } else if (any_general) {
      k = general(rng_);
    }
    if (k < 1) continue;
    const int lane = pick_lane(rng_);
    const double offset = source.fraction * road.length_km;
    if (!lane_clear(source.road, lane, offset, config_.idm.dist_gap_km)) {
      ++counters_.deferred_spawns;
      continue;
    }
    const VehicleId id = place_vehicle(VehicleKind::Car, source.road, lane, offset, 0.0, time_s);
    ++counters_.spawned;
    assign_destination(id, random_sink(), time_s);
  }
}

void World::apply_crash(const CrashEvent& crash) {
  if (crash_.applied) return;
  const double t = now();
  Road& road = network_.road(crash.road);
  crash_.road_time_before_s = records_.average_traffic_time(road, t);
  road.speed_limit_kmh = crash.reduced_limit_kmh;

  double offset = crash.fraction * road.length_km;
  while (!lane_clear(crash.road, 0, offset, 0.0)) offset -= kMinSeparationKm;
  const VehicleId id = add_vehicle(VehicleKind::CrashedCar, crash.road, 0, offset, 0.0, t);
  crash_.applied = true;
  crash_.crashed_car = id;

  if (config_.taxis > 0 || !taxi_ids().empty()) {
    const DispatchDecision decision = select_called_taxi(*this, crash);
    dispatch_all(*this, decision);
  }
}

void World::step() {
  const double t = now();
  update_lights(t);
  if (config_.crash && !crash_.applied && t >= config_.crash->time_s - kTimeEps) apply_crash(*config_.crash);
  maybe_reroute(*this, t);

  const double t_end = static_cast<double>(clock_.tick + 1) * clock_.dt_s;
  for (VehicleId id : active_) {
    Vehicle& v = vehicle(id);
    if (v.kind != VehicleKind::CrashedCar) move_vehicle(v, t_end);
  }
  process_arrivals(t_end);
  spawn(t_end);

  for (VehicleId id : active_) {
    const Vehicle& v = vehicle(id);
    records_.update_record(id, v.road, position_of(v).fraction);
  }
  records_.prune(t_end);
  ++clock_.tick;

  if (crash_.applied && !crash_.road_time_after_60s && t_end >= config_.crash->time_s + 60.0 - kTimeEps) {
    crash_.road_time_after_60s = records_.average_traffic_time(network_.road(config_.crash->road), t_end);
  }
}

void World::check_invariants() const {
  auto fail = [&](const std::string& what) {
    throw std::logic_error("invariant violated at t=" + std::to_string(now()) + ": " + what);
  };
  constexpr double kTol = 1e-9;

  std::size_t in_lanes = 0;
  for (const Road& road : network_.roads) {
    for (int l = 0; l < kLanesPerRoad; ++l) {
      const auto& lane = this->lane(road.id, l);
      in_lanes += lane.size();
      for (std::size_t i = 0; i < lane.size(); ++i) {
        const Vehicle& v = vehicle(lane[i]);
        if (!v.active || v.road != road.id || v.lane != l) fail("lane list out of sync");
        if (i > 0 && !(vehicle(lane[i - 1]).offset_km < v.offset_km)) {
          fail("vehicles " + std::to_string(lane[i - 1]) + " and " + std::to_string(v.id) +
               " not strictly ordered on road " + std::to_string(road.id));
        }
      }
    }
  }
  if (in_lanes != active_.size()) fail("lane occupancy does not match active vehicles");

  for (VehicleId id : active_) {
    const Vehicle& v = vehicle(id);
    const Road& road = network_.road(v.road);
    if (v.offset_km < 0.0 || v.offset_km > road.length_km + kTol) fail("offset outside road");
    if (v.speed_kmh < 0.0 || v.speed_kmh > road.speed_limit_kmh + kTol) {
      fail("vehicle " + std::to_string(id) + " speed " + std::to_string(v.speed_kmh) + " outside [0, " +
           std::to_string(road.speed_limit_kmh) + "]");
    }
    if (v.kind == VehicleKind::CrashedCar && v.speed_kmh != 0.0) fail("crashed car moving");
    if (v.route.roads.empty() || v.route.roads[v.route_index] != v.road) fail("route out of sync");
  }

  const auto expected = counters_.initial + counters_.spawned + counters_.inserted - counters_.removed;
  if (static_cast<std::int64_t>(active_.size()) != expected) fail("vehicle conservation");

  for (const auto& light : lights_) {
    if (light.in_roads.empty() || light.green_index >= light.in_roads.size()) fail("light without green");
  }
}

World initialize_world(RoadNetwork network, const SimConfig& config, std::uint64_t seed) {
  World world(std::move(network), config, seed);
  const RoadNetwork& net = world.network_;
  if (config.cars + config.taxis == 0) return world;
  if (net.roads.empty()) throw ConfigError("cannot place vehicles on an empty network");
  if (world.sinks_.empty()) throw ConfigError("network has no sink points");

  std::vector<RoadId> majors;
  std::vector<RoadId> minors;
  std::vector<RoadId> all;
  for (const Road& r : net.roads) {
    (r.is_major ? majors : minors).push_back(r.id);
    all.push_back(r.id);
  }
  int major_cars = static_cast<int>(std::llround(config.cars * config.major_share));
  if (major_cars > 0 && majors.empty()) throw ConfigError("network has no major road for the major share");
  if (minors.empty()) major_cars = config.cars;

  Rng& rng = world.rng_;
  auto place = [&](VehicleKind kind, const std::vector<RoadId>& pool) {
    std::uniform_int_distribution<std::size_t> pick_road(0, pool.size() - 1);
    std::uniform_int_distribution<int> pick_lane(0, kLanesPerRoad - 1);
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const RoadId road = pool[pick_road(rng)];
      const int lane = pick_lane(rng);
      const double offset = std::uniform_real_distribution<double>(0.0, net.road(road).length_km)(rng);
      if (!world.lane_clear(road, lane, offset, config.idm.dist_gap_km)) continue;
      world.place_vehicle(kind, road, lane, offset, 0.0, 0.0);
      ++world.counters_.initial;
      return;
    }
    throw ConfigError("could not place vehicle without overlap; network too small");
  };

  for (int i = 0; i < major_cars; ++i) place(VehicleKind::Car, majors);
  for (int i = major_cars; i < config.cars; ++i) place(VehicleKind::Car, minors);
  for (int i = 0; i < config.taxis; ++i) place(VehicleKind::Taxi, all);

  const std::vector<VehicleId> ids = world.active_;
  for (VehicleId id : ids) world.assign_destination(id, world.random_sink(), 0.0);
  return world;
}

}  // namespace taxisim
