#include "taxisim/traffic_flow.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "taxisim/errors.hpp"
#include "taxisim/experiment.hpp"
#include "test_networks.hpp"

namespace taxisim {
namespace {

using testing::make_network;
using testing::single_road;

SimConfig quiet_config() {
  SimConfig c;
  c.cars = 0;
  c.taxis = 0;
  c.lambda_general = 0.0;
  c.lambda_major = 0.0;
  return c;
}

RoadNetwork bundled_map() { return build_map(ExperimentConfig{}); }

TEST(World, EmptyWorldOnlyAdvancesClock) {
  World world(bundled_map(), quiet_config(), 1);
  for (int i = 0; i < 10; ++i) world.step();
  EXPECT_EQ(world.clock().tick, 10);
  EXPECT_NEAR(world.now(), 3.0, 1e-12);
  EXPECT_EQ(world.vehicle_count(), 0u);
  EXPECT_EQ(world.counters().spawned, 0);
}

TEST(World, SingleCarFirstStep) {
  World world(single_road(1.0), quiet_config(), 1);
  const VehicleId id = world.add_vehicle(VehicleKind::Car, 0, 0, 0.01, 0.0, 0.0);
  ASSERT_TRUE(world.assign_destination(id, {0, 0.9}, 0.0));
  world.step();
  EXPECT_NEAR(world.vehicle(id).speed_kmh, 1.08, 1e-9);
  EXPECT_NEAR(world.vehicle(id).offset_km, 0.01 + 0.000045, 1e-12);
}

TEST(World, FollowerNeverPassesLeaderInLane) {
  World world(single_road(1.0), quiet_config(), 1);
  const VehicleId lead = world.add_vehicle(VehicleKind::Car, 0, 0, 0.100, 0.0, 0.0);
  const VehicleId tail = world.add_vehicle(VehicleKind::Car, 0, 0, 0.095, 60.0, 0.0);
  world.assign_destination(lead, {0, 0.9}, 0.0);
  world.assign_destination(tail, {0, 0.9}, 0.0);
  for (int i = 0; i < 100; ++i) {
    world.step();
    world.check_invariants();
    if (!world.vehicle(lead).active || !world.vehicle(tail).active) break;
    // Overtaking is only possible through the other lane.
    if (world.vehicle(tail).lane == world.vehicle(lead).lane) {
      EXPECT_LT(world.vehicle(tail).offset_km, world.vehicle(lead).offset_km);
    }
  }
}

TEST(World, CarReachingSinkIsRemoved) {
  World world(single_road(1.0), quiet_config(), 1);
  const VehicleId id = world.add_vehicle(VehicleKind::Car, 0, 0, 0.497, 20.0, 0.0);
  ASSERT_TRUE(world.assign_destination(id, {0, 0.5}, 0.0));
  world.step();
  EXPECT_FALSE(world.vehicle(id).active);
  EXPECT_EQ(world.vehicle_count(), 0u);
  EXPECT_EQ(world.counters().removed, 1);
  // Its traffic-time record was closed.
  EXPECT_EQ(world.records().stats(0).closed.size(), 1u);
}

TEST(World, CarCrossesIntersectionOntoNextRoad) {
  const RoadNetwork net = make_network({ProjectedPoint(0, 0), ProjectedPoint(0.2, 0), ProjectedPoint(0.4, 0)},
                                       {{0, 1}, {1, 2}});
  World world(net, quiet_config(), 1);
  const VehicleId id = world.add_vehicle(VehicleKind::Car, 0, 0, 0.05, 30.0, 0.0);
  ASSERT_TRUE(world.assign_destination(id, {2, 0.8}, 0.0));
  bool crossed = false;
  for (int i = 0; i < 200 && world.vehicle(id).active; ++i) {
    world.step();
    world.check_invariants();
    if (world.vehicle(id).active && world.vehicle(id).road == 2) crossed = true;
  }
  // Intersection 1 has a single in-road, so it is always green.
  EXPECT_TRUE(crossed);
  EXPECT_FALSE(world.vehicle(id).active);
  EXPECT_EQ(world.records().stats(0).closed.size(), 1u);
}

TEST(World, InitialPlacementSplitsMajorAndMinor) {
  const ExperimentConfig cfg;
  const World world = initialize_world(bundled_map(), cfg.sim_config(DispatchPolicy::PeriodicReroute), 2);
  int cars = 0, on_major = 0, taxis = 0;
  for (VehicleId id : world.active_ids()) {
    const Vehicle& v = world.vehicle(id);
    if (v.kind == VehicleKind::Taxi) {
      ++taxis;
      continue;
    }
    ++cars;
    if (world.network().road(v.road).is_major) ++on_major;
  }
  // Cars whose sink is unreachable are dropped at placement; none are on this map.
  EXPECT_EQ(cars, 500);
  EXPECT_EQ(on_major, 400);
  EXPECT_EQ(taxis, 20);
  world.check_invariants();
}

TEST(World, SingleCarWorldHasRoute) {
  SimConfig c = quiet_config();
  c.cars = 1;
  const World world = initialize_world(bundled_map(), c, 3);
  ASSERT_EQ(world.vehicle_count(), 1u);
  const Vehicle& v = world.vehicle(world.active_ids().front());
  ASSERT_FALSE(v.route.roads.empty());
  EXPECT_EQ(v.route.roads.front(), v.road);
  EXPECT_EQ(v.route.roads.back(), v.destination.road);
}

TEST(World, NoSinksIsConfigError) {
  SimConfig c = quiet_config();
  c.cars = 1;
  EXPECT_THROW(initialize_world(single_road(1.0), c, 1), ConfigError);
}

TEST(World, SameSeedSameInitialWorld) {
  const SimConfig c = ExperimentConfig{}.sim_config(DispatchPolicy::StaticRoute);
  const World a = initialize_world(bundled_map(), c, 9);
  const World b = initialize_world(bundled_map(), c, 9);
  ASSERT_EQ(a.active_ids(), b.active_ids());
  for (VehicleId id : a.active_ids()) {
    EXPECT_EQ(a.vehicle(id).road, b.vehicle(id).road);
    EXPECT_EQ(a.vehicle(id).lane, b.vehicle(id).lane);
    EXPECT_EQ(a.vehicle(id).offset_km, b.vehicle(id).offset_km);
    EXPECT_EQ(a.vehicle(id).route.roads, b.vehicle(id).route.roads);
  }
}

TEST(Spawn, ZeroRateNeverSpawns) {
  World world(bundled_map(), quiet_config(), 1);
  for (int i = 0; i < 1000; ++i) world.spawn(i * 0.3);
  EXPECT_EQ(world.vehicle_count(), 0u);
  EXPECT_EQ(world.counters().spawned, 0);
}

TEST(Spawn, OccupiedSourceDefers) {
  RoadNetwork net = single_road(1.0);
  net.road(0).is_major = true;
  net.road(0).source_points = {0.5};
  net.road(1).sink_points = {0.5};
  SimConfig c = quiet_config();
  c.lambda_major = 50.0;  // k >= 1 at essentially every draw
  World world(net, c, 1);
  world.add_vehicle(VehicleKind::Car, 0, 0, 0.5, 0.0, 0.0);
  world.add_vehicle(VehicleKind::Car, 0, 1, 0.5, 0.0, 0.0);
  world.spawn(0.3);
  EXPECT_EQ(world.vehicle_count(), 2u);
  EXPECT_EQ(world.counters().deferred_spawns, 1);
  EXPECT_EQ(world.counters().spawned, 0);
}

TEST(Spawn, FreeSourceSpawnsAtSourceFraction) {
  RoadNetwork net = single_road(1.0);
  net.road(0).is_major = true;
  net.road(0).source_points = {0.3};
  net.road(0).sink_points = {0.9};
  SimConfig c = quiet_config();
  c.lambda_major = 50.0;
  World world(net, c, 1);
  world.spawn(1.5);
  ASSERT_EQ(world.vehicle_count(), 1u);
  const VehicleId id = world.active_ids().front();
  EXPECT_NEAR(world.vehicle(id).offset_km, 0.3, 1e-12);
  EXPECT_EQ(world.records().stats(0).open.at(id).starting_position, 0.3);
  EXPECT_EQ(world.records().stats(0).open.at(id).starting_time, 1.5);
}

TEST(Crash, LimitDropsOnCrashDirectionOnly) {
  SimConfig c = quiet_config();
  c.crash = CrashEvent{0, 0.5, 0.0, 10.0};
  World world(single_road(1.0), c, 1);
  const VehicleId mover = world.add_vehicle(VehicleKind::Car, 0, 1, 0.1, 0.0, 0.0);
  world.assign_destination(mover, {0, 0.95}, 0.0);
  world.step();
  EXPECT_EQ(world.network().road(0).speed_limit_kmh, 10.0);
  EXPECT_EQ(world.network().road(1).speed_limit_kmh, 60.0);
  ASSERT_TRUE(world.crash_state().applied);
  const VehicleId crashed = world.crash_state().crashed_car;
  EXPECT_EQ(world.vehicle(crashed).kind, VehicleKind::CrashedCar);
  EXPECT_EQ(world.vehicle(crashed).lane, 0);
  const double at = world.vehicle(crashed).offset_km;
  EXPECT_NEAR(at, 0.5, 1e-12);
  for (int i = 0; i < 1500 && world.vehicle(mover).active; ++i) {
    world.step();
    world.check_invariants();
    EXPECT_EQ(world.vehicle(crashed).offset_km, at);
    EXPECT_EQ(world.vehicle(crashed).speed_kmh, 0.0);
  }
  // The lane-1 car drives past the crash at no more than 10 km/h.
  EXPECT_FALSE(world.vehicle(mover).active);
}

TEST(Crash, MissingRoadIsConfigError) {
  SimConfig c = quiet_config();
  c.crash = CrashEvent{5, 0.5, 0.0, 10.0};
  EXPECT_THROW(World(single_road(1.0), c, 1), ConfigError);
}

TEST(TrafficLights, PhaseInRangeAndOneGreen) {
  const SimConfig c = ExperimentConfig{}.sim_config(DispatchPolicy::StaticRoute);
  World world = initialize_world(bundled_map(), c, 4);
  std::vector<RoadId> last_green;
  for (const auto& light : world.lights()) {
    EXPECT_GE(light.phase_duration_s, 15.0);
    EXPECT_LE(light.phase_duration_s, 30.0);
  }
  int switches = 0;
  for (int tick = 0; tick < 400; ++tick) {
    world.step();
    std::vector<RoadId> greens;
    for (const auto& light : world.lights()) {
      int n = 0;
      for (RoadId r : light.in_roads) n += world.is_green(r);
      EXPECT_EQ(n, 1);
      greens.push_back(light.current_green());
    }
    if (!last_green.empty()) {
      for (std::size_t i = 0; i < greens.size(); ++i) switches += greens[i] != last_green[i];
    }
    last_green = greens;
  }
  // 120 s covers at least four phases of every multi-road light.
  EXPECT_GT(switches, 0);
}

TEST(World, InvariantsAndConservationOverTime) {
  const SimConfig c = ExperimentConfig{}.sim_config(DispatchPolicy::PeriodicReroute);
  World world = initialize_world(bundled_map(), c, 5);
  for (int tick = 0; tick < 500; ++tick) {
    world.step();
    ASSERT_NO_THROW(world.check_invariants()) << "tick " << tick;
  }
  const auto& k = world.counters();
  EXPECT_EQ(static_cast<std::int64_t>(world.vehicle_count()), k.initial + k.spawned + k.inserted - k.removed);
}

}  // namespace
}  // namespace taxisim
