#include "taxisim/dispatch.hpp"

#include <algorithm>

#include <gtest/gtest.h>

#include "taxisim/errors.hpp"
#include "taxisim/experiment.hpp"
#include "taxisim/traffic_flow.hpp"
#include "test_networks.hpp"

namespace taxisim {
namespace {

using testing::make_network;

// Chain 0-1-2-3 of 0.5 km roads (30 s each at 60 km/h) plus a detached road 4-5.
// Eastbound roads are 0, 2 and 4; the detached pair is 6/7.
RoadNetwork chain() {
  return make_network({ProjectedPoint(0, 0), ProjectedPoint(0.5, 0), ProjectedPoint(1.0, 0), ProjectedPoint(1.5, 0),
                       ProjectedPoint(5, 5), ProjectedPoint(5.5, 5)},
                      {{0, 1}, {1, 2}, {2, 3}, {4, 5}});
}

SimConfig chain_config() {
  SimConfig c;
  c.cars = 0;
  c.taxis = 0;
  c.lambda_general = 0.0;
  c.lambda_major = 0.0;
  c.crash = CrashEvent{4, 0.5, 0.0, 10.0};
  return c;
}

TEST(SelectCalledTaxi, NearestByRouteCost) {
  World world(chain(), chain_config(), 1);
  const VehicleId far = world.add_vehicle(VehicleKind::Taxi, 0, 0, 0.25, 0.0, 0.0);
  const VehicleId near = world.add_vehicle(VehicleKind::Taxi, 2, 0, 0.25, 0.0, 0.0);
  const DispatchDecision d = select_called_taxi(world, *world.config().crash);
  EXPECT_EQ(d.called_taxi_id, near);
  EXPECT_NEAR(d.eta_by_taxi.at(near), 30.0, 1e-9);
  EXPECT_NEAR(d.eta_by_taxi.at(far), 60.0, 1e-9);
}

TEST(SelectCalledTaxi, TieGoesToLowerId) {
  World world(chain(), chain_config(), 1);
  const VehicleId first = world.add_vehicle(VehicleKind::Taxi, 2, 1, 0.25, 0.0, 0.0);
  world.add_vehicle(VehicleKind::Taxi, 2, 0, 0.25, 0.0, 0.0);
  const DispatchDecision d = select_called_taxi(world, *world.config().crash);
  EXPECT_EQ(d.called_taxi_id, first);
  EXPECT_EQ(d.eta_by_taxi.size(), 2u);
}

TEST(SelectCalledTaxi, UnreachableTaxiExcluded) {
  World world(chain(), chain_config(), 1);
  const VehicleId lost = world.add_vehicle(VehicleKind::Taxi, 6, 0, 0.25, 0.0, 0.0);
  const VehicleId ok = world.add_vehicle(VehicleKind::Taxi, 0, 0, 0.25, 0.0, 0.0);
  const DispatchDecision d = select_called_taxi(world, *world.config().crash);
  EXPECT_EQ(d.called_taxi_id, ok);
  EXPECT_FALSE(d.eta_by_taxi.contains(lost));
}

TEST(SelectCalledTaxi, NoReachableTaxiThrows) {
  World world(chain(), chain_config(), 1);
  world.add_vehicle(VehicleKind::Taxi, 6, 0, 0.25, 0.0, 0.0);
  EXPECT_THROW(select_called_taxi(world, *world.config().crash), DispatchError);
}

TEST(SelectCalledTaxi, CarsAreNotCandidates) {
  World world(chain(), chain_config(), 1);
  world.add_vehicle(VehicleKind::Car, 4, 0, 0.1, 0.0, 0.0);
  const VehicleId taxi = world.add_vehicle(VehicleKind::Taxi, 0, 0, 0.25, 0.0, 0.0);
  EXPECT_EQ(select_called_taxi(world, *world.config().crash).called_taxi_id, taxi);
}

ExperimentConfig early_crash() {
  ExperimentConfig c;
  c.crash_time_s = 3.0;
  return c;
}

TEST(DispatchAll, EveryTaxiHeadsToCrash) {
  const ExperimentConfig cfg = early_crash();
  World world = initialize_world(build_map(cfg), cfg.sim_config(DispatchPolicy::StaticRoute), 2);
  while (!world.crash_state().applied) world.step();
  const auto taxis = world.taxi_ids();
  EXPECT_EQ(taxis.size(), 20u);
  const RoadPosition target{cfg.crash.road, cfg.crash.fraction};
  for (VehicleId id : taxis) {
    EXPECT_TRUE(world.vehicle(id).bound_for_crash);
    EXPECT_EQ(world.vehicle(id).destination, target);
    EXPECT_EQ(world.vehicle(id).route.roads.back(), cfg.crash.road);
  }
  ASSERT_TRUE(world.dispatch().decision.has_value());
  EXPECT_EQ(world.dispatch().decision->eta_by_taxi.size(), 20u);
}

TEST(DispatchAll, StaticPolicyNeverReroutes) {
  const ExperimentConfig cfg = early_crash();
  World world = initialize_world(build_map(cfg), cfg.sim_config(DispatchPolicy::StaticRoute), 2);
  for (int i = 0; i < 500; ++i) world.step();
  EXPECT_EQ(world.counters().taxi_routes_after_dispatch, 0);
  EXPECT_EQ(world.dispatch().reroute_times.size(), 1u);
}

TEST(DispatchAll, PeriodicPolicyReroutesEveryInterval) {
  const ExperimentConfig cfg;
  World world = initialize_world(build_map(cfg), cfg.sim_config(DispatchPolicy::PeriodicReroute), 2);
  while (world.now() < 400.0) world.step();
  const auto& times = world.dispatch().reroute_times;
  ASSERT_GE(times.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(times[i], 300.0 + 30.0 * static_cast<double>(i), 1e-6);
  EXPECT_GT(world.counters().taxi_routes_after_dispatch, 0);
}

DispatchState with_arrivals(VehicleId called, std::initializer_list<VehicleId> order) {
  DispatchState s;
  s.decision = DispatchDecision{called, {}};
  int rank = 0;
  for (VehicleId id : order) {
    s.log.arrivals.push_back({id, 0.0});
    ++rank;
    if (id == called) s.log.called_taxi_rank = rank;
  }
  return s;
}

TEST(Termination, DoneAtTenthArrivalWhenCalledAlreadyIn) {
  EXPECT_EQ(check_termination(with_arrivals(3, {1, 2, 3, 4, 5, 6, 7, 8, 9}), 10), Termination::Continue);
  EXPECT_EQ(check_termination(with_arrivals(3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 10), Termination::Done);
}

TEST(Termination, WaitsForCalledTaxi) {
  EXPECT_EQ(check_termination(with_arrivals(15, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}), 10), Termination::Continue);
  EXPECT_EQ(check_termination(with_arrivals(15, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 15}), 10), Termination::Done);
}

TEST(RecordArrival, RanksCalledTaxi) {
  World world(chain(), chain_config(), 1);
  const VehicleId a = world.add_vehicle(VehicleKind::Taxi, 0, 0, 0.25, 0.0, 0.0);
  const VehicleId b = world.add_vehicle(VehicleKind::Taxi, 2, 0, 0.25, 0.0, 0.0);
  world.dispatch().decision = DispatchDecision{a, {}};
  record_arrival(world, b, 10.0);
  EXPECT_FALSE(world.dispatch().log.called_taxi_rank.has_value());
  record_arrival(world, a, 12.0);
  EXPECT_EQ(world.dispatch().log.called_taxi_rank, 2);
  EXPECT_EQ(world.vehicle_count(), 0u);

  World first(chain(), chain_config(), 1);
  const VehicleId c = first.add_vehicle(VehicleKind::Taxi, 0, 0, 0.25, 0.0, 0.0);
  first.dispatch().decision = DispatchDecision{c, {}};
  record_arrival(first, c, 5.0);
  EXPECT_EQ(first.dispatch().log.called_taxi_rank, 1);
}

TEST(Policy, NamesRoundTrip) {
  EXPECT_EQ(parse_policy("periodic"), DispatchPolicy::PeriodicReroute);
  EXPECT_EQ(parse_policy(to_string(DispatchPolicy::StaticRoute)), DispatchPolicy::StaticRoute);
  EXPECT_THROW(parse_policy("sometimes"), ConfigError);
}

}  // namespace
}  // namespace taxisim
