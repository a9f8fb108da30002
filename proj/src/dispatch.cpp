#include "taxisim/dispatch.hpp"

#include <string>

#include "taxisim/errors.hpp"
#include "taxisim/traffic_flow.hpp"

namespace taxisim {

std::string_view to_string(DispatchPolicy policy) {
  return policy == DispatchPolicy::PeriodicReroute ? "periodic" : "static";
}

DispatchPolicy parse_policy(std::string_view name) {
  if (name == "periodic") return DispatchPolicy::PeriodicReroute;
  if (name == "static") return DispatchPolicy::StaticRoute;
  throw ConfigError("unknown policy '" + std::string(name) + "' (expected periodic|static)");
}

DispatchDecision select_called_taxi(const World& world, const CrashEvent& crash) {
  const std::vector<double> weights = world.weights();
  const RoadPosition target{crash.road, crash.fraction};

  DispatchDecision decision;
  double best = kInfinity;
  for (VehicleId id : world.taxi_ids()) {
    double eta = 0.0;
    try {
      eta = shortest_route(world.network(), weights, world.position_of(world.vehicle(id)), target).cost_s;
    } catch (const NoRouteError&) {
      continue;
    }
    decision.eta_by_taxi.emplace(id, eta);
    if (eta < best) {
      best = eta;
      decision.called_taxi_id = id;
    }
  }
  if (decision.called_taxi_id < 0) throw DispatchError("no taxi can reach the crash location");
  return decision;
}

void dispatch_all(World& world, const DispatchDecision& decision) {
  const auto& crash = world.config().crash;
  if (!crash) throw DispatchError("dispatch requested without a crash event");
  const double t = world.now();
  const RoadPosition target{crash->road, crash->fraction};
  for (VehicleId id : world.taxi_ids()) {
    world.vehicle(id).bound_for_crash = true;
    world.assign_destination(id, target, t);
  }
  DispatchState& state = world.dispatch();
  state.decision = decision;
  state.reroute_times.push_back(t);
  state.next_reroute_s = t + world.config().reroute_interval_s;
}

void maybe_reroute(World& world, double now_s) {
  DispatchState& state = world.dispatch();
  if (!state.decision || state.policy != DispatchPolicy::PeriodicReroute) return;
  if (now_s < state.next_reroute_s - 1e-9) return;
  for (VehicleId id : world.taxi_ids()) {
    const Vehicle& v = world.vehicle(id);
    if (!v.bound_for_crash) continue;
    const RoadPosition destination = v.destination;
    world.assign_destination(id, destination, now_s);
  }
  state.reroute_times.push_back(now_s);
  state.next_reroute_s += world.config().reroute_interval_s;
}

void record_arrival(World& world, VehicleId taxi, double time_s) {
  ArrivalLog& log = world.dispatch().log;
  log.arrivals.push_back({taxi, time_s});
  const auto& decision = world.dispatch().decision;
  if (decision && decision->called_taxi_id == taxi) log.called_taxi_rank = static_cast<int>(log.arrivals.size());
  world.remove_vehicle(taxi, time_s, "arrived at crash");
}

Termination check_termination(const DispatchState& state, int arrivals_required) {
  const bool called_arrived = state.log.called_taxi_rank.has_value();
  const bool enough = static_cast<int>(state.log.arrivals.size()) >= arrivals_required;
  return called_arrived && enough ? Termination::Done : Termination::Continue;
}

}  // namespace taxisim
