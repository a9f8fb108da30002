#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "taxisim/navigation.hpp"

namespace taxisim {

class World;
struct CrashEvent;

enum class DispatchPolicy {
  PeriodicReroute,  // every taxi re-routes on a fixed cadence after dispatch
  StaticRoute,      // a route is computed once, when the destination is assigned
};

std::string_view to_string(DispatchPolicy policy);
// Accepts "periodic" / "static"; throws ConfigError otherwise.
DispatchPolicy parse_policy(std::string_view name);

struct DispatchDecision {
  VehicleId called_taxi_id = -1;
  std::map<VehicleId, double> eta_by_taxi;  // route cost in seconds, reachable taxis only
};

struct Arrival {
  VehicleId taxi = 0;
  double time_s = 0.0;
};

struct ArrivalLog {
  std::vector<Arrival> arrivals;
  // 1-based position of the called taxi, once it has arrived.
  std::optional<int> called_taxi_rank;
};

struct DispatchState {
  DispatchPolicy policy = DispatchPolicy::PeriodicReroute;
  std::optional<DispatchDecision> decision;
  ArrivalLog log;
  double next_reroute_s = 0.0;
  // Dispatch time followed by every periodic re-route time.
  std::vector<double> reroute_times;
};

enum class Termination { Continue, Done };

// Nearest taxi by route cost to the crash over current average traffic
// times; ties go to the lowest id, unreachable taxis are skipped.
// Throws DispatchError when no taxi can reach the crash.
DispatchDecision select_called_taxi(const World& world, const CrashEvent& crash);

// Sends every taxi to the crash location with a fresh route and arms the
// periodic re-route clock.
void dispatch_all(World& world, const DispatchDecision& decision);

// Re-routes all crash-bound taxis when the policy and the cadence say so.
void maybe_reroute(World& world, double now_s);

// Logs the arrival and removes the taxi from the map.
void record_arrival(World& world, VehicleId taxi, double time_s);

Termination check_termination(const DispatchState& state, int arrivals_required);

}  // namespace taxisim
