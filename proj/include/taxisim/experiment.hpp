#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxisim/traffic_flow.hpp"

namespace taxisim {

struct MapConfig {
  // "synthetic" or "geojson".
  std::string source = "synthetic";
  int rows = 8;
  int cols = 8;
  double cell_km = 0.18;
  std::uint64_t seed = 1;
  std::string geojson_path;
  double snap_tolerance_km = kDefaultSnapToleranceKm;
  double major_length_km = kDefaultMajorLengthKm;
};

// Default: the road nearest the centre of the bundled 8x8 map (seed 1).
struct CrashLocation {
  RoadId road = 174;
  double fraction = 0.5;
};

// Every field has the experiment's published value as its default, so an
// empty JSON object reproduces the reference setup on the bundled map.
struct ExperimentConfig {
  MapConfig map;
  int cars = 500;
  int taxis = 20;
  double lambda_general = 0.00002;
  double lambda_major = 0.00006;
  double dt_s = 0.3;
  double speed_limit_kmh = 60.0;
  double crash_limit_kmh = 10.0;
  double major_share = 0.8;
  double crash_time_s = 300.0;
  CrashLocation crash;
  double light_phase_min_s = 15.0;
  double light_phase_max_s = 30.0;
  double reroute_interval_s = 30.0;
  double window_s = kDefaultWindowS;
  UnitMode unit_mode = UnitMode::Dimensional;
  std::vector<std::uint64_t> seeds = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,  43,  47,
                                      53, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127};
  IdmParams idm;
  LaneChangeParams lane_change;
  double arrival_reach_km = 0.005;
  int arrivals_required = 10;
  double time_cap_s = 7200.0;
  double global_time_limit_s = kDefaultGlobalTimeLimitS;

  SimConfig sim_config(DispatchPolicy policy) const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Missing fields keep their defaults; throws ConfigError on invalid values.
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// The road network a config describes, with the configured speed limit.
RoadNetwork build_map(const ExperimentConfig& config);

struct ExperimentResult {
  std::uint64_t seed = 0;
  DispatchPolicy policy = DispatchPolicy::PeriodicReroute;
  VehicleId called_taxi_id = -1;
  int called_taxi_rank = 0;
  std::vector<Arrival> arrivals;
  double t_called_arrival_s = 0.0;
  double t_end_s = 0.0;
  double wall_time_s = 0.0;  // excluded from determinism checks
  std::map<VehicleId, double> eta_by_taxi;
  std::vector<double> reroute_times;
  std::int64_t taxi_routes_after_dispatch = 0;
  double crash_road_time_before_s = 0.0;
  std::optional<double> crash_road_time_after_60s;
  std::int64_t ticks = 0;
  std::int64_t invariant_checks = 0;
};

struct RunOptions {
  // Runs World::check_invariants after every tick.
  bool check_invariants = false;
  // Called once, right after the tick that applied the crash.
  std::function<void(const World&)> on_crash;
  std::function<void(const World&)> on_tick;
};

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, DispatchPolicy policy,
                                const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const RoadNetwork& network,
                                std::uint64_t seed, DispatchPolicy policy, const RunOptions& options = {});

struct RunFailure {
  std::uint64_t seed = 0;
  DispatchPolicy policy = DispatchPolicy::PeriodicReroute;
  std::string kind;
  std::string message;
};

struct PolicySummary {
  DispatchPolicy policy = DispatchPolicy::PeriodicReroute;
  // histogram[r - 1] = number of runs whose called taxi arrived r-th.
  std::vector<int> histogram;
  int completed = 0;
  double top3_rate = 0.0;
  double median_rank = 0.0;
  // Median rank of a uniformly random choice among the fleet.
  double random_median_rank = 0.0;
  // One-sided sign test p-value for ranks below random_median_rank.
  double sign_test_p = 1.0;
};

struct SuiteSummary {
  std::vector<ExperimentResult> results;  // sorted by (seed, policy)
  std::vector<RunFailure> failures;
  std::vector<PolicySummary> policies;
};

struct SuiteOptions {
  // 0 means SIM_THREADS or the hardware concurrency.
  unsigned threads = 0;
  bool check_invariants = false;
};

SuiteSummary run_suite(const ExperimentConfig& config, const SuiteOptions& options = {});
PolicySummary summarize(DispatchPolicy policy, std::span<const ExperimentResult> results, int fleet_size);

// P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_p_value(int successes, int trials);
double median(std::vector<double> values);

std::string results_csv(std::span<const ExperimentResult> results);
nlohmann::json result_json(const ExperimentResult& result);
nlohmann::json summary_json(const SuiteSummary& summary);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_suite_outputs(const SuiteSummary& summary, const std::filesystem::path& dir);

// Threads for suite execution: SIM_THREADS when set, else hardware concurrency.
unsigned default_thread_count();

}  // namespace taxisim
