#include "taxisim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "taxisim/errors.hpp"
#include "taxisim/geojson.hpp"

namespace taxisim {
namespace {

using nlohmann::json;

std::string fixed(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) throw ConfigError("unknown config field '" + where + it.key() + "'");
  }
}

std::string unit_mode_name(UnitMode m) { return m == UnitMode::Dimensional ? "dimensional" : "literal"; }

UnitMode parse_unit_mode(const std::string& s) {
  if (s == "dimensional") return UnitMode::Dimensional;
  if (s == "literal") return UnitMode::Literal;
  throw ConfigError("unit_mode must be 'dimensional' or 'literal', got '" + s + "'");
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.map.source == "synthetic" || c.map.source == "geojson", "map.source must be synthetic|geojson");
  if (c.map.source == "geojson") require(!c.map.geojson_path.empty(), "map.geojson path required");
  require(c.map.snap_tolerance_km >= 0.0, "map.snap_tolerance_km must be non-negative");
  require(c.map.major_length_km > 0.0, "map.major_length_km must be positive");
  require(c.cars >= 0 && c.taxis >= 0, "cars/taxis must be non-negative");
  require(c.lambda_general >= 0.0 && c.lambda_major >= 0.0, "lambdas must be non-negative");
  require(c.dt_s > 0.0, "dt_s must be positive");
  require(c.speed_limit_kmh > 0.0 && c.crash_limit_kmh > 0.0, "speed limits must be positive");
  require(c.major_share >= 0.0 && c.major_share <= 1.0, "major_share must lie in [0, 1]");
  require(c.crash_time_s >= 0.0, "crash_time_s must be non-negative");
  require(c.crash.fraction > 0.0 && c.crash.fraction < 1.0, "crash.fraction must lie in (0, 1)");
  require(c.light_phase_min_s > 0.0 && c.light_phase_max_s >= c.light_phase_min_s,
          "light_phase_range_s must be positive and ordered");
  require(c.reroute_interval_s > 0.0 && c.window_s > 0.0, "intervals must be positive");
  require(!c.seeds.empty(), "seeds must be non-empty");
  require(c.arrivals_required >= 1, "arrivals_required must be >= 1");
  require(c.time_cap_s > 0.0 && c.global_time_limit_s > 0.0, "time limits must be positive");
}

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  const std::string& kind = e.kind();
  if (kind == "ConfigError") throw ConfigError(msg);
  if (kind == "MapBoundsError") throw MapBoundsError(msg);
  if (kind == "NoRouteError") throw NoRouteError(msg);
  if (kind == "DispatchError") throw DispatchError(msg);
  if (kind == "TimeoutError") throw TimeoutError(msg);
  if (kind == "IoError") throw IoError(msg);
  throw Error(kind, msg);
}

}  // namespace

SimConfig ExperimentConfig::sim_config(DispatchPolicy policy) const {
  SimConfig s;
  s.cars = cars;
  s.taxis = taxis;
  s.lambda_general = lambda_general;
  s.lambda_major = lambda_major;
  s.dt_s = dt_s;
  s.major_share = major_share;
  s.light_phase_min_s = light_phase_min_s;
  s.light_phase_max_s = light_phase_max_s;
  s.reroute_interval_s = reroute_interval_s;
  s.window_s = window_s;
  s.global_time_limit_s = global_time_limit_s;
  s.arrival_reach_km = arrival_reach_km;
  s.arrivals_required = arrivals_required;
  s.idm = idm;
  s.idm.unit_mode = unit_mode;
  s.lane_change = lane_change;
  s.crash = CrashEvent{crash.road, crash.fraction, crash_time_s, crash_limit_kmh};
  s.policy = policy;
  return s;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{
      {"map",
       {{"source", c.map.source},
        {"rows", c.map.rows},
        {"cols", c.map.cols},
        {"cell_km", c.map.cell_km},
        {"seed", c.map.seed},
        {"geojson", c.map.geojson_path},
        {"snap_tolerance_km", c.map.snap_tolerance_km},
        {"major_length_km", c.map.major_length_km}}},
      {"cars", c.cars},
      {"taxis", c.taxis},
      {"lambda_general", c.lambda_general},
      {"lambda_major", c.lambda_major},
      {"dt_s", c.dt_s},
      {"speed_limit_kmh", c.speed_limit_kmh},
      {"crash_limit_kmh", c.crash_limit_kmh},
      {"major_share", c.major_share},
      {"crash_time_s", c.crash_time_s},
      {"crash", {{"road", c.crash.road}, {"fraction", c.crash.fraction}}},
      {"light_phase_range_s", {c.light_phase_min_s, c.light_phase_max_s}},
      {"reroute_interval_s", c.reroute_interval_s},
      {"window_s", c.window_s},
      {"unit_mode", unit_mode_name(c.unit_mode)},
      {"seeds", c.seeds},
      {"idm",
       {{"time_head_away_s", c.idm.time_head_away_s},
        {"dist_gap_km", c.idm.dist_gap_km},
        {"max_acceleration_kms2", c.idm.max_acceleration},
        {"max_deceleration_kms2", c.idm.max_deceleration}}},
      {"lane_change",
       {{"speed_margin", c.lane_change.speed_margin},
        {"safe_gap_km", c.lane_change.safe_gap_km},
        {"cooldown_s", c.lane_change.cooldown_s},
        {"lookahead_km", c.lane_change.lookahead_km}}},
      {"arrival_reach_km", c.arrival_reach_km},
      {"arrivals_required", c.arrivals_required},
      {"time_cap_s", c.time_cap_s},
      {"global_time_limit_s", c.global_time_limit_s},
  };
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"map", "cars", "taxis", "lambda_general", "lambda_major", "dt_s", "speed_limit_kmh",
                  "crash_limit_kmh", "major_share", "crash_time_s", "crash", "light_phase_range_s",
                  "reroute_interval_s", "window_s", "unit_mode", "seeds", "idm", "lane_change",
                  "arrival_reach_km", "arrivals_required", "time_cap_s", "global_time_limit_s"},
                 "");
  if (auto m = j.find("map"); m != j.end()) {
    reject_unknown(*m, {"source", "rows", "cols", "cell_km", "seed", "geojson", "snap_tolerance_km",
                        "major_length_km"},
                   "map.");
    read_field(*m, "source", c.map.source);
    read_field(*m, "rows", c.map.rows);
    read_field(*m, "cols", c.map.cols);
    read_field(*m, "cell_km", c.map.cell_km);
    read_field(*m, "seed", c.map.seed);
    read_field(*m, "geojson", c.map.geojson_path);
    read_field(*m, "snap_tolerance_km", c.map.snap_tolerance_km);
    read_field(*m, "major_length_km", c.map.major_length_km);
  }
  read_field(j, "cars", c.cars);
  read_field(j, "taxis", c.taxis);
  read_field(j, "lambda_general", c.lambda_general);
  read_field(j, "lambda_major", c.lambda_major);
  read_field(j, "dt_s", c.dt_s);
  read_field(j, "speed_limit_kmh", c.speed_limit_kmh);
  read_field(j, "crash_limit_kmh", c.crash_limit_kmh);
  read_field(j, "major_share", c.major_share);
  read_field(j, "crash_time_s", c.crash_time_s);
  if (auto cr = j.find("crash"); cr != j.end()) {
    reject_unknown(*cr, {"road", "fraction"}, "crash.");
    read_field(*cr, "road", c.crash.road);
    read_field(*cr, "fraction", c.crash.fraction);
  }
  if (auto r = j.find("light_phase_range_s"); r != j.end()) {
    if (!r->is_array() || r->size() != 2) throw ConfigError("light_phase_range_s must be [min, max]");
    c.light_phase_min_s = (*r)[0].get<double>();
    c.light_phase_max_s = (*r)[1].get<double>();
  }
  read_field(j, "reroute_interval_s", c.reroute_interval_s);
  read_field(j, "window_s", c.window_s);
  if (auto u = j.find("unit_mode"); u != j.end()) c.unit_mode = parse_unit_mode(u->get<std::string>());
  read_field(j, "seeds", c.seeds);
  if (auto i = j.find("idm"); i != j.end()) {
    reject_unknown(*i, {"time_head_away_s", "dist_gap_km", "max_acceleration_kms2", "max_deceleration_kms2"},
                   "idm.");
    read_field(*i, "time_head_away_s", c.idm.time_head_away_s);
    read_field(*i, "dist_gap_km", c.idm.dist_gap_km);
    read_field(*i, "max_acceleration_kms2", c.idm.max_acceleration);
    read_field(*i, "max_deceleration_kms2", c.idm.max_deceleration);
  }
  if (auto l = j.find("lane_change"); l != j.end()) {
    reject_unknown(*l, {"speed_margin", "safe_gap_km", "cooldown_s", "lookahead_km"}, "lane_change.");
    read_field(*l, "speed_margin", c.lane_change.speed_margin);
    read_field(*l, "safe_gap_km", c.lane_change.safe_gap_km);
    read_field(*l, "cooldown_s", c.lane_change.cooldown_s);
    read_field(*l, "lookahead_km", c.lane_change.lookahead_km);
  }
  read_field(j, "arrival_reach_km", c.arrival_reach_km);
  read_field(j, "arrivals_required", c.arrivals_required);
  read_field(j, "time_cap_s", c.time_cap_s);
  read_field(j, "global_time_limit_s", c.global_time_limit_s);
  validate(c);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  ExperimentConfig config = doc.get<ExperimentConfig>();
  // Relative GeoJSON paths resolve against the config file's directory.
  if (config.map.source == "geojson" && std::filesystem::path(config.map.geojson_path).is_relative()) {
    config.map.geojson_path = (path.parent_path() / config.map.geojson_path).string();
  }
  return config;
}

RoadNetwork build_map(const ExperimentConfig& config) {
  Rng rng(config.map.seed);
  RoadNetwork net;
  if (config.map.source == "geojson") {
    const GeoJsonRecords records = read_geojson(config.map.geojson_path);
    net = network_from_geojson(records, config.map.snap_tolerance_km, config.map.major_length_km, rng);
  } else {
    net = generate_synthetic_grid(config.map.rows, config.map.cols, config.map.cell_km, rng,
                                  config.map.major_length_km);
  }
  for (Road& r : net.roads) r.speed_limit_kmh = config.speed_limit_kmh;
  return net;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, DispatchPolicy policy,
                                const RunOptions& options) {
  return run_experiment(config, build_map(config), seed, policy, options);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RoadNetwork& network,
                                std::uint64_t seed, DispatchPolicy policy, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string context = "seed " + std::to_string(seed) + " policy " + std::string(to_string(policy));
  ExperimentResult result;
  result.seed = seed;
  result.policy = policy;
  try {
    World world = initialize_world(network, config.sim_config(policy), seed);
    bool crash_reported = false;
    while (true) {
      world.step();
      ++result.ticks;
      if (options.check_invariants) {
        world.check_invariants();
        ++result.invariant_checks;
      }
      if (options.on_tick) options.on_tick(world);
      if (!crash_reported && world.crash_state().applied) {
        crash_reported = true;
        if (options.on_crash) options.on_crash(world);
      }
      if (check_termination(world.dispatch(), config.arrivals_required) == Termination::Done) break;
      if (world.now() > config.time_cap_s) {
        const auto& log = world.dispatch().log;
        std::string partial;
        for (const auto& a : log.arrivals) partial += " " + std::to_string(a.taxi) + "@" + fixed(a.time_s, 1);
        throw TimeoutError("simulated time exceeded " + fixed(config.time_cap_s, 0) + " s with " +
                           std::to_string(log.arrivals.size()) + " arrivals:" + partial);
      }
    }

    const DispatchState& d = world.dispatch();
    result.called_taxi_id = d.decision->called_taxi_id;
    result.called_taxi_rank = *d.log.called_taxi_rank;
    result.arrivals = d.log.arrivals;
    result.t_called_arrival_s = d.log.arrivals[static_cast<std::size_t>(result.called_taxi_rank - 1)].time_s;
    result.t_end_s = world.now();
    result.eta_by_taxi = d.decision->eta_by_taxi;
    result.reroute_times = d.reroute_times;
    result.taxi_routes_after_dispatch = world.counters().taxi_routes_after_dispatch;
    result.crash_road_time_before_s = world.crash_state().road_time_before_s;
    result.crash_road_time_after_60s = world.crash_state().road_time_after_60s;
  } catch (const Error& e) {
    rethrow_with_context(e, context);
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("SIM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sign_test_p_value(int successes, int trials) {
  if (trials <= 0) return 1.0;
  // Sum C(n, k) / 2^n in log space.
  double p = 0.0;
  for (int k = successes; k <= trials; ++k) {
    const double log_term = std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) -
                            trials * std::log(2.0);
    p += std::exp(log_term);
  }
  return std::min(1.0, p);
}

PolicySummary summarize(DispatchPolicy policy, std::span<const ExperimentResult> results, int fleet_size) {
  PolicySummary s;
  s.policy = policy;
  s.histogram.assign(static_cast<std::size_t>(std::max(fleet_size, 1)), 0);
  s.random_median_rank = (fleet_size + 1) / 2.0;
  std::vector<double> ranks;
  int top3 = 0;
  int below = 0;
  int above = 0;
  for (const auto& r : results) {
    if (r.policy != policy) continue;
    ++s.completed;
    const auto bucket = static_cast<std::size_t>(std::clamp(r.called_taxi_rank, 1, static_cast<int>(s.histogram.size())));
    ++s.histogram[bucket - 1];
    ranks.push_back(r.called_taxi_rank);
    if (r.called_taxi_rank <= 3) ++top3;
    if (r.called_taxi_rank < s.random_median_rank) ++below;
    if (r.called_taxi_rank > s.random_median_rank) ++above;
  }
  if (s.completed > 0) s.top3_rate = static_cast<double>(top3) / s.completed;
  s.median_rank = median(ranks);
  s.sign_test_p = sign_test_p_value(below, below + above);
  return s;
}

SuiteSummary run_suite(const ExperimentConfig& config, const SuiteOptions& options) {
  const RoadNetwork network = build_map(config);

  struct Job {
    std::uint64_t seed;
    DispatchPolicy policy;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : config.seeds) {
    jobs.push_back({seed, DispatchPolicy::PeriodicReroute});
    jobs.push_back({seed, DispatchPolicy::StaticRoute});
  }

  std::vector<std::optional<ExperimentResult>> done(jobs.size());
  std::vector<std::optional<RunFailure>> failed(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      RunOptions run_options;
      run_options.check_invariants = options.check_invariants;
      try {
        done[i] = run_experiment(config, network, job.seed, job.policy, run_options);
      } catch (const Error& e) {
        failed[i] = RunFailure{job.seed, job.policy, e.kind(), e.what()};
      } catch (const std::logic_error& e) {
        failed[i] = RunFailure{job.seed, job.policy, "InvariantViolation", e.what()};
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads ? options.threads : default_thread_count(),
                                                          static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SuiteSummary summary;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) summary.results.push_back(std::move(*done[i]));
    if (failed[i]) summary.failures.push_back(std::move(*failed[i]));
  }
  auto key = [](std::uint64_t seed, DispatchPolicy p) { return std::pair{seed, static_cast<int>(p)}; };
  std::stable_sort(summary.results.begin(), summary.results.end(),
                   [&](const auto& a, const auto& b) { return key(a.seed, a.policy) < key(b.seed, b.policy); });
  std::stable_sort(summary.failures.begin(), summary.failures.end(),
                   [&](const auto& a, const auto& b) { return key(a.seed, a.policy) < key(b.seed, b.policy); });
  for (DispatchPolicy p : {DispatchPolicy::PeriodicReroute, DispatchPolicy::StaticRoute}) {
    summary.policies.push_back(summarize(p, summary.results, config.taxis));
  }
  return summary;
}

std::string results_csv(std::span<const ExperimentResult> results) {
  std::string out = "seed,policy,called_taxi_id,called_taxi_rank,n_arrived,t_called_arrival_s,t_end_s,wall_time_s\n";
  for (const auto& r : results) {
    out += std::to_string(r.seed) + "," + std::string(to_string(r.policy)) + "," + std::to_string(r.called_taxi_id) +
           "," + std::to_string(r.called_taxi_rank) + "," + std::to_string(r.arrivals.size()) + "," +
           fixed(r.t_called_arrival_s) + "," + fixed(r.t_end_s) + "," + fixed(r.wall_time_s) + "\n";
  }
  return out;
}

json result_json(const ExperimentResult& r) {
  json arrivals = json::array();
  for (const auto& a : r.arrivals) arrivals.push_back({{"taxi", a.taxi}, {"time_s", a.time_s}});
  json etas = json::object();
  for (const auto& [id, eta] : r.eta_by_taxi) etas[std::to_string(id)] = eta;
  return {{"seed", r.seed},
          {"policy", to_string(r.policy)},
          {"called_taxi_id", r.called_taxi_id},
          {"called_taxi_rank", r.called_taxi_rank},
          {"arrivals", arrivals},
          {"t_called_arrival_s", r.t_called_arrival_s},
          {"t_end_s", r.t_end_s},
          {"eta_by_taxi_s", etas},
          {"reroute_times_s", r.reroute_times},
          {"taxi_routes_after_dispatch", r.taxi_routes_after_dispatch},
          {"crash_road_time_before_s", r.crash_road_time_before_s},
          {"crash_road_time_after_60s_s",
           r.crash_road_time_after_60s ? json(*r.crash_road_time_after_60s) : json(nullptr)},
          {"ticks", r.ticks}};
}

json summary_json(const SuiteSummary& summary) {
  json policies = json::array();
  for (const auto& p : summary.policies) {
    policies.push_back({{"policy", to_string(p.policy)},
                        {"completed", p.completed},
                        {"rank_histogram", p.histogram},
                        {"top3_rate", p.top3_rate},
                        {"median_rank", p.median_rank},
                        {"random_median_rank", p.random_median_rank},
                        {"sign_test_p", p.sign_test_p}});
  }
  json runs = json::array();
  for (const auto& r : summary.results) runs.push_back(result_json(r));
  json failures = json::array();
  for (const auto& f : summary.failures) {
    failures.push_back({{"seed", f.seed}, {"policy", to_string(f.policy)}, {"kind", f.kind}, {"message", f.message}});
  }
  return {{"kind", "summary"}, {"policies", policies}, {"runs", runs}, {"failures", failures}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_suite_outputs(const SuiteSummary& summary, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "results.csv", results_csv(summary.results));
  write_text(dir / "summary.json", summary_json(summary).dump(2) + "\n");
}

}  // namespace taxisim
