#pragma once

#include <limits>

namespace taxisim {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class UnitMode {
  // Speeds converted to km/s inside the braking and stopping terms.
  Dimensional,
  // Every term evaluated in km/h as written, with no unit conversion.
  Literal,
};

struct IdmParams {
  double time_head_away_s = 1.5;
  double dist_gap_km = 0.002;
  double max_acceleration = 0.001;  // km/s^2
  double max_deceleration = 0.003;  // km/s^2
  UnitMode unit_mode = UnitMode::Dimensional;
};

struct DriverContext {
  double speed_kmh = 0.0;
  double lane_speed_limit_kmh = 60.0;
  double front_gap_km = kInfinity;
  double delta_speed_kmh = 0.0;  // own minus front
  // Infinity when no stop line applies.
  double stop_line_distance_km = kInfinity;
  bool must_stop = false;
};

struct AdvanceResult {
  double new_speed_kmh = 0.0;
  double moving_distance_km = 0.0;
};

// IDM accelerating factor in km/s^2, rounded to 10 decimal places. Can be
// negative; a zero gap to the front car or stop line yields the lowest double.
double acceleration_factor(const DriverContext& ctx, const IdmParams& params);

// Speed update clamped to [0, limit]; displacement uses the speed at the start
// of the step and never exceeds `front_gap_km`.
AdvanceResult advance(double speed_kmh, double accel, double dt_s, double lane_speed_limit_kmh,
                      double front_gap_km = kInfinity);

struct LaneChangeParams {
  double speed_margin = 1.05;
  double safe_gap_km = 0.002;
  double cooldown_s = 5.0;
  // Lane average speed looks this far ahead of the driver.
  double lookahead_km = 0.1;
};

enum class LaneDecision { Stay, Switch };

LaneDecision lane_change_decision(double own_lane_avg_speed_kmh, double other_lane_avg_speed_kmh,
                                  bool has_front, double target_gap_ahead_km,
                                  double target_gap_behind_km, double cooldown_remaining_s,
                                  const LaneChangeParams& params = {});

}  // namespace taxisim
