#include "taxisim/idm.hpp"

#include <algorithm>
#include <cmath>

namespace taxisim {
namespace {

constexpr double kSecondsPerHour = 3600.0;
constexpr double kStopLineMargin = 0.001;  // km

// (numerator / distance)^2 with the zero-distance branch mapped to infinity.
double ratio_squared(double numerator, double distance) {
  if (std::isinf(distance)) return 0.0;
  if (distance > 0.0) {
    const double r = numerator / distance;
    return r * r;
  }
  return kInfinity;
}

double round_to_10_places(double x) { return std::round(x * 1e10) / 1e10; }

}  // namespace

double acceleration_factor(const DriverContext& ctx, const IdmParams& params) {
  const double v = ctx.speed_kmh;
  const bool literal = params.unit_mode == UnitMode::Literal;
  // Speed as used inside the braking terms.
  const double v_brake = literal ? v : v / kSecondsPerHour;
  const double dv_brake = literal ? ctx.delta_speed_kmh : ctx.delta_speed_kmh / kSecondsPerHour;

  const double speed_ratio = v / ctx.lane_speed_limit_kmh;
  const double free_road = std::pow(speed_ratio, 4);

  const double time_gap = v * params.time_head_away_s / kSecondsPerHour;
  const double break_gap =
      v_brake * dv_brake / (2.0 * std::sqrt(params.max_acceleration * params.max_deceleration));
  // The dynamic part of the desired gap never drops below zero, which keeps the
  // factor monotone in the closing speed.
  const double safe_distance = literal ? params.dist_gap_km + time_gap + break_gap
                                       : params.dist_gap_km + std::max(0.0, time_gap + break_gap);
  const double busy_road = ratio_squared(safe_distance, ctx.front_gap_km);

  double intersection = 0.0;
  if (ctx.must_stop) {
    const double safe_intersection =
        kStopLineMargin + time_gap + v_brake * v_brake / (2.0 * params.max_deceleration);
    intersection = ratio_squared(safe_intersection, ctx.stop_line_distance_km);
  }

  const double coeff = 1.0 - free_road - busy_road - intersection;
  if (!std::isfinite(coeff)) return std::numeric_limits<double>::lowest();
  return round_to_10_places(params.max_acceleration * coeff);
}

AdvanceResult advance(double speed_kmh, double accel, double dt_s, double lane_speed_limit_kmh,
                      double front_gap_km) {
  AdvanceResult out;
  out.new_speed_kmh = std::clamp(speed_kmh + accel * dt_s * kSecondsPerHour, 0.0, lane_speed_limit_kmh);
  const double step = std::max(speed_kmh * dt_s / kSecondsPerHour + 0.5 * accel * dt_s * dt_s, 0.0);
  out.moving_distance_km = std::min(front_gap_km, step);
  return out;
}

LaneDecision lane_change_decision(double own_lane_avg_speed_kmh, double other_lane_avg_speed_kmh,
                                  bool has_front, double target_gap_ahead_km,
                                  double target_gap_behind_km, double cooldown_remaining_s,
                                  const LaneChangeParams& params) {
  if (!has_front || cooldown_remaining_s > 0.0) return LaneDecision::Stay;
  if (target_gap_ahead_km < params.safe_gap_km || target_gap_behind_km < params.safe_gap_km) {
    return LaneDecision::Stay;
  }
  if (other_lane_avg_speed_kmh <= params.speed_margin * own_lane_avg_speed_kmh) return LaneDecision::Stay;
  return LaneDecision::Switch;
}

}  // namespace taxisim
