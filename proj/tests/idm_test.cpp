#include "taxisim/idm.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

namespace taxisim {
namespace {

constexpr double kTol = 1e-9;

// Independent evaluation of the accelerating factor (Dimensional units).
double reference_factor(double v, double limit, double gap, double dv, double stop, bool must_stop) {
  const double a = 0.001, b = 0.003, t_head = 1.5, s0 = 0.002;
  const double free = std::pow(v / limit, 4);
  double busy = 0.0;
  if (std::isfinite(gap)) {
    const double vs = v / 3600.0;
    const double dyn = vs * t_head + vs * (dv / 3600.0) / (2 * std::sqrt(a * b));
    const double safe = s0 + std::max(0.0, dyn);
    busy = (safe / gap) * (safe / gap);
  }
  double inter = 0.0;
  if (must_stop) {
    const double vs = v / 3600.0;
    const double safe = s0 / 2 + vs * t_head + vs * vs / (2 * b);
    inter = (safe / stop) * (safe / stop);
  }
  return a * (1 - free - busy - inter);
}

TEST(AccelerationFactor, FreeRoadFromRest) {
  DriverContext ctx;
  ctx.speed_kmh = 0.0;
  EXPECT_EQ(acceleration_factor(ctx, IdmParams{}), 0.001);
}

TEST(AccelerationFactor, AtSpeedLimit) {
  DriverContext ctx;
  ctx.speed_kmh = 60.0;
  ctx.lane_speed_limit_kmh = 60.0;
  EXPECT_EQ(acceleration_factor(ctx, IdmParams{}), 0.0);
}

TEST(AccelerationFactor, FollowingAtEqualSpeed) {
  DriverContext ctx;
  ctx.speed_kmh = 36.0;
  ctx.front_gap_km = 0.034;
  ctx.delta_speed_kmh = 0.0;
  for (UnitMode mode : {UnitMode::Dimensional, UnitMode::Literal}) {
    IdmParams p;
    p.unit_mode = mode;
    EXPECT_NEAR(acceleration_factor(ctx, p), 0.0006204, kTol);
  }
}

TEST(AccelerationFactor, StopLineDimensional) {
  DriverContext ctx;
  ctx.speed_kmh = 36.0;
  ctx.must_stop = true;
  // Exactly the safe stopping distance at 10 m/s.
  ctx.stop_line_distance_km = 0.001 + 0.015 + 0.01 * 0.01 / 0.006;
  EXPECT_NEAR(acceleration_factor(ctx, IdmParams{}), -0.0001296, kTol);
}

TEST(AccelerationFactor, StopLineIgnoredWhenGreen) {
  DriverContext ctx;
  ctx.speed_kmh = 36.0;
  ctx.stop_line_distance_km = 0.01;
  ctx.must_stop = false;
  EXPECT_NEAR(acceleration_factor(ctx, IdmParams{}), 0.001 * (1 - 0.1296), kTol);
}

TEST(AccelerationFactor, ZeroGapIsLargeNegative) {
  DriverContext ctx;
  ctx.speed_kmh = 20.0;
  ctx.front_gap_km = 0.0;
  EXPECT_EQ(acceleration_factor(ctx, IdmParams{}), std::numeric_limits<double>::lowest());
  DriverContext stop;
  stop.must_stop = true;
  stop.stop_line_distance_km = 0.0;
  EXPECT_EQ(acceleration_factor(stop, IdmParams{}), std::numeric_limits<double>::lowest());
}

TEST(AccelerationFactor, MatchesReferenceOnRandomContexts) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> speed(0.0, 60.0), gap(0.001, 0.5), dv(-40.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    DriverContext ctx;
    ctx.speed_kmh = speed(rng);
    ctx.front_gap_km = i % 3 == 0 ? kInfinity : gap(rng);
    ctx.delta_speed_kmh = dv(rng);
    ctx.must_stop = i % 2 == 0;
    ctx.stop_line_distance_km = gap(rng);
    const double expected = reference_factor(ctx.speed_kmh, 60.0, ctx.front_gap_km, ctx.delta_speed_kmh,
                                             ctx.stop_line_distance_km, ctx.must_stop);
    EXPECT_NEAR(acceleration_factor(ctx, IdmParams{}), expected, 1e-9 + 1e-12 * std::abs(expected));
  }
}

TEST(AccelerationFactor, NeverExceedsMaxAcceleration) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> speed(0.0, 60.0), gap(1e-4, 1.0), dv(-60.0, 60.0);
  for (int i = 0; i < 5000; ++i) {
    DriverContext ctx;
    ctx.speed_kmh = speed(rng);
    ctx.front_gap_km = gap(rng);
    ctx.delta_speed_kmh = dv(rng);
    ctx.must_stop = (i & 1) != 0;
    ctx.stop_line_distance_km = gap(rng);
    EXPECT_LE(acceleration_factor(ctx, IdmParams{}), 0.001);
  }
}

TEST(AccelerationFactor, NonIncreasingInClosingSpeed) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> speed(0.0, 60.0), gap(0.001, 0.3), dv(-60.0, 60.0);
  for (int i = 0; i < 2000; ++i) {
    DriverContext lo;
    lo.speed_kmh = speed(rng);
    lo.front_gap_km = gap(rng);
    double a = dv(rng), b = dv(rng);
    if (a > b) std::swap(a, b);
    lo.delta_speed_kmh = a;
    DriverContext hi = lo;
    hi.delta_speed_kmh = b;
    EXPECT_GE(acceleration_factor(lo, IdmParams{}), acceleration_factor(hi, IdmParams{}))
        << "speed " << lo.speed_kmh << " gap " << lo.front_gap_km << " dv " << a << " vs " << b;
  }
}

TEST(Advance, AcceleratesFromThirtySix) {
  const AdvanceResult r = advance(36.0, 0.001, 0.3, 60.0);
  EXPECT_NEAR(r.new_speed_kmh, 37.08, kTol);
  EXPECT_NEAR(r.moving_distance_km, 0.003045, kTol);
}

TEST(Advance, ClampsAtLimit) {
  EXPECT_EQ(advance(59.9, 0.001, 0.3, 60.0).new_speed_kmh, 60.0);
}

TEST(Advance, ClampsAtZero) {
  const AdvanceResult r = advance(1.0, -0.003, 0.3, 60.0);
  EXPECT_EQ(r.new_speed_kmh, 0.0);
  EXPECT_NEAR(r.moving_distance_km, 0.0, kTol);
}

TEST(Advance, CappedByFrontGap) {
  // 36 km/h for 0.3 s with a = 0 covers 0.003 km.
  const AdvanceResult r = advance(36.0, 0.0, 0.3, 60.0, 0.001);
  EXPECT_NEAR(r.moving_distance_km, 0.001, kTol);
}

TEST(Advance, BoundsHoldForRandomInputs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> speed(0.0, 60.0), acc(-0.01, 0.001), gap(0.0, 0.01);
  for (int i = 0; i < 5000; ++i) {
    const double v = speed(rng), a = acc(rng), g = gap(rng);
    const AdvanceResult r = advance(v, a, 0.3, 60.0, g);
    EXPECT_GE(r.new_speed_kmh, 0.0);
    EXPECT_LE(r.new_speed_kmh, 60.0);
    EXPECT_GE(r.moving_distance_km, 0.0);
    EXPECT_LE(r.moving_distance_km, g);
  }
}

double time_to_reach(double target_kmh, double dt) {
  double v = 0.0, t = 0.0;
  while (v < target_kmh && t < 600.0) {
    DriverContext ctx;
    ctx.speed_kmh = v;
    v = advance(v, acceleration_factor(ctx, IdmParams{}), dt, 60.0).new_speed_kmh;
    t += dt;
  }
  return t;
}

TEST(Advance, CoarseStepTracksFineIntegration) {
  const double coarse = time_to_reach(55.0, 0.3);
  const double fine = time_to_reach(55.0, 0.01);
  EXPECT_LT(std::abs(coarse - fine) / fine, 0.05);
}

TEST(LaneChange, NoFrontCarStays) {
  EXPECT_EQ(lane_change_decision(20, 40, false, 0.05, 0.05, 0.0), LaneDecision::Stay);
}

TEST(LaneChange, FasterLaneWithGapsSwitches) {
  EXPECT_EQ(lane_change_decision(20, 40, true, 0.05, 0.05, 0.0), LaneDecision::Switch);
}

TEST(LaneChange, BelowMarginStays) {
  EXPECT_EQ(lane_change_decision(20, 20.5, true, 0.05, 0.05, 0.0), LaneDecision::Stay);
}

TEST(LaneChange, CooldownOrTightGapStays) {
  EXPECT_EQ(lane_change_decision(20, 40, true, 0.05, 0.05, 1.0), LaneDecision::Stay);
  EXPECT_EQ(lane_change_decision(20, 40, true, 0.001, 0.05, 0.0), LaneDecision::Stay);
  EXPECT_EQ(lane_change_decision(20, 40, true, 0.05, 0.0015, 0.0), LaneDecision::Stay);
}

}  // namespace
}  // namespace taxisim
