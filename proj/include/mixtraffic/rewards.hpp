#pragma once

#include <span>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

struct RewardParams {
  double ring_alpha = 4.0;
  int ring_vehicles = 22;
  double fig8_v_des = 10.0;
  double intersection_gain = 0.2;
  double intersection_eps = 1e-6;
  double merge_v_des = 10.0;
  double merge_h_max = 1.0;
  double merge_alpha = 0.1;
  double bottleneck_window = 10.0;
  // Floor on the speed used to turn a gap into a headway.
  double headway_min_speed = 0.1;
  double standstill_speed = 0.3;

  void validate() const;
};

// Mean velocity minus alpha times the RV's absolute acceleration.
double reward_ring(std::span<const double> velocities, double rv_accel, const RewardParams& p);

// max(|v_des| - |v_des - V|, 0) / |v_des| with v_des broadcast over V.
double reward_desired_velocity(std::span<const double> velocities, double v_des);

// Delay and standstill penalty; t is elapsed seconds of the episode.
double reward_intersection(double t, std::span<const double> velocities, std::span<const double> limits,
                           int standstills, const RewardParams& p);

double reward_merge(std::span<const double> velocities, std::span<const double> rv_headways, const RewardParams& p);

// Exits in (now - window, now] in vehicles/hour.
double reward_bottleneck(const ExitLog& exits, double now, double window = 10.0);

double headway(double gap, double speed, double min_speed = 0.1);

int count_standstill(std::span<const double> velocities, double threshold = 0.3);

}  // namespace mixtraffic
