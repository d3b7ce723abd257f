#include "mixtraffic/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

void RewardParams::validate() const {
  for (double x : {ring_alpha, fig8_v_des, intersection_gain, intersection_eps, merge_v_des, merge_h_max, merge_alpha,
                   headway_min_speed, standstill_speed}) {
    if (!(x >= 0.0)) throw ConfigError("reward parameters must be non-negative", "reward");
  }
  if (!(bottleneck_window > 0.0)) throw ConfigError("outflow window must be positive", "reward.bottleneck_window");
  if (ring_vehicles < 1) throw ConfigError("ring vehicle count must be positive", "reward.ring_vehicles");
}

double reward_ring(std::span<const double> velocities, double rv_accel, const RewardParams& p) {
  if (static_cast<int>(velocities.size()) != p.ring_vehicles) {
    throw LayoutError("ring reward expects " + std::to_string(p.ring_vehicles) + " velocities, got " +
                      std::to_string(velocities.size()));
  }
  const double mean = std::accumulate(velocities.begin(), velocities.end(), 0.0) / velocities.size();
  return mean - p.ring_alpha * std::abs(rv_accel);
}

double reward_desired_velocity(std::span<const double> velocities, double v_des) {
  if (velocities.empty()) return 0.0;
  const double max_norm = v_des * std::sqrt(static_cast<double>(velocities.size()));
  if (max_norm <= 0.0) return 0.0;
  double dev = 0.0;
  for (double v : velocities) dev += (v_des - v) * (v_des - v);
  return std::max(max_norm - std::sqrt(dev), 0.0) / max_norm;
}

double reward_intersection(double t, std::span<const double> velocities, std::span<const double> limits,
                           int standstills, const RewardParams& p) {
  if (velocities.size() != limits.size()) throw LayoutError("one speed limit per vehicle is required");
  double delay = 0.0;
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    if (!(limits[i] > 0.0)) throw DomainError("speed limits must be positive");
    delay += (limits[i] - velocities[i]) / limits[i];
  }
  return -t * delay / (velocities.size() + p.intersection_eps) - p.intersection_gain * standstills;
}

double reward_merge(std::span<const double> velocities, std::span<const double> rv_headways, const RewardParams& p) {
  double penalty = 0.0;
  for (double h : rv_headways) penalty += std::max(p.merge_h_max - h, 0.0);
  return reward_desired_velocity(velocities, p.merge_v_des) - p.merge_alpha * penalty;
}

double reward_bottleneck(const ExitLog& exits, double now, double window) {
  if (!(window > 0.0)) throw DomainError("outflow window must be positive");
  return exits.count_window(now, window) * 3600.0 / window;
}

double headway(double gap, double speed, double min_speed) { return gap / std::max(speed, min_speed); }

int count_standstill(std::span<const double> velocities, double threshold) {
  return static_cast<int>(std::count_if(velocities.begin(), velocities.end(), [&](double v) { return v < threshold; }));
}

}  // namespace mixtraffic
