#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

// Exits per hour over (now - w, now] with w = min(window, now - start).
double metric_outflow(const ExitLog& exits, double now, double window = 500.0, double start = 0.0);

// Consecutive vehicles from the end of `edge` backward below the standstill speed.
int metric_queue_length(const World& world, int edge, double standstill_speed = 0.3);

// Mean over samples, skipping steps without vehicles (NaN entries).
double metric_avg_velocity(std::span<const double> step_means);

double mean_velocity(const World& world);

struct TimeSpacePoint {
  double time = 0.0;
  VehicleId id = 0;
  // Position along the vehicle's route (front bumper).
  double position = 0.0;
  double velocity = 0.0;
};

// Appends the current world to a long-format time-space table.
void append_time_space(const World& world, std::vector<TimeSpacePoint>& table);

struct WaveDetection {
  bool fired = false;
  double first_time = 0.0;
  VehicleId first_vehicle = 0;
  // Slope of the minimum-velocity locus in m/s; negative means backward travel.
  double drift = 0.0;
  bool backward() const { return fired && drift < 0.0; }
};

struct WaveDetectorParams {
  double threshold = 2.0;
  // Seconds after the first firing used to fit the locus drift.
  double fit_window = 100.0;
};

// Scans a closed-loop time-space table ordered by time. A vehicle arms once it
// exceeds the threshold and fires when an armed vehicle drops below it.
WaveDetection detect_wave(std::span<const TimeSpacePoint> table, double loop_length,
                          const WaveDetectorParams& params = {});

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

// Population standard deviation.
Summary summarize(std::span<const double> values);
std::string format_mean_std(const Summary& s, int digits = 2);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mixtraffic
