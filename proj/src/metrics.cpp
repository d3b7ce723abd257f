#include "mixtraffic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/observation.hpp"

namespace mixtraffic {

double metric_outflow(const ExitLog& exits, double now, double window, double start) {
  if (!(window > 0.0)) throw DomainError("outflow window must be positive");
  const double span = std::min(window, now - start);
  if (!(span > 0.0)) return 0.0;
  return exits.count_window(now, span) * 3600.0 / span;
}

int metric_queue_length(const World& world, int edge, double standstill_speed) {
  std::vector<const VehicleState*> on;
  for (const auto& v : world.vehicles) {
    if (v.edge_id == edge) on.push_back(&v);
  }
  std::sort(on.begin(), on.end(), [](const VehicleState* a, const VehicleState* b) {
    if (a->arc_pos != b->arc_pos) return a->arc_pos > b->arc_pos;
    return a->id < b->id;
  });
  int queue = 0;
  for (const VehicleState* v : on) {
    if (v->velocity >= standstill_speed) break;
    ++queue;
  }
  return queue;
}

double metric_avg_velocity(std::span<const double> step_means) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double m : step_means) {
    if (std::isnan(m)) continue;
    sum += m;
    ++n;
  }
  return n ? sum / n : 0.0;
}

double mean_velocity(const World& world) {
  if (world.vehicles.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& v : world.vehicles) sum += v.velocity;
  return sum / world.vehicles.size();
}

void append_time_space(const World& world, std::vector<TimeSpacePoint>& table) {
  for (const auto& v : world.vehicles) table.push_back({world.time, v.id, route_position(world, v), v.velocity});
}

WaveDetection detect_wave(std::span<const TimeSpacePoint> table, double loop_length, const WaveDetectorParams& params) {
  WaveDetection out;
  std::map<VehicleId, bool> armed;
  std::size_t fire_index = table.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& p = table[i];
    bool& a = armed[p.id];
    if (p.velocity > params.threshold) {
      a = true;
    } else if (a && p.velocity < params.threshold) {
      out.fired = true;
      out.first_time = p.time;
      out.first_vehicle = p.id;
      fire_index = i;
      break;
    }
  }
  if (!out.fired) return out;

  // Minimum-velocity locus per time stamp inside the fit window, unwrapped on the loop.
  std::vector<double> times, positions;
  const double until = out.first_time + params.fit_window;
  std::size_t i = fire_index;
  while (i > 0 && table[i - 1].time == table[fire_index].time) --i;
  while (i < table.size() && table[i].time <= until) {
    const double t = table[i].time;
    const TimeSpacePoint* slowest = &table[i];
    for (; i < table.size() && table[i].time == t; ++i) {
      if (table[i].velocity < slowest->velocity) slowest = &table[i];
    }
    double pos = slowest->position;
    if (!positions.empty()) {
      double delta = std::fmod(pos - positions.back(), loop_length);
      if (delta > loop_length / 2) delta -= loop_length;
      if (delta <= -loop_length / 2) delta += loop_length;
      pos = positions.back() + delta;
    }
    times.push_back(t);
    positions.push_back(pos);
  }
  if (times.size() >= 2) out.drift = ols_slope(times, positions);
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / values.size());
  return s;
}

std::string format_mean_std(const Summary& s, int digits) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f +/- %.*f", digits, s.mean, digits, s.stddev);
  return buf;
}

namespace {

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman needs two equal series of length >= 2");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs two equal series of length >= 2");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("slope needs distinct x values");
  return sxy / sxx;
}

}  // namespace mixtraffic
