#pragma once

// Independent oracles and fixtures shared by the unit tests and the
// acceptance runner. Oracles restate the closed forms on their own instead of
// calling the library, so a library bug cannot hide behind its own output.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mixtraffic/config.hpp"
#include "mixtraffic/dynamics.hpp"
#include "mixtraffic/env.hpp"
#include "mixtraffic/io.hpp"
#include "mixtraffic/network.hpp"
#include "mixtraffic/observation.hpp"

namespace oracle {

// Textbook IDM with default parameters.
inline double idm(double v, double gap, double leader_v, double v0 = 30.0, double T = 1.0, double a = 1.0,
                  double b = 1.5, double delta = 4.0, double s0 = 2.0) {
  const double s_star = s0 + std::max(0.0, v * T + v * (v - leader_v) / (2.0 * std::sqrt(a * b)));
  return a * (1.0 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
}

// Root of a monotone function on [lo, hi] by plain bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
  const bool rising = f(hi) > f(lo);
  for (int k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) > 0.0) == rising) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Gap at which a follower at speed v behind an equally fast leader is unaccelerated.
inline double equilibrium_gap(double v) {
  return bisect([v](double s) { return idm(v, s, v); }, 0.5, 500.0);
}

// Speed at which a platoon with bumper gap s is unaccelerated.
inline double equilibrium_speed(double gap) {
  return bisect([gap](double v) { return idm(v, gap, v); }, 0.0, 30.0);
}

// Accumulator emission count: one vehicle per unit of rate * elapsed / 3600.
inline int emitted_by(double rate, double duration, double dt) {
  double acc = 0.0;
  int count = 0;
  const int steps = static_cast<int>(std::llround(duration / dt));
  for (int k = 0; k < steps; ++k) {
    acc += rate * dt / 3600.0;
    while (acc >= 1.0 - 1e-9) {
      acc -= 1.0;
      ++count;
    }
  }
  return count;
}

// Pixel centers of an 84x84 view (row 0 on top) inside a rotated rectangle.
inline int rect_pixel_count(mixtraffic::Vec2 view_center, double mpp, mixtraffic::Vec2 mid, double heading,
                            double length, double width) {
  int count = 0;
  const double c = std::cos(heading), s = std::sin(heading);
  for (int row = 0; row < 84; ++row) {
    for (int col = 0; col < 84; ++col) {
      const double x = view_center.x + (col + 0.5 - 42.0) * mpp - mid.x;
      const double y = view_center.y + (42.0 - row - 0.5) * mpp - mid.y;
      const double along = x * c + y * s;
      const double across = -x * s + y * c;
      if (std::abs(along) <= length / 2 && std::abs(across) <= width / 2) ++count;
    }
  }
  return count;
}

}  // namespace oracle

namespace fixture {

inline const std::filesystem::path kGoldenDir = MIXTRAFFIC_GOLDEN_DIR;

// Set MIXTRAFFIC_UPDATE_GOLDEN=1 to rewrite golden files instead of comparing.
inline bool updating_goldens() {
  const char* flag = std::getenv("MIXTRAFFIC_UPDATE_GOLDEN");
  return flag != nullptr && std::string(flag) == "1";
}

// Returns true when `bytes` equals the stored golden file (or after writing it).
inline bool matches_golden(const std::string& name, const std::string& bytes) {
  const auto path = kGoldenDir / name;
  if (updating_goldens()) {
    mixtraffic::write_file(path, bytes);
    return true;
  }
  if (!std::filesystem::exists(path)) return false;
  return mixtraffic::read_file(path) == bytes;
}

inline std::shared_ptr<const mixtraffic::RoadNetwork> default_network(mixtraffic::EnvKind kind) {
  const auto config = mixtraffic::default_config(kind);
  const double scale = kind == mixtraffic::EnvKind::ring           ? config.network.circumference
                       : kind == mixtraffic::EnvKind::figure_eight ? config.network.radius
                                                                   : 0.0;
  return mixtraffic::build_network(config, scale);
}

inline const std::vector<mixtraffic::EnvKind>& all_kinds() {
  static const std::vector<mixtraffic::EnvKind> kinds{mixtraffic::EnvKind::ring, mixtraffic::EnvKind::figure_eight,
                                                      mixtraffic::EnvKind::intersection, mixtraffic::EnvKind::merge,
                                                      mixtraffic::EnvKind::bottleneck};
  return kinds;
}

// Random vehicles on random lanes; about half are RVs and the first
// `slotted` RVs hold agent slots 0, 1, ...
inline mixtraffic::World fuzz_world(mixtraffic::EnvKind kind, mixtraffic::Rng& rng, int slotted_cap) {
  using namespace mixtraffic;
  World world;
  world.network = default_network(kind);
  const auto& net = *world.network;
  std::uniform_int_distribution<int> count_dist(0, 30);
  std::uniform_int_distribution<int> edge_dist(0, static_cast<int>(net.edges.size()) - 1);
  std::uniform_int_distribution<int> class_dist(0, static_cast<int>(kVehicleClasses.size()) - 1);
  std::uniform_real_distribution<double> unit01(0.0, 1.0);
  const int n = count_dist(rng);
  int slot = 0;
  for (int i = 0; i < n; ++i) {
    VehicleState v;
    v.id = static_cast<VehicleId>(i);
    v.cls = kVehicleClasses[class_dist(rng)];
    v.length = class_length(v.cls);
    v.edge_id = edge_dist(rng);
    const auto& edge = net.edges[v.edge_id];
    v.lane_index = std::uniform_int_distribution<int>(0, edge.lane_count - 1)(rng);
    v.arc_pos = unit01(rng) * edge.length;
    v.velocity = unit01(rng) * 20.0;
    if (unit01(rng) < 0.5) {
      v.role = Role::rv;
      if (slot < slotted_cap) v.slot = slot++;
    }
    world.vehicles.push_back(v);
  }
  world.next_id = static_cast<VehicleId>(n);
  return world;
}

// Checks the raster invariants on `count` fuzzed worlds of one environment.
// Returns an empty string on success, otherwise the first violation.
inline std::string raster_invariant_violation(mixtraffic::EnvKind kind, int count, std::uint64_t seed) {
  using namespace mixtraffic;
  const auto config = default_config(kind);
  const ObservationSpec& spec = config.observation;
  Rng rng(seed);
  for (int trial = 0; trial < count; ++trial) {
    const World world = fuzz_world(kind, rng, config.max_agents);
    const Observation obs = stack_rv_observations(world, spec);
    const std::string where = to_string(kind) + " trial " + std::to_string(trial);
    if (obs.stack != spec.stack_size || obs.image.size() != static_cast<std::size_t>(spec.stack_size) * kImagePixels) {
      return where + ": wrong stack shape";
    }
    if (!(stack_rv_observations(world, spec) == obs)) return where + ": re-render differs";
    for (int s = 0; s < spec.stack_size; ++s) {
      const auto* slice = obs.image.data() + static_cast<std::size_t>(s) * kImagePixels;
      std::optional<Vec2> center;
      if (spec.center_rule == CenterRule::junction) {
        if (s == 0) center = world.network->junctions.front().center;
      } else {
        for (const auto& v : world.vehicles) {
          if (v.slot == s) center = vehicle_center(world, v);
        }
      }
      for (int p = 0; p < kImagePixels; ++p) {
        const std::uint8_t value = slice[p];
        if (value != 0 && value != 85 && value != 170 && value != 255) return where + ": off-palette pixel";
        if (!center) {
          if (value != 0) return where + ": padded slice " + std::to_string(s) + " is not background";
          continue;
        }
        if (!spec.mask_radius || value == 0) continue;
        const double mpp = spec.meters_per_pixel();
        const double dx = (p % kImageSide + 0.5 - kImageSide / 2.0) * mpp;
        const double dy = (kImageSide / 2.0 - p / kImageSide - 0.5) * mpp;
        if (std::hypot(dx, dy) > *spec.mask_radius) return where + ": pixel outside the mask";
      }
    }
  }
  return {};
}

// Observation after a short HV warmup; used for the golden images.
inline mixtraffic::Observation golden_observation(mixtraffic::EnvKind kind) {
  auto config = mixtraffic::default_config(kind);
  config.seed = 3;
  config.warmup = kind == mixtraffic::EnvKind::ring || kind == mixtraffic::EnvKind::figure_eight ? 200 : 400;
  mixtraffic::Environment env(config);
  return env.reset();
}

}  // namespace fixture
