#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

inline constexpr int kImageSide = 84;
inline constexpr int kImagePixels = kImageSide * kImageSide;

enum class ObsMode { image, precise, position_only };
enum class CenterRule { per_rv, junction };

std::string to_string(ObsMode mode);
ObsMode obs_mode_from_string(std::string_view name);

struct Palette {
  std::uint8_t background = 0;
  std::uint8_t road = 85;
  std::uint8_t hv = 170;
  std::uint8_t rv = 255;
};

struct ObservationSpec {
  ObsMode mode = ObsMode::image;
  std::optional<double> mask_radius;
  double view_side = 57.5;
  int stack_size = 1;
  CenterRule center_rule = CenterRule::per_rv;
  Palette palette;
  // Precise intersection vector: vehicles kept per approach.
  int intersection_vehicles = 6;
  // Precise figure-eight vector: expected population.
  int figure_eight_vehicles = 14;

  double meters_per_pixel() const { return view_side / kImageSide; }
  void validate() const;
};

ObservationSpec default_observation_spec(EnvKind kind, ObsMode mode = ObsMode::image);

struct BevImage {
  std::array<std::uint8_t, kImagePixels> pixels{};
  double meters_per_pixel = 0.0;
  Vec2 center;

  std::uint8_t at(int row, int col) const { return pixels[row * kImageSide + col]; }
  // World position of a pixel center; row 0 is the top (largest y).
  Vec2 pixel_center(int row, int col) const;
};

// Static, world-axis-aligned raster of the neighbourhood of `center`. RVs
// holding an agent slot are drawn at RV intensity, every other vehicle at HV
// intensity.
BevImage render_bev(const World& world, Vec2 center, const ObservationSpec& spec);

struct Observation {
  // Image stacks: stack_size x 84 x 84 bytes, slot-major then row-major.
  std::vector<std::uint8_t> image;
  int stack = 0;
  std::vector<double> vector;

  bool is_image() const { return stack > 0; }
  bool operator==(const Observation&) const = default;
};

// Midpoint of a vehicle body in world coordinates.
Vec2 vehicle_center(const World& world, const VehicleState& vehicle);

// One slice per agent slot; empty slots are all background.
Observation stack_rv_observations(const World& world, const ObservationSpec& spec);

// Bumper gap from a vehicle to the next vehicle ahead on its path.
Neighbor vehicle_leader(const World& world, const LaneOccupancy& occ, int vehicle, const DynamicsParams& params);

inline constexpr double kMissingGap = 1000.0;

std::vector<double> precise_ring(const World& world, const DynamicsParams& params);
std::vector<double> precise_figure_eight(const World& world, int expected_vehicles = 14);
std::vector<double> precise_intersection(const World& world, int per_approach = 6);
std::vector<double> precise_merge(const World& world, const DynamicsParams& params, int max_rvs = 5);
// Per segment [mean HV position, mean HV velocity, mean RV position, mean RV
// velocity], then outflow over the trailing 20 s in vehicles/hour.
std::vector<double> precise_bottleneck(const World& world);
std::vector<double> position_only_ring(const World& world, const DynamicsParams& params);

// Observation for the configured mode.
Observation observe(const World& world, const ObservationSpec& spec, const DynamicsParams& params, int max_agents);

// Length of the precise or position-only vector for an environment.
std::size_t vector_length(EnvKind kind, const ObservationSpec& spec, int max_agents);

// Route position of a vehicle's front bumper along its own route.
double route_position(const World& world, const VehicleState& vehicle);

}  // namespace mixtraffic
