#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/demand.hpp"
#include "mixtraffic/observation.hpp"
#include "mixtraffic/rewards.hpp"

namespace mixtraffic {

inline constexpr const char* kVersion = "1.0.0";

struct NetworkParams {
  double circumference = 260.0;
  // When set, each reset draws the circumference (or radius) uniformly from it.
  std::optional<std::array<double, 2>> circumference_range;
  double radius = 25.0;
  std::optional<std::array<double, 2>> radius_range;
  IntersectionGeometry intersection;
  MergeGeometry merge;
  BottleneckGeometry bottleneck;
};

struct EpisodeConfig {
  EnvKind env = EnvKind::ring;
  std::uint64_t seed = 0;
  int horizon = 3000;
  int warmup = 3000;
  ActionSpec action;
  ObservationSpec observation;
  RewardParams reward;
  DynamicsParams dynamics;
  NetworkParams network;
  PopulationSpec population;
  std::vector<InflowSpec> inflows;
  SpawnOptions spawn;
  // Action slots exposed to the policy.
  int max_agents = 1;
  // Every vehicle is human-driven (baselines).
  bool all_hv = false;

  void validate() const;
};

EpisodeConfig default_config(EnvKind env);

// Merge benchmark inflow pairs (highway, each ramp) in vehicles/hour.
std::vector<std::array<double, 2>> merge_inflow_grid();
void set_merge_inflows(EpisodeConfig& config, double highway, double ramp);
void set_bottleneck_inflow(EpisodeConfig& config, double rate);

nlohmann::json to_json(const EpisodeConfig& config);
// Overlays `doc` on the defaults of doc["env"]. Unknown keys are rejected.
EpisodeConfig config_from_json(const nlohmann::json& doc);
EpisodeConfig load_config(const std::filesystem::path& path);

// Canonical text: the fully resolved config as compact sorted JSON.
std::string canonical_text(const EpisodeConfig& config);
std::uint64_t config_hash(const EpisodeConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mixtraffic
