#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

struct StepInfo {
  // NaN when the network is empty.
  double mean_velocity = 0.0;
  // Exits per hour over the trailing 500 s (or the elapsed time if shorter).
  double outflow = 0.0;
  bool collision = false;
  int vehicles = 0;
  // RVs holding an agent slot.
  int controlled = 0;

  bool operator==(const StepInfo& o) const;
};

struct StepRecord {
  std::int64_t step = 0;  // world step after integration
  double time = 0.0;
  bool control = false;   // false during warmup
  std::vector<VehicleState> vehicles;
  std::vector<double> actions;
  double reward = 0.0;
  StepInfo info;

  bool operator==(const StepRecord&) const = default;
};

struct RolloutHeader {
  std::string version;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  // Circumference (ring) or radius (figure eight) actually used; 0 otherwise.
  double network_scale = 0.0;
  // Recording options: per-step vehicle states and warmup steps.
  bool states = true;
  bool warmup = false;
  nlohmann::json config;

  bool operator==(const RolloutHeader&) const = default;
};

struct RolloutRecord {
  RolloutHeader header;
  // Vehicles present right after reset, before the first recorded step.
  std::vector<VehicleState> initial;
  std::vector<StepRecord> steps;
  ExitLog exits;

  bool operator==(const RolloutRecord&) const = default;
};

nlohmann::json vehicle_to_json(const VehicleState& v);
VehicleState vehicle_from_json(const nlohmann::json& row);
nlohmann::json info_to_json(const StepInfo& info);
StepInfo info_from_json(const nlohmann::json& doc);

// JSON lines: header, one line per step, then the exit log.
void write_rollout(std::ostream& out, const RolloutRecord& record);
void write_rollout(const std::filesystem::path& path, const RolloutRecord& record);
RolloutRecord read_rollout(std::istream& in);
RolloutRecord read_rollout(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t hash);

}  // namespace mixtraffic
