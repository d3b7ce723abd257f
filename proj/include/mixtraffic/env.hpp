#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mixtraffic/config.hpp"
#include "mixtraffic/metrics.hpp"
#include "mixtraffic/rollout.hpp"

namespace mixtraffic {

// Independent generator per purpose, derived from the episode seed.
enum class RngStream { demand = 0, noise = 1, network = 2 };
Rng stream_rng(std::uint64_t seed, RngStream stream);

// Circumference or radius for this episode; drawn from the configured range if any.
double sample_network_scale(const EpisodeConfig& config, Rng& rng);
std::shared_ptr<const RoadNetwork> build_network(const EpisodeConfig& config, double scale);

struct EnvOptions {
  // Build observations (skipped by baselines for speed).
  bool observe = true;
  bool record = false;
  bool record_states = true;
  bool record_warmup = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

class Environment {
 public:
  explicit Environment(EpisodeConfig config, EnvOptions options = {});

  // Builds the network and population, runs the warmup under HV control and
  // returns the first controlled observation.
  Observation reset();
  Observation reset(std::uint64_t seed);

  // actions.size() must equal action_arity(); entries of empty slots are ignored.
  StepResult step(std::span<const double> actions);

  const World& world() const { return world_; }
  const EpisodeConfig& config() const { return config_; }
  int action_arity() const { return config_.max_agents; }
  bool done() const { return done_; }
  int control_steps() const { return control_steps_; }
  double network_scale() const { return scale_; }

  Observation observation() const;
  // Reward of the current snapshot; step() returns the same value.
  double current_reward() const;
  StepInfo current_info() const;
  // Noiseless IDM commands for every slot, in the units of the action space.
  std::vector<double> hv_mimic_actions() const;
  // Per-step mean velocity of the controlled phase (NaN for empty steps).
  const std::vector<double>& step_means() const { return step_means_; }

  const RolloutRecord& record() const { return record_; }
  RolloutRecord take_record() { return std::move(record_); }

 private:
  void advance(std::span<const double> actions, bool control);
  void assign_slots();
  void push_record(std::span<const double> actions, bool control, double reward, const StepInfo& info);

  EpisodeConfig config_;
  EnvOptions options_;
  World world_;
  Spawner spawner_;
  Rng demand_rng_;
  Rng noise_rng_;
  double scale_ = 0.0;
  int control_steps_ = 0;
  bool done_ = false;
  bool started_ = false;
  std::vector<double> slot_accel_;
  std::vector<double> step_means_;
  RolloutRecord record_;
};

using Policy = std::function<std::vector<double>(const Observation&, const Environment&)>;

Policy zero_policy();
Policy hv_mimic_policy();

struct EpisodeSummary {
  double avg_velocity = 0.0;
  // Outflow over the last 500 s of the episode, vehicles/hour.
  double outflow = 0.0;
  // East plus west approach queues at the end (intersection only).
  int queue_ew = 0;
  bool collision = false;
  int steps = 0;
  double total_reward = 0.0;
};

struct EpisodeResult {
  EpisodeSummary summary;
  RolloutRecord record;
};

EpisodeSummary summarize_episode(const Environment& env, double total_reward);

// Policy exceptions are rethrown as PolicyError naming the step index.
EpisodeResult run_episode(const EpisodeConfig& config, const Policy& policy, EnvOptions options = {});

// Steps a fresh environment through the recorded actions.
RolloutRecord replay(const RolloutRecord& record);

// Evaluation metric for an environment: outflow for the bottleneck, mean velocity otherwise.
std::string sweep_metric_name(EnvKind kind);
double sweep_metric(const EpisodeSummary& summary, EnvKind kind);

enum class SweepParameter { circumference, radius, merge_inflow, bottleneck_inflow };
SweepParameter sweep_parameter_from_string(std::string_view name);
std::string to_string(SweepParameter p);

struct SweepPoint {
  // Circumference, radius or inflow; merge points carry the ramp rate as well.
  double value = 0.0;
  double ramp = 0.0;
};

struct SweepRow {
  SweepPoint point;
  Summary summary;
};

EpisodeConfig apply_sweep_point(const EpisodeConfig& base, SweepParameter parameter, const SweepPoint& point);

// 10-seed style evaluation of each grid point with the HV-mimic policy (or all
// HVs when base.all_hv is set).
std::vector<SweepRow> run_density_sweep(const EpisodeConfig& base, SweepParameter parameter,
                                        const std::vector<SweepPoint>& grid, std::span<const std::uint64_t> seeds);

}  // namespace mixtraffic
