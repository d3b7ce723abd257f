#include "mixtraffic/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

Rng stream_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

double sample_network_scale(const EpisodeConfig& config, Rng& rng) {
  const auto& n = config.network;
  auto draw = [&](double fixed, const std::optional<std::array<double, 2>>& range) {
    if (!range) return fixed;
    std::uniform_real_distribution<double> u((*range)[0], (*range)[1]);
    return u(rng);
  };
  switch (config.env) {
    case EnvKind::ring: return draw(n.circumference, n.circumference_range);
    case EnvKind::figure_eight: return draw(n.radius, n.radius_range);
    default: return 0.0;
  }
}

std::shared_ptr<const RoadNetwork> build_network(const EpisodeConfig& config, double scale) {
  const auto& n = config.network;
  switch (config.env) {
    case EnvKind::ring: return std::make_shared<const RoadNetwork>(build_ring(scale));
    case EnvKind::figure_eight: return std::make_shared<const RoadNetwork>(build_figure_eight(scale));
    case EnvKind::intersection: return std::make_shared<const RoadNetwork>(build_intersection(n.intersection));
    case EnvKind::merge: return std::make_shared<const RoadNetwork>(build_merge(n.merge));
    case EnvKind::bottleneck: return std::make_shared<const RoadNetwork>(build_bottleneck(n.bottleneck));
  }
  throw ConfigError("unknown environment", "env");
}

Environment::Environment(EpisodeConfig config, EnvOptions options)
    : config_(std::move(config)), options_(options) {
  config_.validate();
}

Observation Environment::reset() { return reset(config_.seed); }

Observation Environment::reset(std::uint64_t seed) {
  config_.seed = seed;
  Rng network_rng = stream_rng(seed, RngStream::network);
  demand_rng_ = stream_rng(seed, RngStream::demand);
  noise_rng_ = stream_rng(seed, RngStream::noise);
  scale_ = sample_network_scale(config_, network_rng);

  world_ = World{};
  world_.network = build_network(config_, scale_);
  if (world_.network->closed) {
    PopulationSpec pop = config_.population;
    if (config_.all_hv) pop.rv_count = 0;
    world_.vehicles = init_closed_population(*world_.network, pop, demand_rng_, config_.dynamics.idm.s0);
    world_.next_id = static_cast<VehicleId>(world_.vehicles.size());
    spawner_ = Spawner{};
  } else {
    std::vector<InflowSpec> inflows = config_.inflows;
    if (config_.all_hv) {
      for (auto& in : inflows) in.rv_penetration = 0.0;
    }
    spawner_ = Spawner(std::move(inflows), config_.spawn);
  }
  control_steps_ = 0;
  done_ = false;
  started_ = true;
  slot_accel_.assign(config_.max_agents, 0.0);
  step_means_.clear();
  record_ = RolloutRecord{};
  if (options_.record) {
    record_.header = {kVersion, config_hash(config_), seed, scale_, options_.record_states, options_.record_warmup,
                      to_json(config_)};
  }
  assign_slots();
  if (options_.record) record_.initial = world_.vehicles;

  for (int k = 0; k < config_.warmup && !world_.collided; ++k) {
    advance({}, false);
    if (options_.record && options_.record_warmup) push_record({}, false, 0.0, current_info());
  }
  if (world_.collided) done_ = true;
  return options_.observe ? observation() : Observation{};
}

void Environment::assign_slots() {
  auto& vehicles = world_.vehicles;
  const int cap = config_.max_agents;
  if (config_.env == EnvKind::intersection) {
    // Nearest RVs to the junction center take the slots, re-ranked every step.
    const Vec2 c = world_.network->junctions.front().center;
    std::vector<std::pair<double, int>> ranked;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      vehicles[i].slot = -1;
      if (vehicles[i].role != Role::rv) continue;
      const Vec2 p = vehicle_center(world_, vehicles[i]);
      ranked.push_back({std::hypot(p.x - c.x, p.y - c.y), static_cast<int>(i)});
    }
    std::sort(ranked.begin(), ranked.end());
    for (int s = 0; s < cap && s < static_cast<int>(ranked.size()); ++s) vehicles[ranked[s].second].slot = s;
    return;
  }
  std::vector<bool> taken(cap, false);
  for (const auto& v : vehicles) {
    if (v.slot >= 0) taken[v.slot] = true;
  }
  int next = 0;
  for (auto& v : vehicles) {  // ascending id
    if (v.role != Role::rv || v.slot >= 0) continue;
    while (next < cap && taken[next]) ++next;
    if (next >= cap) break;
    v.slot = next;
    taken[next] = true;
  }
}

void Environment::advance(std::span<const double> actions, bool control) {
  const auto& params = config_.dynamics;
  LaneOccupancy occ(world_);
  update_junction_control(world_, occ, params);
  lane_change_mandatory(world_, occ, -1, params);

  const std::size_t n = world_.vehicles.size();
  std::vector<double> commanded(n);
  std::fill(slot_accel_.begin(), slot_accel_.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = world_.vehicles[i];
    const Neighbor lead = find_leader(world_, occ, static_cast<int>(i), params);
    const auto leader_v = lead.exists() ? std::optional<double>(lead.speed) : std::nullopt;
    // Noise is drawn for every vehicle so the stream does not depend on control.
    commanded[i] = hv_acceleration(v, lead.gap, leader_v, local_idm(world_, v, params.idm), noise_rng_);
    if (control && v.slot >= 0) {
      commanded[i] = apply_rv_action(v, actions[v.slot], config_.action, params.dt, params.accel_envelope);
      slot_accel_[v.slot] = commanded[i];
    }
  }
  step_dynamics(world_, commanded, params);
  if (!world_.network->closed) spawner_.spawn_step(world_.time - params.dt, world_, demand_rng_, params);
  assign_slots();
}

StepResult Environment::step(std::span<const double> actions) {
  if (!started_) throw ConfigError("step called before reset");
  if (done_) throw ConfigError("episode is done; call reset");
  if (static_cast<int>(actions.size()) != action_arity()) {
    throw LayoutError("expected " + std::to_string(action_arity()) + " actions, got " +
                      std::to_string(actions.size()));
  }
  for (const auto& v : world_.vehicles) {
    if (v.slot >= 0 && !std::isfinite(actions[v.slot])) {
      throw PolicyError("non-finite action in slot " + std::to_string(v.slot));
    }
  }
  advance(actions, true);
  ++control_steps_;
  StepResult result;
  result.info = current_info();
  result.reward = current_reward();
  result.done = control_steps_ >= config_.horizon || world_.collided;
  done_ = result.done;
  step_means_.push_back(result.info.mean_velocity);
  if (options_.observe) result.observation = observation();
  if (options_.record) push_record(actions, true, result.reward, result.info);
  return result;
}

void Environment::push_record(std::span<const double> actions, bool control, double reward, const StepInfo& info) {
  StepRecord rec;
  rec.step = world_.step;
  rec.time = world_.time;
  rec.control = control;
  if (options_.record_states) rec.vehicles = world_.vehicles;
  rec.actions.assign(actions.begin(), actions.end());
  rec.reward = reward;
  rec.info = info;
  record_.steps.push_back(std::move(rec));
  record_.exits = world_.exits;
}

Observation Environment::observation() const {
  return observe(world_, config_.observation, config_.dynamics, config_.max_agents);
}

StepInfo Environment::current_info() const {
  StepInfo info;
  info.mean_velocity = mean_velocity(world_);
  info.outflow = metric_outflow(world_.exits, world_.time, 500.0);
  info.collision = world_.collided;
  info.vehicles = static_cast<int>(world_.vehicles.size());
  info.controlled = static_cast<int>(
      std::count_if(world_.vehicles.begin(), world_.vehicles.end(), [](const auto& v) { return v.slot >= 0; }));
  return info;
}

double Environment::current_reward() const {
  const auto& p = config_.reward;
  std::vector<double> velocities;
  velocities.reserve(world_.vehicles.size());
  for (const auto& v : world_.vehicles) velocities.push_back(v.velocity);
  switch (config_.env) {
    case EnvKind::ring: return reward_ring(velocities, slot_accel_.empty() ? 0.0 : slot_accel_[0], p);
    case EnvKind::figure_eight: return reward_desired_velocity(velocities, p.fig8_v_des);
    case EnvKind::intersection: {
      std::vector<double> limits;
      for (const auto& v : world_.vehicles) limits.push_back(world_.network->edges[v.edge_id].speed_limit);
      const double t = control_steps_ * config_.dynamics.dt;
      return reward_intersection(t, velocities, limits, count_standstill(velocities, p.standstill_speed), p);
    }
    case EnvKind::merge: {
      const LaneOccupancy occ(world_);
      std::vector<double> headways;
      for (std::size_t i = 0; i < world_.vehicles.size(); ++i) {
        const auto& v = world_.vehicles[i];
        if (v.slot < 0) continue;
        const Neighbor lead = vehicle_leader(world_, occ, static_cast<int>(i), config_.dynamics);
        if (lead.exists()) headways.push_back(headway(lead.gap, v.velocity, p.headway_min_speed));
      }
      return reward_merge(velocities, headways, p);
    }
    case EnvKind::bottleneck: return reward_bottleneck(world_.exits, world_.time, p.bottleneck_window);
  }
  return 0.0;
}

std::vector<double> Environment::hv_mimic_actions() const {
  std::vector<double> out(action_arity(), 0.0);
  const LaneOccupancy occ(world_);
  const auto& params = config_.dynamics;
  for (std::size_t i = 0; i < world_.vehicles.size(); ++i) {
    const auto& v = world_.vehicles[i];
    if (v.slot < 0) continue;
    const Neighbor lead = find_leader(world_, occ, static_cast<int>(i), params);
    const auto leader_v = lead.exists() ? std::optional<double>(lead.speed) : std::nullopt;
    const double a = idm_acceleration(v.velocity, lead.gap, leader_v, local_idm(world_, v, params.idm));
    out[v.slot] = config_.action.kind == ActionKind::velocity ? v.velocity + a * params.dt : a;
  }
  return out;
}

Policy zero_policy() {
  return [](const Observation&, const Environment& env) { return std::vector<double>(env.action_arity(), 0.0); };
}

Policy hv_mimic_policy() {
  return [](const Observation&, const Environment& env) { return env.hv_mimic_actions(); };
}

EpisodeSummary summarize_episode(const Environment& env, double total_reward) {
  EpisodeSummary s;
  const World& w = env.world();
  s.avg_velocity = metric_avg_velocity(env.step_means());
  s.outflow = metric_outflow(w.exits, w.time, 500.0);
  if (env.config().env == EnvKind::intersection) {
    const double standstill = env.config().reward.standstill_speed;
    s.queue_ew = metric_queue_length(w, w.network->edge_index("east_in"), standstill) +
                 metric_queue_length(w, w.network->edge_index("west_in"), standstill);
  }
  s.collision = w.collided;
  s.steps = env.control_steps();
  s.total_reward = total_reward;
  return s;
}

EpisodeResult run_episode(const EpisodeConfig& config, const Policy& policy, EnvOptions options) {
  Environment env(config, options);
  Observation obs = env.reset();
  double total = 0.0;
  while (!env.done()) {
    std::vector<double> actions;
    try {
      actions = policy(obs, env);
    } catch (const std::exception& e) {
      throw PolicyError("policy failed at step " + std::to_string(env.control_steps()) + ": " + e.what());
    }
    StepResult r;
    try {
      r = env.step(actions);
    } catch (const PolicyError& e) {
      throw PolicyError("step " + std::to_string(env.control_steps()) + ": " + e.what());
    }
    total += r.reward;
    obs = std::move(r.observation);
  }
  EpisodeResult result;
  result.summary = summarize_episode(env, total);
  if (options.record) result.record = env.take_record();
  return result;
}

RolloutRecord replay(const RolloutRecord& record) {
  const EpisodeConfig config = config_from_json(record.header.config);
  EnvOptions options;
  options.observe = false;
  options.record = true;
  options.record_states = record.header.states;
  options.record_warmup = record.header.warmup;
  Environment env(config, options);
  env.reset(record.header.seed);
  for (const auto& s : record.steps) {
    if (!s.control) continue;
    if (env.done()) break;
    env.step(s.actions);
  }
  return env.take_record();
}

std::string sweep_metric_name(EnvKind kind) { return kind == EnvKind::bottleneck ? "outflow" : "avg_velocity"; }

double sweep_metric(const EpisodeSummary& summary, EnvKind kind) {
  return kind == EnvKind::bottleneck ? summary.outflow : summary.avg_velocity;
}

SweepParameter sweep_parameter_from_string(std::string_view name) {
  if (name == "circumference") return SweepParameter::circumference;
  if (name == "radius") return SweepParameter::radius;
  if (name == "merge_inflow") return SweepParameter::merge_inflow;
  if (name == "bottleneck_inflow") return SweepParameter::bottleneck_inflow;
  throw ConfigError("unknown sweep parameter '" + std::string(name) + "'", "parameter");
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::circumference: return "circumference";
    case SweepParameter::radius: return "radius";
    case SweepParameter::merge_inflow: return "merge_inflow";
    case SweepParameter::bottleneck_inflow: return "bottleneck_inflow";
  }
  return "";
}

EpisodeConfig apply_sweep_point(const EpisodeConfig& base, SweepParameter parameter, const SweepPoint& point) {
  EpisodeConfig c = base;
  auto require = [&](EnvKind kind) {
    if (c.env != kind) throw ConfigError("sweep parameter " + to_string(parameter) + " needs env " + to_string(kind),
                                         "parameter");
  };
  switch (parameter) {
    case SweepParameter::circumference:
      require(EnvKind::ring);
      c.network.circumference = point.value;
      c.network.circumference_range.reset();
      break;
    case SweepParameter::radius:
      require(EnvKind::figure_eight);
      c.network.radius = point.value;
      c.network.radius_range.reset();
      break;
    case SweepParameter::merge_inflow:
      require(EnvKind::merge);
      set_merge_inflows(c, point.value, point.ramp);
      break;
    case SweepParameter::bottleneck_inflow:
      require(EnvKind::bottleneck);
      set_bottleneck_inflow(c, point.value);
      break;
  }
  c.validate();
  return c;
}

std::vector<SweepRow> run_density_sweep(const EpisodeConfig& base, SweepParameter parameter,
                                        const std::vector<SweepPoint>& grid, std::span<const std::uint64_t> seeds) {
  std::vector<SweepRow> rows;
  EnvOptions options;
  options.observe = false;
  for (const auto& point : grid) {
    EpisodeConfig c = apply_sweep_point(base, parameter, point);
    std::vector<double> values;
    for (std::uint64_t seed : seeds) {
      c.seed = seed;
      const EpisodeResult r = run_episode(c, hv_mimic_policy(), options);
      values.push_back(sweep_metric(r.summary, c.env));
    }
    rows.push_back({point, summarize(values)});
  }
  return rows;
}

}  // namespace mixtraffic
