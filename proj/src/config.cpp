#include "mixtraffic/config.hpp"

#include <fstream>
#include <set>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

using nlohmann::json;

namespace {

std::string action_kind_name(ActionKind kind) { return kind == ActionKind::velocity ? "velocity" : "acceleration"; }

ActionKind action_kind_from(const std::string& name) {
  if (name == "acceleration") return ActionKind::acceleration;
  if (name == "velocity") return ActionKind::velocity;
  throw ConfigError("unknown action kind '" + name + "'", "action.kind");
}

// Strict reader over one JSON object: every key must be consumed.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("expected an object", path_);
  }
  ~Reader() = default;

  template <class T>
  void get(const char* key, T& out) {
    if (!obj_.contains(key)) return;
    seen_.insert(key);
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong value type", field(key));
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    if (!obj_.contains(key)) return;
    seen_.insert(key);
    if (obj_.at(key).is_null()) {
      out.reset();
      return;
    }
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong value type", field(key));
    }
  }

  const json* child(const char* key) {
    if (!obj_.contains(key)) return nullptr;
    seen_.insert(key);
    return &obj_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key", field(it.key()));
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json class_mix_json(const ClassMix& mix) {
  json out = json::object();
  for (const auto& [cls, share] : mix) out[to_string(cls)] = share;
  return out;
}

json network_json(const EpisodeConfig& c) {
  const auto& n = c.network;
  json out = json::object();
  switch (c.env) {
    case EnvKind::ring:
      out["circumference"] = n.circumference;
      out["circumference_range"] = n.circumference_range ? json(*n.circumference_range) : json(nullptr);
      break;
    case EnvKind::figure_eight:
      out["radius"] = n.radius;
      out["radius_range"] = n.radius_range ? json(*n.radius_range) : json(nullptr);
      break;
    case EnvKind::intersection:
      out["approach_length"] = n.intersection.approach_length;
      out["speed_limit"] = n.intersection.speed_limit;
      break;
    case EnvKind::merge:
      out["highway_length"] = n.merge.highway_length;
      out["ramp_length"] = n.merge.ramp_length;
      out["ramp_fractions"] = n.merge.ramp_fractions;
      out["merge_zone"] = n.merge.merge_zone;
      out["speed_limit"] = n.merge.speed_limit;
      break;
    case EnvKind::bottleneck:
      out["scale"] = n.bottleneck.scale;
      out["segment_lengths"] = n.bottleneck.segment_lengths;
      out["merge_zone"] = n.bottleneck.merge_zone;
      out["speed_limit"] = n.bottleneck.speed_limit;
      break;
  }
  return out;
}

void read_network(const json& doc, EpisodeConfig& c) {
  Reader r(doc, "network");
  auto& n = c.network;
  switch (c.env) {
    case EnvKind::ring:
      r.get("circumference", n.circumference);
      r.get_optional("circumference_range", n.circumference_range);
      break;
    case EnvKind::figure_eight:
      r.get("radius", n.radius);
      r.get_optional("radius_range", n.radius_range);
      break;
    case EnvKind::intersection:
      r.get("approach_length", n.intersection.approach_length);
      r.get("speed_limit", n.intersection.speed_limit);
      break;
    case EnvKind::merge:
      r.get("highway_length", n.merge.highway_length);
      r.get("ramp_length", n.merge.ramp_length);
      r.get("ramp_fractions", n.merge.ramp_fractions);
      r.get("merge_zone", n.merge.merge_zone);
      r.get("speed_limit", n.merge.speed_limit);
      break;
    case EnvKind::bottleneck:
      r.get("scale", n.bottleneck.scale);
      r.get("segment_lengths", n.bottleneck.segment_lengths);
      r.get("merge_zone", n.bottleneck.merge_zone);
      r.get("speed_limit", n.bottleneck.speed_limit);
      break;
  }
  r.finish();
}

void check_range(const std::optional<std::array<double, 2>>& range, double lo, double hi, const char* field) {
  if (!range) return;
  if (!((*range)[0] >= lo && (*range)[0] <= (*range)[1] && (*range)[1] <= hi)) {
    throw ConfigError("range must be ordered and inside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                      field);
  }
}

}  // namespace

std::vector<std::array<double, 2>> merge_inflow_grid() {
  return {{1100, 200}, {1300, 100}, {1300, 200}, {1500, 200}, {1500, 300}};
}

void set_merge_inflows(EpisodeConfig& config, double highway, double ramp) {
  for (auto& in : config.inflows) in.rate = in.route == "highway" ? highway : ramp;
}

void set_bottleneck_inflow(EpisodeConfig& config, double rate) {
  for (auto& in : config.inflows) in.rate = rate;
}

EpisodeConfig default_config(EnvKind env) {
  EpisodeConfig c;
  c.env = env;
  c.observation = default_observation_spec(env);
  switch (env) {
    case EnvKind::ring:
      c.horizon = 3000;
      c.warmup = 3000;
      c.action = {ActionKind::acceleration, -1.0, 1.0};
      c.population = {22, 1, Spacing::uniform_with_jitter, 0.2};
      c.max_agents = 1;
      break;
    case EnvKind::figure_eight:
      c.horizon = 1500;
      c.warmup = 0;
      c.action = {ActionKind::acceleration, -3.0, 3.0};
      c.population = {14, 1, Spacing::uniform_with_jitter, 0.2};
      c.max_agents = 1;
      break;
    case EnvKind::intersection: {
      c.horizon = 400;
      c.warmup = 525;
      c.action = {ActionKind::acceleration, -7.0, 7.0};
      c.max_agents = 8;
      c.dynamics.critical_gap = 3.0;
      c.dynamics.minor_patience = 4.0;
      for (const char* route : {"north_south", "south_north"}) c.inflows.push_back({route, 1333.0, 0.2});
      for (const char* route : {"east_west", "west_east"}) c.inflows.push_back({route, 500.0, 0.0});
      break;
    }
    case EnvKind::merge:
      c.horizon = 750;
      c.warmup = 600;
      c.action = {ActionKind::acceleration, -1.5, 1.5};
      c.max_agents = 5;
      c.inflows.push_back({"highway", 1100.0, 0.1});
      c.inflows.push_back({"ramp_1", 200.0, 0.0});
      c.inflows.push_back({"ramp_2", 200.0, 0.0});
      break;
    case EnvKind::bottleneck:
      c.horizon = 1000;
      c.warmup = 40;
      c.action = {ActionKind::velocity, 0.01, 23.0};
      c.max_agents = 15;
      c.inflows.push_back({"main", 2300.0, 0.1, bottleneck_class_mix(), true});
      break;
  }
  return c;
}

void EpisodeConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be positive", "horizon");
  if (warmup < 0) throw ConfigError("warmup must be non-negative", "warmup");
  if (!(action.lower < action.upper)) throw ConfigError("action bounds must satisfy lower < upper", "action");
  if (!(dynamics.dt > 0.0)) throw ConfigError("dt must be positive", "dynamics.dt");
  if (!(dynamics.b_emergency > 0.0)) throw ConfigError("emergency deceleration must be positive", "dynamics.b_emergency");
  if (!(dynamics.commit_decel > 0.0)) throw ConfigError("commit deceleration must be positive", "dynamics.commit_decel");
  if (max_agents < 1) throw ConfigError("at least one action slot is required", "max_agents");
  dynamics.idm.validate();
  observation.validate();
  reward.validate();
  if (observation.mode == ObsMode::image && observation.center_rule == CenterRule::per_rv &&
      observation.stack_size != max_agents) {
    throw ConfigError("image stacks need one slice per action slot", "observation.stack_size");
  }
  if (observation.mode == ObsMode::position_only && env != EnvKind::ring) {
    throw ConfigError("position-only observations exist for the ring only", "observation.mode");
  }
  const bool closed = env == EnvKind::ring || env == EnvKind::figure_eight;
  if (closed) {
    population.validate();
    if (population.rv_count > max_agents) throw ConfigError("more RVs than action slots", "population.rvs");
    if (!inflows.empty()) throw ConfigError("closed networks take no inflows", "inflows");
  } else {
    for (const auto& in : inflows) in.validate();
  }
  if (!(network.circumference >= 150.0 && network.circumference <= 400.0)) {
    throw ConfigError("circumference must lie in [150, 400]", "network.circumference");
  }
  if (!(network.radius >= 15.0 && network.radius <= 40.0)) {
    throw ConfigError("radius must lie in [15, 40]", "network.radius");
  }
  check_range(network.circumference_range, 150.0, 400.0, "network.circumference_range");
  check_range(network.radius_range, 15.0, 40.0, "network.radius_range");
}

json to_json(const EpisodeConfig& c) {
  json doc;
  doc["env"] = to_string(c.env);
  doc["seed"] = c.seed;
  doc["horizon"] = c.horizon;
  doc["warmup"] = c.warmup;
  doc["action"] = {{"kind", action_kind_name(c.action.kind)}, {"lower", c.action.lower}, {"upper", c.action.upper}};
  const auto& o = c.observation;
  doc["observation"] = {{"mode", to_string(o.mode)},
                        {"mask_radius", o.mask_radius ? json(*o.mask_radius) : json(nullptr)},
                        {"view_side", o.view_side},
                        {"stack_size", o.stack_size},
                        {"center_rule", o.center_rule == CenterRule::junction ? "junction" : "per_rv"},
                        {"intersection_vehicles", o.intersection_vehicles},
                        {"figure_eight_vehicles", o.figure_eight_vehicles}};
  const auto& r = c.reward;
  doc["reward"] = {{"ring_alpha", r.ring_alpha},
                   {"ring_vehicles", r.ring_vehicles},
                   {"fig8_v_des", r.fig8_v_des},
                   {"intersection_gain", r.intersection_gain},
                   {"intersection_eps", r.intersection_eps},
                   {"merge_v_des", r.merge_v_des},
                   {"merge_h_max", r.merge_h_max},
                   {"merge_alpha", r.merge_alpha},
                   {"bottleneck_window", r.bottleneck_window},
                   {"headway_min_speed", r.headway_min_speed},
                   {"standstill_speed", r.standstill_speed}};
  const auto& d = c.dynamics;
  doc["idm"] = {{"v0", d.idm.v0},         {"time_headway", d.idm.time_headway}, {"a_max", d.idm.a_max},
                {"b_comf", d.idm.b_comf}, {"delta", d.idm.delta},               {"s0", d.idm.s0},
                {"noise_bound", d.idm.noise_bound}};
  doc["dynamics"] = {{"dt", d.dt},
                     {"b_emergency", d.b_emergency},
                     {"accel_envelope", d.accel_envelope},
                     {"lookahead", d.lookahead},
                     {"critical_gap", d.critical_gap},
                     {"minor_patience", d.minor_patience},
                     {"stop_tolerance", d.stop_tolerance},
                     {"commit_decel", d.commit_decel},
                     {"merge_safe_decel", d.merge_safe_decel},
                     {"standstill_speed", d.standstill_speed}};
  doc["network"] = network_json(c);
  if (c.env == EnvKind::ring || c.env == EnvKind::figure_eight) {
    doc["population"] = {{"vehicles", c.population.total},
                         {"rvs", c.population.rv_count},
                         {"spacing", c.population.spacing == Spacing::uniform ? "uniform" : "uniform_with_jitter"},
                         {"jitter", c.population.jitter}};
  } else {
    json inflows = json::array();
    for (const auto& in : c.inflows) {
      inflows.push_back({{"route", in.route},
                         {"rate", in.rate},
                         {"rv_penetration", in.rv_penetration},
                         {"class_mix", class_mix_json(in.class_mix)},
                         {"rv_passenger_only", in.rv_passenger_only}});
    }
    doc["inflows"] = inflows;
    doc["spawn"] = {{"arrivals", c.spawn.arrivals == ArrivalProcess::poisson ? "poisson" : "uniform"},
                    {"rv_assignment", c.spawn.rv_assignment == RvAssignment::bernoulli ? "bernoulli" : "counter"},
                    {"insertion_speed", c.spawn.insertion_speed}};
  }
  doc["max_agents"] = c.max_agents;
  doc["all_hv"] = c.all_hv;
  return doc;
}

EpisodeConfig config_from_json(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (!user.contains("env") || !user.at("env").is_string()) throw ConfigError("missing environment kind", "env");
  EnvKind env;
  try {
    env = env_kind_from_string(user.at("env").get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), "env");
  }
  EpisodeConfig c = default_config(env);
  json doc = to_json(c);
  doc.merge_patch(user);

  Reader top(doc, "");
  std::string env_name;
  top.get("env", env_name);
  top.get("seed", c.seed);
  top.get("horizon", c.horizon);
  top.get("warmup", c.warmup);
  top.get("max_agents", c.max_agents);
  top.get("all_hv", c.all_hv);
  if (const json* a = top.child("action")) {
    Reader r(*a, "action");
    std::string kind = action_kind_name(c.action.kind);
    r.get("kind", kind);
    c.action.kind = action_kind_from(kind);
    r.get("lower", c.action.lower);
    r.get("upper", c.action.upper);
    r.finish();
  }
  if (const json* o = top.child("observation")) {
    Reader r(*o, "observation");
    auto& spec = c.observation;
    std::string mode = to_string(spec.mode);
    r.get("mode", mode);
    spec.mode = obs_mode_from_string(mode);
    spec.mask_radius.reset();
    r.get_optional("mask_radius", spec.mask_radius);
    r.get("view_side", spec.view_side);
    r.get("stack_size", spec.stack_size);
    std::string rule = spec.center_rule == CenterRule::junction ? "junction" : "per_rv";
    r.get("center_rule", rule);
    if (rule != "junction" && rule != "per_rv") throw ConfigError("unknown center rule", "observation.center_rule");
    spec.center_rule = rule == "junction" ? CenterRule::junction : CenterRule::per_rv;
    r.get("intersection_vehicles", spec.intersection_vehicles);
    r.get("figure_eight_vehicles", spec.figure_eight_vehicles);
    r.finish();
  }
  if (const json* o = top.child("reward")) {
    Reader r(*o, "reward");
    auto& p = c.reward;
    r.get("ring_alpha", p.ring_alpha);
    r.get("ring_vehicles", p.ring_vehicles);
    r.get("fig8_v_des", p.fig8_v_des);
    r.get("intersection_gain", p.intersection_gain);
    r.get("intersection_eps", p.intersection_eps);
    r.get("merge_v_des", p.merge_v_des);
    r.get("merge_h_max", p.merge_h_max);
    r.get("merge_alpha", p.merge_alpha);
    r.get("bottleneck_window", p.bottleneck_window);
    r.get("headway_min_speed", p.headway_min_speed);
    r.get("standstill_speed", p.standstill_speed);
    r.finish();
  }
  if (const json* o = top.child("idm")) {
    Reader r(*o, "idm");
    auto& p = c.dynamics.idm;
    r.get("v0", p.v0);
    r.get("time_headway", p.time_headway);
    r.get("a_max", p.a_max);
    r.get("b_comf", p.b_comf);
    r.get("delta", p.delta);
    r.get("s0", p.s0);
    r.get("noise_bound", p.noise_bound);
    r.finish();
  }
  if (const json* o = top.child("dynamics")) {
    Reader r(*o, "dynamics");
    auto& p = c.dynamics;
    r.get("dt", p.dt);
    r.get("b_emergency", p.b_emergency);
    r.get("accel_envelope", p.accel_envelope);
    r.get("lookahead", p.lookahead);
    r.get("critical_gap", p.critical_gap);
    r.get("minor_patience", p.minor_patience);
    r.get("stop_tolerance", p.stop_tolerance);
    r.get("commit_decel", p.commit_decel);
    r.get("merge_safe_decel", p.merge_safe_decel);
    r.get("standstill_speed", p.standstill_speed);
    r.finish();
  }
  if (const json* o = top.child("network")) read_network(*o, c);
  if (const json* o = top.child("population")) {
    Reader r(*o, "population");
    r.get("vehicles", c.population.total);
    r.get("rvs", c.population.rv_count);
    std::string spacing = "uniform_with_jitter";
    r.get("spacing", spacing);
    if (spacing != "uniform" && spacing != "uniform_with_jitter") {
      throw ConfigError("unknown spacing rule", "population.spacing");
    }
    c.population.spacing = spacing == "uniform" ? Spacing::uniform : Spacing::uniform_with_jitter;
    r.get("jitter", c.population.jitter);
    r.finish();
  }
  if (const json* o = top.child("inflows")) {
    if (!o->is_array()) throw ConfigError("expected a list", "inflows");
    c.inflows.clear();
    for (std::size_t i = 0; i < o->size(); ++i) {
      const std::string path = "inflows[" + std::to_string(i) + "]";
      Reader r(o->at(i), path);
      InflowSpec in;
      r.get("route", in.route);
      r.get("rate", in.rate);
      r.get("rv_penetration", in.rv_penetration);
      r.get("rv_passenger_only", in.rv_passenger_only);
      if (const json* mix = r.child("class_mix")) {
        if (!mix->is_object()) throw ConfigError("expected an object", path + ".class_mix");
        in.class_mix.clear();
        for (auto it = mix->begin(); it != mix->end(); ++it) {
          if (!it.value().is_number()) throw ConfigError("wrong value type", path + ".class_mix." + it.key());
          in.class_mix[vehicle_class_from_string(it.key())] = it.value().get<double>();
        }
      }
      r.finish();
      if (in.route.empty()) throw ConfigError("missing route", path + ".route");
      c.inflows.push_back(std::move(in));
    }
  }
  if (const json* o = top.child("spawn")) {
    Reader r(*o, "spawn");
    std::string arrivals = "uniform", assignment = "counter";
    r.get("arrivals", arrivals);
    r.get("rv_assignment", assignment);
    r.get("insertion_speed", c.spawn.insertion_speed);
    r.finish();
    if (arrivals != "uniform" && arrivals != "poisson") throw ConfigError("unknown arrival process", "spawn.arrivals");
    if (assignment != "counter" && assignment != "bernoulli") {
      throw ConfigError("unknown RV assignment", "spawn.rv_assignment");
    }
    c.spawn.arrivals = arrivals == "poisson" ? ArrivalProcess::poisson : ArrivalProcess::uniform;
    c.spawn.rv_assignment = assignment == "bernoulli" ? RvAssignment::bernoulli : RvAssignment::counter;
  }
  top.finish();
  c.validate();
  return c;
}

EpisodeConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string canonical_text(const EpisodeConfig& config) { return to_json(config).dump(); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t config_hash(const EpisodeConfig& config) { return fnv1a64(canonical_text(config)); }

}  // namespace mixtraffic
