#include "mixtraffic/demand.hpp"

#include <algorithm>
#include <cmath>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

ClassMix bottleneck_class_mix() {
  return {{VehicleClass::passenger, 0.70},
          {VehicleClass::semi_truck, 0.10},
          {VehicleClass::motorcycle, 0.10},
          {VehicleClass::delivery_truck, 0.05},
          {VehicleClass::bus, 0.05}};
}

ClassMix passenger_only() { return {{VehicleClass::passenger, 1.0}}; }

void InflowSpec::validate() const {
  if (!(rate >= 0.0)) throw ConfigError("inflow rate must be non-negative", "inflows.rate");
  if (!(rv_penetration >= 0.0 && rv_penetration <= 1.0)) {
    throw ConfigError("RV penetration must lie in [0, 1]", "inflows.rv_penetration");
  }
  double sum = 0.0;
  for (const auto& [cls, share] : class_mix) {
    if (!(share >= 0.0)) throw ConfigError("class fractions must be non-negative", "inflows.class_mix");
    sum += share;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("class fractions must sum to 1", "inflows.class_mix");
}

void PopulationSpec::validate() const {
  if (total < 1) throw ConfigError("population needs at least one vehicle", "population.vehicles");
  if (rv_count < 0 || rv_count > total) throw ConfigError("rv count must lie in [0, total]", "population.rvs");
  if (!(jitter >= 0.0 && jitter <= 1.0)) throw ConfigError("jitter must lie in [0, 1]", "population.jitter");
}

std::vector<VehicleState> init_closed_population(const RoadNetwork& network, const PopulationSpec& spec, Rng& rng,
                                                 double s0) {
  spec.validate();
  if (!network.closed) throw ConfigError("closed population needs a closed network", "env");
  const double loop = network.total_length();
  const double length = class_length(VehicleClass::passenger);
  if (spec.total * (length + s0) > loop) {
    throw ConfigError("network of length " + std::to_string(loop) + " m cannot hold " + std::to_string(spec.total) +
                          " vehicles",
                      "population.vehicles");
  }
  const double spacing = loop / spec.total;
  const double jitter = spec.spacing == Spacing::uniform_with_jitter ? spec.jitter * (spacing - length) : 0.0;
  std::uniform_real_distribution<double> unit_draw(-0.5, 0.5);
  const Route& route = network.routes.front();

  std::vector<VehicleState> out;
  out.reserve(spec.total);
  for (int k = 0; k < spec.total; ++k) {
    double pos = k * spacing;
    if (jitter > 0.0) pos += jitter * unit_draw(rng);
    pos = std::fmod(pos, loop);
    if (pos < 0.0) pos += loop;
    VehicleState v;
    v.id = static_cast<VehicleId>(k);
    v.cls = VehicleClass::passenger;
    v.role = k < spec.rv_count ? Role::rv : Role::hv;
    v.length = length;
    for (int edge : route.edges) {
      const double len = network.edges[edge].length;
      if (pos <= len) {
        v.edge_id = edge;
        v.arc_pos = pos;
        break;
      }
      pos -= len;
    }
    out.push_back(v);
  }
  return out;
}

std::size_t uniform_arrivals(double rate, double t) {
  return static_cast<std::size_t>(std::floor(rate * t / 3600.0 + 1e-9));
}

Spawner::Spawner(std::vector<InflowSpec> specs, SpawnOptions options) : options_(options) {
  for (auto& spec : specs) {
    spec.validate();
    specs_.push_back(spec);
    Stream stream;
    stream.spec = std::move(spec);
    streams_.push_back(std::move(stream));
  }
}

std::size_t Spawner::pending() const {
  std::size_t n = 0;
  for (const auto& s : streams_) n += s.queue.size();
  return n;
}

Spawner::Pending Spawner::make_request(Stream& stream, Rng& rng) {
  const auto& spec = stream.spec;
  Role role = Role::hv;
  if (spec.rv_penetration > 0.0) {
    if (options_.rv_assignment == RvAssignment::counter) {
      ++stream.counter;
      const auto every = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / spec.rv_penetration)));
      if (stream.counter % every == 0) role = Role::rv;
    } else {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng) < spec.rv_penetration) role = Role::rv;
    }
  }
  VehicleClass cls = VehicleClass::passenger;
  if (role == Role::rv && spec.rv_passenger_only) return {cls, role};
  const bool mixed = std::count_if(spec.class_mix.begin(), spec.class_mix.end(),
                                   [](const auto& kv) { return kv.second > 0.0; }) > 1;
  if (!mixed) {
    for (const auto& [candidate, share] : spec.class_mix) {
      if (share > 0.0) cls = candidate;
    }
    return {cls, role};
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double cumulative = 0.0;
  for (auto candidate : kVehicleClasses) {
    auto it = spec.class_mix.find(candidate);
    if (it == spec.class_mix.end() || it->second <= 0.0) continue;
    cumulative += it->second;
    cls = candidate;
    if (draw < cumulative) break;
  }
  return {cls, role};
}

std::vector<VehicleState> Spawner::spawn_step(double t, World& world, Rng& rng, const DynamicsParams& params) {
  const auto& net = *world.network;
  const double until = t + params.dt;
  for (auto& stream : streams_) {
    if (stream.spec.rate <= 0.0) continue;
    if (options_.arrivals == ArrivalProcess::uniform) {
      const std::size_t target = uniform_arrivals(stream.spec.rate, until);
      while (stream.requested < target) {
        stream.queue.push_back(make_request(stream, rng));
        ++stream.requested;
      }
    } else {
      std::exponential_distribution<double> gap(stream.spec.rate / 3600.0);
      if (stream.requested == 0 && stream.next_poisson == 0.0) stream.next_poisson = gap(rng);
      while (stream.next_poisson <= until) {
        stream.queue.push_back(make_request(stream, rng));
        ++stream.requested;
        stream.next_poisson += gap(rng);
      }
    }
  }

  std::vector<VehicleState> added;
  LaneOccupancy occ(world);
  for (auto& stream : streams_) {
    const int route = net.route_index(stream.spec.route);
    if (route < 0) throw ConfigError("inflow names unknown route '" + stream.spec.route + "'", "inflows.route");
    const int entry = net.routes[route].edges.front();
    const Edge& edge = net.edges[entry];
    while (!stream.queue.empty()) {
      const Pending req = stream.queue.front();
      const double length = class_length(req.cls);
      int best_lane = -1;
      Neighbor best;
      double best_free = -kInfinity;
      for (int lane = 0; lane < edge.lane_count; ++lane) {
        const Neighbor lead = leader_from(world, occ, {entry, lane}, 0.0, static_cast<VehicleId>(-1), params.lookahead);
        const double free = lead.exists() ? lead.gap : kInfinity;
        if (free >= params.idm.s0 + length && free > best_free) {
          best_free = free;
          best_lane = lane;
          best = lead;
        }
      }
      if (best_lane < 0) break;
      double speed = std::min(options_.insertion_speed, edge.speed_limit);
      if (best.exists()) {
        const double gap = best.gap - length;
        // Fastest speed the failsafe would still accept behind this leader.
        const double lead_next = std::max(0.0, best.speed - params.b_emergency * params.dt);
        const double budget = gap + lead_next * params.dt + lead_next * lead_next / (2.0 * params.b_emergency);
        const double safe = params.b_emergency *
                            (-params.dt + std::sqrt(params.dt * params.dt + 2.0 * budget / params.b_emergency));
        speed = std::max(0.0, std::min(speed, safe));
      }
      VehicleState v;
      v.id = world.next_id++;
      v.cls = req.cls;
      v.role = req.role;
      v.length = length;
      v.edge_id = entry;
      v.lane_index = best_lane;
      v.arc_pos = length;
      v.velocity = speed;
      v.route = route;
      world.vehicles.push_back(v);
      added.push_back(v);
      stream.queue.pop_front();
      ++emitted_;
      occ.rebuild(world);
    }
  }
  return added;
}

ControlSchedule warmup_control(int warmup_steps, int horizon) {
  if (warmup_steps < 0) throw ConfigError("warmup must be non-negative", "warmup");
  if (horizon < 1) throw ConfigError("horizon must be positive", "horizon");
  return {warmup_steps, horizon};
}

}  // namespace mixtraffic
