#include "mixtraffic/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

void IdmParams::validate() const {
  if (!(v0 > 0) || !(time_headway > 0) || !(a_max > 0) || !(b_comf > 0) || !(delta > 0) || !(s0 > 0)) {
    throw ConfigError("IDM parameters must be positive", "idm");
  }
  if (!(noise_bound >= 0)) throw ConfigError("noise bound must be non-negative", "idm.noise_bound");
}

double idm_acceleration(double v, double gap, std::optional<double> leader_v, const IdmParams& p) {
  const double free_term = 1.0 - std::pow(v / p.v0, p.delta);
  if (!leader_v || !std::isfinite(gap)) return p.a_max * free_term;
  const double dynamic = v * p.time_headway + v * (v - *leader_v) / (2.0 * std::sqrt(p.a_max * p.b_comf));
  const double desired_gap = p.s0 + std::max(0.0, dynamic);
  const double ratio = desired_gap / std::max(gap, 1e-6);
  return p.a_max * (free_term - ratio * ratio);
}

double draw_noise(Rng& rng, double bound) {
  if (bound <= 0.0) return 0.0;
  std::uniform_real_distribution<double> dist(-bound, bound);
  return dist(rng);
}

double hv_acceleration(const VehicleState& vehicle, double gap, std::optional<double> leader_v, const IdmParams& p,
                       Rng& rng) {
  return idm_acceleration(vehicle.velocity, gap, leader_v, p) + draw_noise(rng, p.noise_bound);
}

double apply_rv_action(const VehicleState& vehicle, double raw_action, const ActionSpec& spec, double dt,
                       double envelope) {
  if (!std::isfinite(raw_action)) throw PolicyError("policy produced a non-finite action");
  if (!(dt > 0)) throw DomainError("dt must be positive");
  const double clamped = std::clamp(raw_action, spec.lower, spec.upper);
  if (spec.kind == ActionKind::acceleration) return clamped;
  return std::clamp((clamped - vehicle.velocity) / dt, -envelope, envelope);
}

double failsafe_acceleration(double v, double gap, std::optional<double> leader_v, double dt, double b_emergency) {
  if (!leader_v || !std::isfinite(gap)) return kInfinity;
  const double leader_next = std::max(0.0, *leader_v - b_emergency * dt);
  const double budget = gap + leader_next * dt + leader_next * leader_next / (2.0 * b_emergency);
  // Largest v' with v' * dt + v'^2 / (2 b) <= budget.
  const double disc = dt * dt + 2.0 * budget / b_emergency;
  const double v_next = disc > 0.0 ? std::max(0.0, b_emergency * (-dt + std::sqrt(disc))) : 0.0;
  return (v_next - v) / dt;
}

void ExitLog::record(double time, VehicleId id) { entries_.push_back({time, id}); }

std::size_t ExitLog::count_window(double now, double window) const {
  const double from = now - window;
  std::size_t count = 0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->time > now) continue;
    if (it->time <= from) break;
    ++count;
  }
  return count;
}

int World::index_of(VehicleId id) const {
  auto it = std::lower_bound(vehicles.begin(), vehicles.end(), id,
                             [](const VehicleState& v, VehicleId key) { return v.id < key; });
  if (it == vehicles.end() || it->id != id) return -1;
  return static_cast<int>(it - vehicles.begin());
}

bool World::holds_reservation(VehicleId id, int junction, int movement) const {
  return std::any_of(reservations.begin(), reservations.end(), [&](const Reservation& r) {
    return r.vehicle == id && r.junction == junction && r.movement == movement;
  });
}

IdmParams local_idm(const World& world, const VehicleState& vehicle, const IdmParams& base) {
  IdmParams p = base;
  p.v0 = std::min(base.v0, world.network->edges[vehicle.edge_id].speed_limit);
  return p;
}

StepOutcome step_dynamics(World& world, std::span<const double> commanded, const DynamicsParams& params) {
  const auto& net = *world.network;
  const std::size_t n = world.vehicles.size();
  if (commanded.size() != n) {
    throw LayoutError("expected " + std::to_string(n) + " commanded accelerations, got " +
                      std::to_string(commanded.size()));
  }
  const double dt = params.dt;
  LaneOccupancy occ(world);
  std::vector<double> next_v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& veh = world.vehicles[i];
    const Neighbor lead = find_leader(world, occ, static_cast<int>(i), params);
    const double bound = failsafe_acceleration(veh.velocity, lead.gap,
                                               lead.exists() ? std::optional<double>(lead.speed) : std::nullopt, dt,
                                               params.b_emergency);
    const double accel = std::min(commanded[i], bound);
    next_v[i] = std::max(0.0, veh.velocity + accel * dt);
  }

  StepOutcome outcome;
  std::vector<bool> gone(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto& veh = world.vehicles[i];
    veh.last_accel = (next_v[i] - veh.velocity) / dt;
    veh.velocity = next_v[i];
    veh.waiting = veh.velocity < params.standstill_speed ? veh.waiting + dt : 0.0;
    veh.arc_pos += veh.velocity * dt;
    while (veh.arc_pos > net.edges[veh.edge_id].length) {
      const LaneRef here{veh.edge_id, veh.lane_index};
      const auto next = net.successor(here);
      if (!next) {
        if (net.edges[veh.edge_id].sink) {
          gone[i] = true;
        } else {
          // Dead end; the failsafe keeps this to rounding-level overshoot.
          veh.arc_pos = net.edges[veh.edge_id].length;
          veh.velocity = 0.0;
        }
        break;
      }
      veh.arc_pos -= net.edges[veh.edge_id].length;
      veh.edge_id = next->edge;
      veh.lane_index = next->lane;
    }
  }
  world.time = (world.step + 1) * dt;
  ++world.step;
  std::vector<VehicleState> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (gone[i]) {
      world.exits.record(world.time, world.vehicles[i].id);
      outcome.exited.push_back(world.vehicles[i].id);
    } else {
      kept.push_back(world.vehicles[i]);
    }
  }
  world.vehicles = std::move(kept);

  occ.rebuild(world);
  std::vector<int> stop_these;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const Neighbor lead = find_leader(world, occ, static_cast<int>(i), params, false);
    if (lead.vehicle >= 0 && lead.gap < -1e-9) {
      stop_these.push_back(static_cast<int>(i));
      stop_these.push_back(lead.vehicle);
    }
  }
  if (!stop_these.empty()) {
    world.collided = true;
    outcome.collision = true;
    for (int i : stop_these) world.vehicles[i].velocity = 0.0;
  }
  return outcome;
}

}  // namespace mixtraffic
