// Lane occupancy queries, junction right-of-way and mandatory merges.
#include <algorithm>
#include <cmath>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

namespace {

constexpr int kMaxHops = 64;

bool movement_busy(const World& world, int junction, int movement) {
  const auto& j = world.network->junctions[junction];
  return std::any_of(world.reservations.begin(), world.reservations.end(), [&](const Reservation& r) {
    return r.junction == junction && j.conflicting(r.movement, movement);
  });
}

// True when the vehicle must stop at the end of `lane`.
bool stop_at_end(const World& world, const VehicleState& veh, LaneRef lane) {
  const auto& net = *world.network;
  if (!net.successor(lane)) return !net.edges[lane.edge].sink;
  const ControlPoint cp = net.control_at(lane.edge);
  if (cp.junction < 0) return false;
  if (world.holds_reservation(veh.id, cp.junction, cp.movement)) return false;
  if (net.junctions[cp.junction].movements[cp.movement].minor) return true;
  return movement_busy(world, cp.junction, cp.movement);
}

// Arrival time at the line when accelerating at a from speed v.
double time_to_line(double v, double distance, double a) {
  return (-v + std::sqrt(v * v + 2.0 * a * std::max(distance, 0.0))) / a;
}

// Whether every conflicting vehicle still outside the interior can stop at
// the line under emergency braking.
bool can_yield(const VehicleState& v, double distance, const DynamicsParams& params) {
  return distance >= v.velocity * params.dt + v.velocity * v.velocity / (2.0 * params.b_emergency);
}

// An impatient minor vehicle takes the junction from majors that can still stop.
bool force_entry(World& world, const LaneOccupancy& occ, int jid, int movement, const DynamicsParams& params) {
  const auto& net = *world.network;
  const auto& junction = net.junctions[jid];
  std::vector<std::size_t> revoked;
  for (std::size_t r = 0; r < world.reservations.size(); ++r) {
    const auto& res = world.reservations[r];
    if (res.junction != jid || !junction.conflicting(res.movement, movement)) continue;
    const auto& other = world.vehicles[world.index_of(res.vehicle)];
    const auto& om = junction.movements[res.movement];
    if (other.edge_id != om.approach) return false;
    if (!can_yield(other, net.edges[other.edge_id].length - other.arc_pos, params)) return false;
    revoked.push_back(r);
  }
  for (std::size_t m = 0; m < junction.movements.size(); ++m) {
    if (!junction.conflicting(static_cast<int>(m), movement)) continue;
    const int approach = junction.movements[m].approach;
    const auto& list = occ.on_lane({approach, 0});
    if (list.empty()) continue;
    const auto& front = world.vehicles[list.back()];
    if (!can_yield(front, net.edges[approach].length - front.arc_pos, params)) return false;
  }
  for (auto it = revoked.rbegin(); it != revoked.rend(); ++it) {
    world.reservations.erase(world.reservations.begin() + static_cast<std::ptrdiff_t>(*it));
  }
  return true;
}

}  // namespace

void LaneOccupancy::rebuild(const World& world) {
  network_ = world.network.get();
  lanes_.assign(network_->lane_total(), {});
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& v = world.vehicles[i];
    lanes_[network_->lane_id({v.edge_id, v.lane_index})].push_back(static_cast<int>(i));
  }
  for (auto& list : lanes_) {
    std::sort(list.begin(), list.end(), [&](int a, int b) {
      const auto& va = world.vehicles[a];
      const auto& vb = world.vehicles[b];
      if (va.arc_pos != vb.arc_pos) return va.arc_pos < vb.arc_pos;
      return va.id < vb.id;
    });
  }
}

void LaneOccupancy::move(const World& world, int vehicle, LaneRef from) {
  auto& old_list = lanes_[network_->lane_id(from)];
  old_list.erase(std::remove(old_list.begin(), old_list.end(), vehicle), old_list.end());
  const auto& v = world.vehicles[vehicle];
  auto& list = lanes_[network_->lane_id({v.edge_id, v.lane_index})];
  auto pos = std::lower_bound(list.begin(), list.end(), vehicle, [&](int a, int b) {
    const auto& va = world.vehicles[a];
    const auto& vb = world.vehicles[b];
    if (va.arc_pos != vb.arc_pos) return va.arc_pos < vb.arc_pos;
    return va.id < vb.id;
  });
  list.insert(pos, vehicle);
}

Neighbor leader_from(const World& world, const LaneOccupancy& occ, LaneRef lane, double front, VehicleId self,
                     double lookahead) {
  const auto& net = *world.network;
  double offset = -front;  // distance from the query point to the lane start
  LaneRef cur = lane;
  for (int hop = 0; hop < kMaxHops; ++hop) {
    for (int i : occ.on_lane(cur)) {
      const auto& v = world.vehicles[i];
      if (v.id == self) {
        if (hop > 0) return {};  // looped around a closed lane
        continue;
      }
      if (hop > 0 || v.arc_pos >= front) return {offset + v.arc_pos - v.length, v.velocity, i, false};
    }
    offset += net.edges[cur.edge].length;
    if (offset > lookahead) return {};
    const auto next = net.successor(cur);
    if (!next) return {};
    cur = *next;
  }
  return {};
}

Neighbor follower_from(const World& world, const LaneOccupancy& occ, LaneRef lane, double rear, VehicleId self,
                       double lookbehind) {
  const auto& net = *world.network;
  // Breadth over predecessor lanes; `offset` is the distance from each lane's
  // end to the query point.
  struct Frontier {
    LaneRef lane;
    double offset;
    bool first;
  };
  std::vector<Frontier> frontier{{lane, 0.0, true}};
  Neighbor best;
  for (int hop = 0; hop < kMaxHops && !frontier.empty(); ++hop) {
    std::vector<Frontier> next;
    for (const auto& f : frontier) {
      const auto& list = occ.on_lane(f.lane);
      int found = -1;
      for (auto it = list.rbegin(); it != list.rend(); ++it) {
        const auto& v = world.vehicles[*it];
        if (v.id == self) {
          if (!f.first) return best;  // looped
          continue;
        }
        if (!f.first || v.arc_pos <= rear) {
          found = *it;
          break;
        }
      }
      if (found >= 0) {
        const auto& v = world.vehicles[found];
        const double gap = f.first ? rear - v.arc_pos : f.offset + net.edges[f.lane.edge].length - v.arc_pos;
        if (gap < best.gap) best = {gap, v.velocity, found, false};
        continue;
      }
      const double reach = f.first ? rear : f.offset + net.edges[f.lane.edge].length;
      if (reach > lookbehind) continue;
      for (const auto& pred : net.predecessors(f.lane)) next.push_back({pred, reach, false});
    }
    frontier = std::move(next);
  }
  return best;
}

Neighbor find_leader(const World& world, const LaneOccupancy& occ, int vehicle, const DynamicsParams& params,
                     bool respect_stops) {
  const auto& net = *world.network;
  const auto& me = world.vehicles[vehicle];
  double offset = -me.arc_pos;
  LaneRef cur{me.edge_id, me.lane_index};
  for (int hop = 0; hop < kMaxHops; ++hop) {
    const auto& list = occ.on_lane(cur);
    int found = -1;
    for (int i : list) {
      const auto& v = world.vehicles[i];
      if (v.id == me.id) {
        if (hop > 0) return {};
        continue;
      }
      if (hop > 0 || v.arc_pos >= me.arc_pos) {
        found = i;
        break;
      }
    }
    if (found >= 0) {
      const auto& v = world.vehicles[found];
      return {offset + v.arc_pos - v.length, v.velocity, found, false};
    }
    const double lane_end = offset + net.edges[cur.edge].length;
    const auto next = net.successor(cur);
    if (respect_stops && stop_at_end(world, me, cur)) {
      Neighbor stop{lane_end, 0.0, -1, true};
      if (next) {
        // A vehicle just past the line may still reach back over it.
        const Neighbor beyond = leader_from(world, occ, *next, 0.0, me.id, 0.0);
        if (beyond.exists() && lane_end + beyond.gap < stop.gap) {
          return {lane_end + beyond.gap, beyond.speed, beyond.vehicle, false};
        }
      }
      return stop;
    }
    if (lane_end > params.lookahead || !next) return {};
    offset = lane_end;
    cur = *next;
  }
  return {};
}

void update_junction_control(World& world, const LaneOccupancy& occ, const DynamicsParams& params) {
  const auto& net = *world.network;
  // Release reservations once the vehicle's rear has left the junction interior.
  std::erase_if(world.reservations, [&](const Reservation& r) {
    const int idx = world.index_of(r.vehicle);
    if (idx < 0) return true;
    const auto& v = world.vehicles[idx];
    const auto& m = net.junctions[r.junction].movements[r.movement];
    if (v.edge_id == m.approach || v.edge_id == m.internal) return false;
    return !(v.edge_id == m.exit && v.arc_pos - v.length < 0.0);
  });

  for (std::size_t j = 0; j < net.junctions.size(); ++j) {
    const auto& junction = net.junctions[j];
    if (junction.movements.empty()) continue;
    const int jid = static_cast<int>(j);
    // Anything physically inside the interior holds it.
    for (std::size_t m = 0; m < junction.movements.size(); ++m) {
      const auto& mv = junction.movements[m];
      auto claim = [&](int idx) {
        const auto& v = world.vehicles[idx];
        if (!world.holds_reservation(v.id, jid, static_cast<int>(m))) {
          world.reservations.push_back({v.id, jid, static_cast<int>(m)});
        }
      };
      for (int idx : occ.on_lane({mv.internal, 0})) claim(idx);
      for (int idx : occ.on_lane({mv.exit, 0})) {
        const auto& v = world.vehicles[idx];
        if (v.arc_pos - v.length < 0.0) claim(idx);
      }
    }

    struct Candidate {
      int movement;
      int vehicle;
      double distance;
      double time;
    };
    std::vector<Candidate> candidates(junction.movements.size(), Candidate{-1, -1, kInfinity, kInfinity});
    for (std::size_t m = 0; m < junction.movements.size(); ++m) {
      const auto& list = occ.on_lane({junction.movements[m].approach, 0});
      for (auto it = list.rbegin(); it != list.rend(); ++it) {
        const auto& v = world.vehicles[*it];
        if (world.holds_reservation(v.id, jid, static_cast<int>(m))) continue;
        const double dist = net.edges[v.edge_id].length - v.arc_pos;
        candidates[m] = {static_cast<int>(m), *it, dist, time_to_line(v.velocity, dist, params.idm.a_max)};
        break;
      }
    }
    std::vector<Candidate> order;
    for (const auto& c : candidates) {
      if (c.vehicle >= 0) order.push_back(c);
    }
    std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
      if (a.time != b.time) return a.time < b.time;
      return a.movement < b.movement;
    });
    for (const auto& c : order) {
      const auto& v = world.vehicles[c.vehicle];
      const auto& mv = junction.movements[c.movement];
      if (!mv.minor) {
        if (movement_busy(world, jid, c.movement)) continue;
        const double commit = v.velocity * params.dt + v.velocity * v.velocity / (2.0 * params.commit_decel) +
                              params.idm.s0 + 1.0;
        if (c.distance > commit) continue;
      } else {
        if (!(v.velocity < params.standstill_speed && c.distance <= params.idm.s0 + params.stop_tolerance)) continue;
        bool clear = !movement_busy(world, jid, c.movement);
        for (const auto& other : candidates) {
          if (!clear) break;
          if (other.vehicle < 0 || !junction.conflicting(other.movement, c.movement)) continue;
          if (junction.movements[other.movement].minor) continue;
          if (other.time < params.critical_gap) clear = false;
        }
        if (!clear) {
          if (!(params.minor_patience > 0.0 && v.waiting >= params.minor_patience)) continue;
          if (!force_entry(world, occ, jid, c.movement, params)) continue;
        }
      }
      world.reservations.push_back({v.id, jid, c.movement});
    }
  }
}

std::vector<LaneChange> lane_change_mandatory(World& world, LaneOccupancy& occ, int junction,
                                              const DynamicsParams& params) {
  const auto& net = *world.network;
  const auto& idm = params.idm;
  std::vector<LaneChange> changes;
  for (const auto& link : net.merges) {
    if (junction >= 0 && link.junction != junction) continue;
    // Front-most vehicles get the first chance at a gap.
    std::vector<int> movers;
    const auto& list = occ.on_lane(link.from);
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      if (world.vehicles[*it].arc_pos >= link.zone_start) movers.push_back(*it);
    }
    for (int idx : movers) {
      auto& v = world.vehicles[idx];
      const double target = v.arc_pos + link.offset;
      if (target < v.length) continue;
      const Neighbor lead = leader_from(world, occ, link.into, target, v.id, params.lookahead);
      // Query from the front so a vehicle alongside shows up with a negative gap.
      Neighbor follow = follower_from(world, occ, link.into, target, v.id, params.lookahead);
      if (follow.exists()) follow.gap -= v.length;
      if (lead.exists()) {
        if (lead.gap < idm.s0) continue;
        const double own = failsafe_acceleration(v.velocity, lead.gap, lead.speed, params.dt, params.b_emergency);
        if (own < -params.b_emergency) continue;
      }
      if (follow.exists()) {
        if (follow.gap < idm.s0) continue;
        const auto& f = world.vehicles[follow.vehicle];
        const double brake = idm_acceleration(f.velocity, follow.gap, v.velocity, local_idm(world, f, idm));
        if (brake < -params.merge_safe_decel) continue;
        const double safe = failsafe_acceleration(f.velocity, follow.gap, v.velocity, params.dt, params.b_emergency);
        if (safe < -params.b_emergency) continue;
      }
      const LaneRef from{v.edge_id, v.lane_index};
      v.edge_id = link.into.edge;
      v.lane_index = link.into.lane;
      v.arc_pos = target;
      occ.move(world, idx, from);
      changes.push_back({v.id, from, link.into, target});
    }
  }
  return changes;
}

}  // namespace mixtraffic
