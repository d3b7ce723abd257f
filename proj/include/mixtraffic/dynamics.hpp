#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mixtraffic/network.hpp"
#include "mixtraffic/vehicle.hpp"

namespace mixtraffic {

using Rng = std::mt19937_64;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct IdmParams {
  double v0 = 30.0;
  double time_headway = 1.0;
  double a_max = 1.0;
  double b_comf = 1.5;
  double delta = 4.0;
  double s0 = 2.0;
  double noise_bound = 0.2;

  void validate() const;
};

enum class ActionKind { acceleration, velocity };

struct ActionSpec {
  ActionKind kind = ActionKind::acceleration;
  double lower = -1.0;
  double upper = 1.0;
};

struct DynamicsParams {
  IdmParams idm;
  double dt = 0.1;
  double b_emergency = 4.5;
  // Physical limit applied to velocity-tracking actions.
  double accel_envelope = 4.0;
  double lookahead = 500.0;
  // Minor approaches enter when every conflicting major vehicle is at least
  // this many seconds from its stop line.
  double critical_gap = 3.0;
  // After waiting this long at the line a minor vehicle enters as soon as
  // every conflicting major vehicle can still stop under emergency braking.
  // Zero disables forced entry.
  double minor_patience = 20.0;
  // A minor-approach vehicle counts as stopped at the line within s0 + this.
  double stop_tolerance = 1.5;
  // Majors claim the junction once they could no longer stop at this deceleration.
  double commit_decel = 1.5;
  // Merge gap acceptance: deceleration the new follower must not exceed.
  double merge_safe_decel = 3.0;
  double standstill_speed = 0.3;
};

// Free-road behaviour when leader_v is empty (gap treated as infinite).
double idm_acceleration(double v, double gap, std::optional<double> leader_v, const IdmParams& p);

// Uniform draw in [-bound, bound]; zero bound draws nothing.
double draw_noise(Rng& rng, double bound);

double hv_acceleration(const VehicleState& vehicle, double gap, std::optional<double> leader_v, const IdmParams& p,
                       Rng& rng);

// Effective acceleration for a raw policy output; throws PolicyError when
// raw_action is not finite.
double apply_rv_action(const VehicleState& vehicle, double raw_action, const ActionSpec& spec, double dt,
                       double envelope = 4.0);

// Largest acceleration after which braking at b_emergency still stops
// short of the leader, assuming the leader brakes just as hard.
double failsafe_acceleration(double v, double gap, std::optional<double> leader_v, double dt,
                             double b_emergency = 4.5);

struct ExitRecord {
  double time = 0.0;
  VehicleId id = 0;
  bool operator==(const ExitRecord&) const = default;
};

class ExitLog {
 public:
  void record(double time, VehicleId id);
  // Exits with time in (now - window, now].
  std::size_t count_window(double now, double window) const;
  const std::vector<ExitRecord>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool operator==(const ExitLog&) const = default;

 private:
  std::vector<ExitRecord> entries_;
};

// A vehicle cleared to pass through a controlled junction movement.
struct Reservation {
  VehicleId vehicle = 0;
  int junction = -1;
  int movement = -1;
  bool operator==(const Reservation&) const = default;
};

struct World {
  std::shared_ptr<const RoadNetwork> network;
  std::vector<VehicleState> vehicles;  // ascending id
  double time = 0.0;
  std::int64_t step = 0;
  VehicleId next_id = 0;
  ExitLog exits;
  std::vector<Reservation> reservations;
  bool collided = false;

  int index_of(VehicleId id) const;
  bool holds_reservation(VehicleId id, int junction, int movement) const;
};

// Vehicles on each lane sorted by arc position.
class LaneOccupancy {
 public:
  explicit LaneOccupancy(const World& world) { rebuild(world); }
  void rebuild(const World& world);
  const std::vector<int>& on_lane(LaneRef ref) const { return lanes_[network_->lane_id(ref)]; }
  void move(const World& world, int vehicle, LaneRef from);

 private:
  const RoadNetwork* network_ = nullptr;
  std::vector<std::vector<int>> lanes_;
};

struct Neighbor {
  double gap = kInfinity;
  double speed = 0.0;
  int vehicle = -1;  // -1 for none or for a stop obstacle
  bool obstacle = false;
  bool exists() const { return gap < kInfinity; }
};

// Nearest constraint ahead of a vehicle: a real leader or a stop line it may
// not pass. Stop lines are ignored when respect_stops is false.
Neighbor find_leader(const World& world, const LaneOccupancy& occ, int vehicle, const DynamicsParams& params,
                     bool respect_stops = true);
// Real vehicles only, starting from an arbitrary front position on a lane.
Neighbor leader_from(const World& world, const LaneOccupancy& occ, LaneRef lane, double front, VehicleId self,
                     double lookahead);
// Nearest vehicle whose front is at or behind `rear` on the lane or its predecessors.
Neighbor follower_from(const World& world, const LaneOccupancy& occ, LaneRef lane, double rear, VehicleId self,
                       double lookbehind);

// Releases finished reservations and grants new ones for the frozen state.
void update_junction_control(World& world, const LaneOccupancy& occ, const DynamicsParams& params);

struct LaneChange {
  VehicleId vehicle = 0;
  LaneRef from;
  LaneRef to;
  double arc_pos = 0.0;
};

// Mandatory merges out of ending lanes at one junction (or every junction when
// junction < 0). Accepted merges are applied to the world and the occupancy.
std::vector<LaneChange> lane_change_mandatory(World& world, LaneOccupancy& occ, int junction,
                                              const DynamicsParams& params);

struct StepOutcome {
  std::vector<VehicleId> exited;
  bool collision = false;
};

// One forward-Euler step. commanded[i] belongs to world.vehicles[i]; the
// failsafe bound is applied before integration.
StepOutcome step_dynamics(World& world, std::span<const double> commanded, const DynamicsParams& params);

// IDM parameters with v0 capped at the vehicle's current speed limit.
IdmParams local_idm(const World& world, const VehicleState& vehicle, const IdmParams& base);

}  // namespace mixtraffic
