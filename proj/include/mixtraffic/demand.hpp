#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "mixtraffic/dynamics.hpp"

namespace mixtraffic {

using ClassMix = std::map<VehicleClass, double>;

// Heterogeneous human-driven mix of the bottleneck environment.
ClassMix bottleneck_class_mix();
ClassMix passenger_only();

enum class ArrivalProcess { uniform, poisson };
enum class RvAssignment { counter, bernoulli };

struct InflowSpec {
  std::string route;
  double rate = 0.0;  // vehicles/hour
  double rv_penetration = 0.0;
  ClassMix class_mix = passenger_only();
  // RVs are drawn as passenger vehicles regardless of class_mix.
  bool rv_passenger_only = false;

  void validate() const;
};

enum class Spacing { uniform, uniform_with_jitter };

struct PopulationSpec {
  int total = 22;
  int rv_count = 1;
  Spacing spacing = Spacing::uniform_with_jitter;
  // Maximum jitter as a fraction of the uniform bumper gap.
  double jitter = 0.2;

  void validate() const;
};

// Places vehicles around the primary route of a closed network, all at rest.
// Vehicle index 0..rv_count-1 are RVs.
std::vector<VehicleState> init_closed_population(const RoadNetwork& network, const PopulationSpec& spec, Rng& rng,
                                                 double s0 = 2.0);

struct SpawnOptions {
  ArrivalProcess arrivals = ArrivalProcess::uniform;
  RvAssignment rv_assignment = RvAssignment::counter;
  double insertion_speed = 10.0;
};

// Emits vehicles for open networks. Emission times are a deterministic
// function of the rate; blocked insertions wait in a per-route queue.
class Spawner {
 public:
  Spawner() = default;
  Spawner(std::vector<InflowSpec> specs, SpawnOptions options);

  // Handles arrivals in (t, t + dt] and inserts what fits. Returns the
  // vehicles added to the world.
  std::vector<VehicleState> spawn_step(double t, World& world, Rng& rng, const DynamicsParams& params);

  std::size_t emitted() const { return emitted_; }
  std::size_t pending() const;
  const std::vector<InflowSpec>& specs() const { return specs_; }

 private:
  struct Pending {
    VehicleClass cls;
    Role role;
  };
  struct Stream {
    InflowSpec spec;
    std::size_t requested = 0;
    std::size_t counter = 0;
    double next_poisson = 0.0;
    std::deque<Pending> queue;
  };
  Pending make_request(Stream& stream, Rng& rng);

  std::vector<InflowSpec> specs_;
  std::vector<Stream> streams_;
  SpawnOptions options_;
  std::size_t emitted_ = 0;
};

// Requests from an inflow that arrive by elapsed time t under uniform headways.
std::size_t uniform_arrivals(double rate, double t);

struct ControlSchedule {
  int warmup_steps = 0;
  int control_steps = 0;
  bool policy_controls(long step) const { return step >= warmup_steps; }
  long total_steps() const { return warmup_steps + control_steps; }
};

ControlSchedule warmup_control(int warmup_steps, int horizon);

}  // namespace mixtraffic
