#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixtraffic/geometry.hpp"

namespace mixtraffic {

enum class EnvKind { ring, figure_eight, intersection, merge, bottleneck };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);

enum class PriorityRule { none, two_way_stop, merge_yield, lane_drop, crossing };

std::string to_string(PriorityRule rule);

inline constexpr double kLaneWidth = 3.2;
inline constexpr double kDefaultSpeedLimit = 30.0;

struct LaneRef {
  int edge = -1;
  int lane = 0;
  bool operator==(const LaneRef&) const = default;
};

struct Edge {
  std::string id;
  double length = 0.0;
  int lane_count = 1;
  // Centerline of lane 0; lane i is offset i * lane_width to the left.
  Centerline centerline;
  double speed_limit = kDefaultSpeedLimit;
  bool internal = false;  // junction interior (conflict zone)
  bool source = false;    // vehicles enter here
  bool sink = false;      // vehicles leave the network at the end
  // Position of the edge start along its primary route, for time-space output.
  double route_offset = 0.0;
};

// One controlled path through a junction: approach -> interior -> exit.
struct Movement {
  int approach = -1;
  int internal = -1;
  int exit = -1;
  bool minor = false;
};

struct Junction {
  std::string id;
  std::vector<std::string> incoming;
  std::vector<std::string> outgoing;
  PriorityRule rule = PriorityRule::none;
  std::vector<std::string> minor;
  Vec2 center;
  std::vector<Movement> movements;
  std::vector<std::pair<int, int>> conflicts;  // pairs of movement indices

  bool conflicting(int a, int b) const;
};

// Mandatory merge: a vehicle on `from` at arc p may move to `into` at p + offset
// once p >= zone_start. The `from` lane has no successor and ends in a stop.
struct MergeLink {
  LaneRef from;
  LaneRef into;
  double offset = 0.0;
  double zone_start = 0.0;
  int junction = -1;
};

struct Route {
  std::string id;
  std::vector<int> edges;
};

struct IntersectionGeometry {
  double approach_length = 150.0;
  double speed_limit = 10.0;
};

struct MergeGeometry {
  double highway_length = 700.0;
  double ramp_length = 100.0;
  std::array<double, 2> ramp_fractions{1.0 / 3.0, 2.0 / 3.0};
  double merge_zone = 60.0;
  double speed_limit = kDefaultSpeedLimit;
};

struct BottleneckGeometry {
  int scale = 1;
  std::array<double, 3> segment_lengths{200.0, 100.0, 100.0};
  double merge_zone = 50.0;
  double speed_limit = kDefaultSpeedLimit;
};

struct ControlPoint {
  int junction = -1;
  int movement = -1;
};

// Immutable after construction by one of the builders below.
struct RoadNetwork {
  EnvKind kind = EnvKind::ring;
  bool closed = false;
  double lane_width = kLaneWidth;
  std::vector<Edge> edges;
  std::vector<Junction> junctions;
  std::vector<Route> routes;
  std::vector<std::pair<LaneRef, LaneRef>> lane_links;
  std::vector<MergeLink> merges;

  int edge_index(std::string_view id) const;
  int route_index(std::string_view id) const;
  double route_length(const Route& route) const;
  // Length of the primary (first) route; the loop length of closed networks.
  double total_length() const { return route_length(routes.front()); }

  int lane_total() const { return static_cast<int>(lane_ids_.size()); }
  int lane_id(LaneRef ref) const { return lane_base_[ref.edge] + ref.lane; }
  LaneRef lane_ref(int id) const { return lane_ids_[id]; }
  std::optional<LaneRef> successor(LaneRef ref) const;
  const std::vector<LaneRef>& predecessors(LaneRef ref) const;
  const MergeLink* merge_from(LaneRef ref) const;
  // Junction movement whose approach is `edge`, if the edge ends at a stop line.
  ControlPoint control_at(int edge) const { return control_[edge]; }
  // Unchecked pose; arc positions outside the edge are extrapolated.
  Pose lane_pose(int edge, int lane, double arc) const;

  RoadNetwork translated(Vec2 delta) const;

  // Builds the lane lookup tables; builders call this once.
  void finalize();

 private:
  std::vector<int> lane_base_;
  std::vector<LaneRef> lane_ids_;
  std::vector<std::optional<LaneRef>> successor_;
  std::vector<std::vector<LaneRef>> predecessors_;
  std::vector<int> merge_index_;
  std::vector<ControlPoint> control_;
};

RoadNetwork build_ring(double circumference);
RoadNetwork build_figure_eight(double inner_radius);
RoadNetwork build_intersection(const IntersectionGeometry& geometry = {});
RoadNetwork build_merge(const MergeGeometry& geometry = {});
RoadNetwork build_bottleneck(int scale);
RoadNetwork build_bottleneck(const BottleneckGeometry& geometry);

// Two three-quarter loops plus two straight crossings of length 2r each.
double figure_eight_length(double inner_radius);

// Checked lane position: arc in [0, length], lane < lane_count.
Pose lane_to_world(const RoadNetwork& network, int edge, int lane, double arc);

// Human-readable structured text (JSON) describing the whole network.
std::string network_to_text(const RoadNetwork& network);

}  // namespace mixtraffic
