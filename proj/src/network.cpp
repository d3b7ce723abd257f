#include "mixtraffic/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "mixtraffic/errors.hpp"

namespace mixtraffic {

namespace {

constexpr double kPi = std::numbers::pi;

Edge make_edge(std::string id, Centerline centerline, int lanes, double speed_limit) {
  Edge e;
  e.id = std::move(id);
  e.length = centerline.length();
  e.lane_count = lanes;
  e.centerline = std::move(centerline);
  e.speed_limit = speed_limit;
  return e;
}

Pose end_pose(const Edge& e) { return e.centerline.at(e.length); }

void add_route_offsets(RoadNetwork& net, const Route& route, double start = 0.0) {
  double offset = start;
  for (int idx : route.edges) {
    net.edges[idx].route_offset = offset;
    offset += net.edges[idx].length;
  }
}

}  // namespace

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::ring: return "ring";
    case EnvKind::figure_eight: return "figure_eight";
    case EnvKind::intersection: return "intersection";
    case EnvKind::merge: return "merge";
    case EnvKind::bottleneck: return "bottleneck";
  }
  return "unknown";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "ring") return EnvKind::ring;
  if (name == "figure_eight" || name == "figure-eight") return EnvKind::figure_eight;
  if (name == "intersection") return EnvKind::intersection;
  if (name == "merge") return EnvKind::merge;
  if (name == "bottleneck") return EnvKind::bottleneck;
  throw ConfigError("unknown environment kind '" + std::string(name) + "'", "env");
}

std::string to_string(PriorityRule rule) {
  switch (rule) {
    case PriorityRule::none: return "none";
    case PriorityRule::two_way_stop: return "two_way_stop";
    case PriorityRule::merge_yield: return "merge_yield";
    case PriorityRule::lane_drop: return "lane_drop";
    case PriorityRule::crossing: return "crossing";
  }
  return "unknown";
}

bool Junction::conflicting(int a, int b) const {
  for (const auto& [x, y] : conflicts) {
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

int RoadNetwork::edge_index(std::string_view id) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int RoadNetwork::route_index(std::string_view id) const {
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (routes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

double RoadNetwork::route_length(const Route& route) const {
  double total = 0.0;
  for (int idx : route.edges) total += edges[idx].length;
  return total;
}

std::optional<LaneRef> RoadNetwork::successor(LaneRef ref) const { return successor_[lane_id(ref)]; }

const std::vector<LaneRef>& RoadNetwork::predecessors(LaneRef ref) const {
  return predecessors_[lane_id(ref)];
}

const MergeLink* RoadNetwork::merge_from(LaneRef ref) const {
  const int idx = merge_index_[lane_id(ref)];
  return idx < 0 ? nullptr : &merges[idx];
}

Pose RoadNetwork::lane_pose(int edge, int lane, double arc) const {
  const Edge& e = edges[edge];
  Pose pose = e.centerline.at(arc);
  pose.position = pose.position + left_normal(pose.heading) * (lane * lane_width);
  return pose;
}

RoadNetwork RoadNetwork::translated(Vec2 delta) const {
  RoadNetwork out = *this;
  for (auto& e : out.edges) e.centerline = e.centerline.translated(delta);
  for (auto& j : out.junctions) j.center = j.center + delta;
  return out;
}

void RoadNetwork::finalize() {
  lane_base_.clear();
  lane_ids_.clear();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    lane_base_.push_back(static_cast<int>(lane_ids_.size()));
    for (int l = 0; l < edges[e].lane_count; ++l) lane_ids_.push_back({static_cast<int>(e), l});
  }
  successor_.assign(lane_ids_.size(), std::nullopt);
  predecessors_.assign(lane_ids_.size(), {});
  for (const auto& [from, to] : lane_links) {
    successor_[lane_id(from)] = to;
    predecessors_[lane_id(to)].push_back(from);
  }
  merge_index_.assign(lane_ids_.size(), -1);
  for (std::size_t i = 0; i < merges.size(); ++i) merge_index_[lane_id(merges[i].from)] = static_cast<int>(i);
  control_.assign(edges.size(), ControlPoint{});
  for (std::size_t j = 0; j < junctions.size(); ++j) {
    const auto& movements = junctions[j].movements;
    for (std::size_t m = 0; m < movements.size(); ++m) {
      control_[movements[m].approach] = {static_cast<int>(j), static_cast<int>(m)};
    }
  }
}

double figure_eight_length(double inner_radius) {
  return 2.0 * (2.0 * kPi * inner_radius * 0.75) + 2.0 * (2.0 * inner_radius);
}

RoadNetwork build_ring(double circumference) {
  if (!(circumference >= 150.0 && circumference <= 400.0)) {
    throw ConfigError("ring circumference must lie in [150, 400] m", "network.circumference");
  }
  RoadNetwork net;
  net.kind = EnvKind::ring;
  net.closed = true;
  const double radius = circumference / (2.0 * kPi);
  net.edges.push_back(make_edge("ring", Centerline({radius, 0.0}, kPi / 2).arc(circumference, 1.0 / radius), 1,
                                kDefaultSpeedLimit));
  net.lane_links.push_back({{0, 0}, {0, 0}});
  net.routes.push_back({"loop", {0}});
  Junction joint;
  joint.id = "ring_joint";
  joint.incoming = {"ring"};
  joint.outgoing = {"ring"};
  joint.center = {radius, 0.0};
  net.junctions.push_back(joint);
  net.finalize();
  return net;
}

RoadNetwork build_figure_eight(double inner_radius) {
  if (!(inner_radius >= 15.0 && inner_radius <= 40.0)) {
    throw ConfigError("figure-eight inner radius must lie in [15, 40] m", "network.radius");
  }
  const double r = inner_radius;
  const double box = kLaneWidth;  // conflict zone length along each crossing
  const double straight = r - box / 2;
  const double loop = 1.5 * kPi * r;

  RoadNetwork net;
  net.kind = EnvKind::figure_eight;
  net.closed = true;

  // Crossing lines meet at the origin at right angles; each loop is tangent to both.
  Pose cursor{unit(kPi / 4) * (box / 2), kPi / 4};
  auto append = [&](std::string id, double length, double curvature, bool internal) {
    Centerline c(cursor.position, cursor.heading);
    if (curvature == 0.0) {
      c.line(length);
    } else {
      c.arc(length, curvature);
    }
    Edge e = make_edge(std::move(id), std::move(c), 1, kDefaultSpeedLimit);
    e.internal = internal;
    cursor = end_pose(e);
    net.edges.push_back(std::move(e));
  };
  append("cross_up_out", straight, 0.0, false);
  append("upper_loop", loop, 1.0 / r, false);
  append("cross_down_in", straight, 0.0, false);
  append("cross_down_x", box, 0.0, true);
  append("cross_down_out", straight, 0.0, false);
  append("lower_loop", loop, -1.0 / r, false);
  append("cross_up_in", straight, 0.0, false);
  append("cross_up_x", box, 0.0, true);

  const int n = static_cast<int>(net.edges.size());
  Route loop_route{"loop", {}};
  for (int i = 0; i < n; ++i) {
    net.lane_links.push_back({{i, 0}, {(i + 1) % n, 0}});
    loop_route.edges.push_back(i);
  }
  net.routes.push_back(loop_route);
  add_route_offsets(net, loop_route);

  Junction center;
  center.id = "center";
  center.incoming = {"cross_down_in", "cross_up_in"};
  center.outgoing = {"cross_down_out", "cross_up_out"};
  center.rule = PriorityRule::crossing;
  center.center = {0.0, 0.0};
  center.movements = {{net.edge_index("cross_down_in"), net.edge_index("cross_down_x"),
                       net.edge_index("cross_down_out"), false},
                      {net.edge_index("cross_up_in"), net.edge_index("cross_up_x"),
                       net.edge_index("cross_up_out"), false}};
  center.conflicts = {{0, 1}};
  net.junctions.push_back(center);
  net.finalize();
  return net;
}

RoadNetwork build_intersection(const IntersectionGeometry& geometry) {
  if (!(geometry.approach_length >= 120.0)) {
    throw ConfigError("approach length must be at least 120 m", "network.approach_length");
  }
  if (!(geometry.speed_limit > 0.0)) throw ConfigError("speed limit must be positive", "network.speed_limit");
  const double half = kLaneWidth;       // half-size of the junction box
  const double offset = kLaneWidth / 2;  // right-hand traffic lane offset
  const double len = geometry.approach_length;
  const double limit = geometry.speed_limit;

  RoadNetwork net;
  net.kind = EnvKind::intersection;
  net.closed = false;

  struct Approach {
    std::string from;
    std::string to;
    double heading;
    Vec2 lateral;  // offset of the lane from the road axis
  };
  // Travel headings: traffic from the north heads south, etc.
  const std::array<Approach, 4> approaches{{
      {"north", "south", -kPi / 2, {-offset, 0.0}},
      {"south", "north", kPi / 2, {offset, 0.0}},
      {"east", "west", kPi, {0.0, offset}},
      {"west", "east", 0.0, {0.0, -offset}},
  }};
  for (const auto& a : approaches) {
    const Vec2 dir = unit(a.heading);
    const Vec2 stop_line = a.lateral - dir * half;
    Edge in = make_edge(a.from + "_in", Centerline(stop_line - dir * len, a.heading).line(len), 1, limit);
    in.source = true;
    net.edges.push_back(std::move(in));
  }
  for (const auto& a : approaches) {
    const Vec2 dir = unit(a.heading);
    Edge x = make_edge(a.from + "_x", Centerline(a.lateral - dir * half, a.heading).line(2 * half), 1, limit);
    x.internal = true;
    net.edges.push_back(std::move(x));
  }
  for (const auto& a : approaches) {
    const Vec2 dir = unit(a.heading);
    Edge out = make_edge(a.to + "_out", Centerline(a.lateral + dir * half, a.heading).line(len), 1, limit);
    out.sink = true;
    net.edges.push_back(std::move(out));
  }

  Junction j;
  j.id = "center";
  j.rule = PriorityRule::two_way_stop;
  j.center = {0.0, 0.0};
  j.minor = {"east_in", "west_in"};
  for (int i = 0; i < 4; ++i) {
    const auto& a = approaches[i];
    const int in = i, x = 4 + i, out = 8 + i;
    net.lane_links.push_back({{in, 0}, {x, 0}});
    net.lane_links.push_back({{x, 0}, {out, 0}});
    Route route{a.from + "_" + a.to, {in, x, out}};
    add_route_offsets(net, route);
    net.routes.push_back(route);
    j.incoming.push_back(net.edges[in].id);
    j.outgoing.push_back(net.edges[out].id);
    j.movements.push_back({in, x, out, a.from == "east" || a.from == "west"});
  }
  // North/south movements cross both east/west movements.
  j.conflicts = {{0, 2}, {0, 3}, {1, 2}, {1, 3}};
  net.junctions.push_back(j);
  net.finalize();
  return net;
}

RoadNetwork build_merge(const MergeGeometry& g) {
  if (!(g.highway_length > 0.0) || !(g.ramp_length > 0.0)) {
    throw ConfigError("merge lengths must be positive", "network.highway_length");
  }
  if (!(g.ramp_fractions[0] > 0.0 && g.ramp_fractions[0] < g.ramp_fractions[1] && g.ramp_fractions[1] < 1.0)) {
    throw ConfigError("ramp attachment fractions must satisfy 0 < f1 < f2 < 1", "network.ramp_fractions");
  }
  if (!(g.merge_zone > 0.0 && g.merge_zone < g.ramp_length)) {
    throw ConfigError("merge zone must be shorter than the ramp", "network.merge_zone");
  }
  const double x1 = g.highway_length * g.ramp_fractions[0];
  const double x2 = g.highway_length * g.ramp_fractions[1];
  if (g.ramp_length - g.merge_zone > x1) throw ConfigError("ramp too long for attachment point", "network.ramp_length");

  RoadNetwork net;
  net.kind = EnvKind::merge;
  net.closed = false;

  auto highway = [&](std::string id, double from, double to) {
    return make_edge(std::move(id), Centerline({from, 0.0}, 0.0).line(to - from), 1, g.speed_limit);
  };
  net.edges.push_back(highway("highway_0", 0.0, x1));
  net.edges.push_back(highway("highway_1", x1, x2));
  net.edges.push_back(highway("highway_2", x2, g.highway_length));
  net.edges[0].source = true;
  net.edges[2].sink = true;

  // Ramps approach from the right at 20 degrees, then run parallel to the
  // highway one lane width away for the length of the merge zone.
  const double approach = g.ramp_length - g.merge_zone;
  const double angle = 20.0 * kPi / 180.0;
  auto ramp = [&](std::string id, double attach_x) {
    const Vec2 zone_start{attach_x - g.merge_zone, -kLaneWidth};
    Centerline c(zone_start - unit(angle) * approach, angle);
    c.line(approach).turn_to(0.0).line(g.merge_zone);
    Edge e = make_edge(std::move(id), std::move(c), 1, g.speed_limit);
    e.source = true;
    e.route_offset = attach_x - g.ramp_length;
    return e;
  };
  net.edges.push_back(ramp("ramp_1", x1));
  net.edges.push_back(ramp("ramp_2", x2));

  net.lane_links.push_back({{0, 0}, {1, 0}});
  net.lane_links.push_back({{1, 0}, {2, 0}});
  Route main{"highway", {0, 1, 2}};
  add_route_offsets(net, main);
  net.routes.push_back(main);
  net.routes.push_back({"ramp_1", {3, 1, 2}});
  net.routes.push_back({"ramp_2", {4, 2}});

  for (int k = 0; k < 2; ++k) {
    const int ramp_edge = 3 + k;
    const int upstream = k;  // highway_0 for the first ramp, highway_1 for the second
    Junction j;
    j.id = "merge_" + std::to_string(k + 1);
    j.incoming = {net.edges[upstream].id, net.edges[ramp_edge].id};
    j.outgoing = {net.edges[upstream + 1].id};
    j.rule = PriorityRule::merge_yield;
    j.minor = {net.edges[ramp_edge].id};
    j.center = {k == 0 ? x1 : x2, 0.0};
    net.junctions.push_back(j);
    MergeLink link;
    link.from = {ramp_edge, 0};
    link.into = {upstream, 0};
    link.offset = net.edges[upstream].length - g.ramp_length;
    link.zone_start = g.ramp_length - g.merge_zone;
    link.junction = k;
    net.merges.push_back(link);
  }
  net.finalize();
  return net;
}

RoadNetwork build_bottleneck(int scale) {
  BottleneckGeometry g;
  g.scale = scale;
  return build_bottleneck(g);
}

RoadNetwork build_bottleneck(const BottleneckGeometry& g) {
  if (g.scale < 1) throw ConfigError("bottleneck scale must be at least 1", "network.scale");
  for (double len : g.segment_lengths) {
    if (!(len > g.merge_zone)) {
      throw ConfigError("bottleneck segments must be longer than the merge zone", "network.segment_lengths");
    }
  }
  RoadNetwork net;
  net.kind = EnvKind::bottleneck;
  net.closed = false;
  const std::array<int, 3> lanes{4 * g.scale, 2 * g.scale, g.scale};
  double x = 0.0;
  for (int k = 0; k < 3; ++k) {
    // Lane groups are centered on the road axis.
    const double y0 = -(lanes[k] - 1) / 2.0 * kLaneWidth;
    Edge e = make_edge("bottleneck_" + std::to_string(k),
                       Centerline({x, y0}, 0.0).line(g.segment_lengths[k]), lanes[k], g.speed_limit);
    e.source = (k == 0);
    e.sink = (k == 2);
    net.edges.push_back(std::move(e));
    x += g.segment_lengths[k];
  }
  Route route{"main", {0, 1, 2}};
  add_route_offsets(net, route);
  net.routes.push_back(route);

  // Lanes (2j, 2j+1) feed lane j downstream. The lane laterally closer to the
  // downstream lane continues; its partner merges into it before the drop.
  auto lateral = [&](int edge, int lane) { return net.lane_pose(edge, lane, 0.0).position.y; };
  for (int k = 0; k < 2; ++k) {
    const double target_y_base = -(lanes[k + 1] - 1) / 2.0 * kLaneWidth;
    for (int j = 0; j < lanes[k + 1]; ++j) {
      const double target_y = target_y_base + j * kLaneWidth;
      const int a = 2 * j, b = 2 * j + 1;
      const bool a_continues = std::abs(lateral(k, a) - target_y) <= std::abs(lateral(k, b) - target_y) + 1e-9;
      const int keep = a_continues ? a : b;
      const int drop = a_continues ? b : a;
      net.lane_links.push_back({{k, keep}, {k + 1, j}});
      MergeLink link;
      link.from = {k, drop};
      link.into = {k, keep};
      link.offset = 0.0;
      link.zone_start = g.segment_lengths[k] - g.merge_zone;
      link.junction = k;
      net.merges.push_back(link);
    }
    Junction drop;
    drop.id = "lane_drop_" + std::to_string(k + 1);
    drop.incoming = {net.edges[k].id};
    drop.outgoing = {net.edges[k + 1].id};
    drop.rule = PriorityRule::lane_drop;
    drop.center = {net.edges[k + 1].centerline.at(0.0).position.x, 0.0};
    net.junctions.push_back(drop);
  }
  net.finalize();
  return net;
}

Pose lane_to_world(const RoadNetwork& network, int edge, int lane, double arc) {
  if (edge < 0 || edge >= static_cast<int>(network.edges.size())) throw DomainError("edge index out of range");
  const Edge& e = network.edges[edge];
  if (lane < 0 || lane >= e.lane_count) throw DomainError("lane index out of range on edge " + e.id);
  if (!(arc >= 0.0 && arc <= e.length)) throw DomainError("arc position outside edge " + e.id);
  return network.lane_pose(edge, lane, arc);
}

std::string network_to_text(const RoadNetwork& net) {
  using nlohmann::json;
  json root;
  root["kind"] = to_string(net.kind);
  root["closed"] = net.closed;
  root["lane_width"] = net.lane_width;
  root["total_length"] = net.total_length();
  json edges = json::array();
  for (const auto& e : net.edges) {
    json pieces = json::array();
    for (const auto& p : e.centerline.pieces()) {
      pieces.push_back({{"start", {p.start.x, p.start.y}},
                        {"heading", p.heading},
                        {"length", p.length},
                        {"curvature", p.curvature}});
    }
    edges.push_back({{"id", e.id},
                     {"length", e.length},
                     {"lanes", e.lane_count},
                     {"speed_limit", e.speed_limit},
                     {"internal", e.internal},
                     {"source", e.source},
                     {"sink", e.sink},
                     {"route_offset", e.route_offset},
                     {"centerline", pieces}});
  }
  root["edges"] = edges;
  json junctions = json::array();
  for (const auto& j : net.junctions) {
    json movements = json::array();
    for (const auto& m : j.movements) {
      movements.push_back({{"approach", net.edges[m.approach].id},
                           {"internal", net.edges[m.internal].id},
                           {"exit", net.edges[m.exit].id},
                           {"minor", m.minor}});
    }
    json conflicts = json::array();
    for (const auto& [a, b] : j.conflicts) conflicts.push_back({a, b});
    junctions.push_back({{"id", j.id},
                         {"rule", to_string(j.rule)},
                         {"incoming", j.incoming},
                         {"outgoing", j.outgoing},
                         {"minor", j.minor},
                         {"center", {j.center.x, j.center.y}},
                         {"movements", movements},
                         {"conflicts", conflicts}});
  }
  root["junctions"] = junctions;
  json routes = json::array();
  for (const auto& r : net.routes) {
    json ids = json::array();
    for (int e : r.edges) ids.push_back(net.edges[e].id);
    routes.push_back({{"id", r.id}, {"edges", ids}, {"length", net.route_length(r)}});
  }
  root["routes"] = routes;
  json links = json::array();
  for (const auto& [from, to] : net.lane_links) {
    links.push_back({{"from", {net.edges[from.edge].id, from.lane}}, {"to", {net.edges[to.edge].id, to.lane}}});
  }
  root["lane_links"] = links;
  json merges = json::array();
  for (const auto& m : net.merges) {
    merges.push_back({{"from", {net.edges[m.from.edge].id, m.from.lane}},
                      {"into", {net.edges[m.into.edge].id, m.into.lane}},
                      {"offset", m.offset},
                      {"zone_start", m.zone_start},
                      {"junction", net.junctions[m.junction].id}});
  }
  root["merges"] = merges;
  return root.dump(2) + "\n";
}

}  // namespace mixtraffic
