#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mixtraffic/errors.hpp"
#include "support.hpp"

using namespace mixtraffic;

namespace {

double polyline_length(const std::vector<Vec2>& pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
  return total;
}

// Every edge: positive length, pieces summing to the length, and a finely
// sampled polyline agreeing with the declared arc length.
void check_edges(const RoadNetwork& net) {
  for (const auto& e : net.edges) {
    CAPTURE(e.id);
    CHECK(e.length > 0.0);
    CHECK(e.lane_count >= 1);
    double pieces = 0.0;
    for (const auto& p : e.centerline.pieces()) pieces += p.length;
    CHECK(pieces == doctest::Approx(e.length).epsilon(1e-12));
    CHECK(std::abs(polyline_length(e.centerline.sample(0.005)) - e.length) < 1e-6);
  }
}

void check_routes_sum(const RoadNetwork& net) {
  for (const auto& r : net.routes) {
    double sum = 0.0;
    for (int e : r.edges) sum += net.edges[e].length;
    CHECK(net.route_length(r) == doctest::Approx(sum).epsilon(1e-12));
  }
}

// Consecutive route edges meet in 2D.
void check_route_continuity(const RoadNetwork& net, const Route& route) {
  for (std::size_t k = 0; k < route.edges.size(); ++k) {
    const int a = route.edges[k];
    const int b = route.edges[(k + 1) % route.edges.size()];
    if (k + 1 == route.edges.size() && !net.closed) break;
    const Vec2 end = lane_to_world(net, a, 0, net.edges[a].length).position;
    const Vec2 start = lane_to_world(net, b, 0, 0.0).position;
    CHECK(distance(end, start) < 1e-6);
  }
}

}  // namespace

TEST_CASE("ring of 220 m is a closed loop of exactly that length") {
  const RoadNetwork net = build_ring(220.0);
  CHECK(net.closed);
  CHECK(net.total_length() == 220.0);
  check_edges(net);
  check_routes_sum(net);
  check_route_continuity(net, net.routes.front());
}

TEST_CASE("ring closure: arc 0 and arc C coincide") {
  const RoadNetwork net = build_ring(260.0);
  const Vec2 a = lane_to_world(net, 0, 0, 0.0).position;
  const Vec2 b = lane_to_world(net, 0, 0, 260.0).position;
  CHECK(distance(a, b) < 1e-6);
}

TEST_CASE("ring half-way point is diametrically opposite at distance C/pi") {
  const RoadNetwork net = build_ring(220.0);
  const Vec2 a = lane_to_world(net, 0, 0, 0.0).position;
  const Vec2 b = lane_to_world(net, 0, 0, 110.0).position;
  CHECK(std::abs(distance(a, b) - 220.0 / std::numbers::pi) < 1e-6);
}

TEST_CASE("ring density arithmetic for 22 vehicles on 230 m") {
  const RoadNetwork net = build_ring(230.0);
  CHECK(22.0 / (net.total_length() / 1000.0) == doctest::Approx(95.652).epsilon(1e-4));
}

TEST_CASE("ring circumference outside [150, 400] is a configuration error") {
  CHECK_THROWS_AS(build_ring(149.0), ConfigError);
  CHECK_THROWS_AS(build_ring(401.0), ConfigError);
  CHECK_NOTHROW(build_ring(150.0));
  CHECK_NOTHROW(build_ring(400.0));
}

TEST_CASE("figure eight length formula, monotonicity and symmetry") {
  for (double r : {15.0, 20.0, 25.0, 30.0, 40.0}) {
    CAPTURE(r);
    const RoadNetwork net = build_figure_eight(r);
    CHECK(net.closed);
    CHECK(net.total_length() == doctest::Approx(3.0 * std::numbers::pi * r + 4.0 * r).epsilon(1e-12));
    CHECK(figure_eight_length(r) == doctest::Approx(net.total_length()).epsilon(1e-12));
    check_edges(net);
    check_routes_sum(net);
    check_route_continuity(net, net.routes.front());
  }
  double previous = 0.0;
  for (double r = 15.0; r <= 40.0; r += 0.5) {
    const double len = build_figure_eight(r).total_length();
    CHECK(len > previous);
    previous = len;
  }
  const RoadNetwork net = build_figure_eight(30.0);
  const int upper = net.edge_index("upper_loop");
  const int lower = net.edge_index("lower_loop");
  REQUIRE(upper >= 0);
  REQUIRE(lower >= 0);
  CHECK(net.edges[upper].length == net.edges[lower].length);
  // The loop splits into two halves of identical length at the crossing.
  const auto& route = net.routes.front().edges;
  double first_half = 0.0;
  for (std::size_t k = 0; k < route.size() / 2; ++k) first_half += net.edges[route[k]].length;
  CHECK(first_half == doctest::Approx(net.total_length() / 2).epsilon(1e-12));
  CHECK_THROWS_AS(build_figure_eight(14.9), ConfigError);
  CHECK_THROWS_AS(build_figure_eight(40.1), ConfigError);
}

TEST_CASE("intersection is a two-way stop with east and west minor") {
  const RoadNetwork net = build_intersection();
  check_edges(net);
  check_routes_sum(net);
  REQUIRE(net.junctions.size() == 1);
  const auto& j = net.junctions.front();
  CHECK(j.rule == PriorityRule::two_way_stop);
  CHECK(j.minor == std::vector<std::string>{"east_in", "west_in"});
  for (const char* approach : {"north_in", "south_in", "east_in", "west_in"}) {
    const int e = net.edge_index(approach);
    REQUIRE(e >= 0);
    CHECK(net.edges[e].length >= 120.0);
    CHECK(net.edges[e].lane_count == 1);
    CHECK(net.edges[e].speed_limit == 10.0);
  }
  for (const auto& r : net.routes) check_route_continuity(net, r);
}

TEST_CASE("intersection stop lines are equidistant from the center") {
  const RoadNetwork net = build_intersection();
  const Vec2 c = net.junctions.front().center;
  std::vector<double> d;
  for (const char* approach : {"north_in", "south_in", "east_in", "west_in"}) {
    const int e = net.edge_index(approach);
    d.push_back(distance(lane_to_world(net, e, 0, net.edges[e].length).position, c));
  }
  for (double x : d) CHECK(x == doctest::Approx(d.front()).epsilon(1e-12));
}

TEST_CASE("intersection north and south approaches map onto each other by a half turn") {
  const RoadNetwork net = build_intersection();
  const Vec2 c = net.junctions.front().center;
  const int n = net.edge_index("north_in");
  const int s = net.edge_index("south_in");
  for (double arc = 0.0; arc <= net.edges[n].length; arc += 7.5) {
    const Pose pn = lane_to_world(net, n, 0, arc);
    const Pose ps = lane_to_world(net, s, 0, arc);
    const Vec2 rotated{2 * c.x - pn.position.x, 2 * c.y - pn.position.y};
    CHECK(distance(rotated, ps.position) < 1e-9);
    CHECK(std::abs(std::remainder(pn.heading + std::numbers::pi - ps.heading, 2 * std::numbers::pi)) < 1e-9);
  }
}

TEST_CASE("merge has two merge-yield junctions and ramp routes end on the highway exit") {
  const RoadNetwork net = build_merge();
  check_edges(net);
  check_routes_sum(net);
  int yields = 0;
  for (const auto& j : net.junctions) yields += j.rule == PriorityRule::merge_yield;
  CHECK(yields == 2);
  CHECK(net.junctions.size() == 2);
  const Route& highway = net.routes[net.route_index("highway")];
  CHECK(net.route_length(highway) == doctest::Approx(700.0));
  const int exit_edge = highway.edges.back();
  CHECK(net.edges[exit_edge].sink);
  for (const auto& r : net.routes) {
    CHECK(r.edges.back() == exit_edge);
    if (r.id != "highway") CHECK(net.route_length(highway) > net.route_length(r));
  }
  check_route_continuity(net, highway);
}

TEST_CASE("bottleneck lane counts follow 4, 2, 1 times the scale") {
  for (int scale : {1, 2}) {
    CAPTURE(scale);
    const RoadNetwork net = build_bottleneck(scale);
    check_edges(net);
    const auto& route = net.routes.front().edges;
    REQUIRE(route.size() == 3);
    CHECK(net.edges[route[0]].lane_count == 4 * scale);
    CHECK(net.edges[route[1]].lane_count == 2 * scale);
    CHECK(net.edges[route[2]].lane_count == 1 * scale);
    CHECK(net.edges[route[0]].length == 200.0);
    CHECK(net.edges[route[1]].length == 100.0);
    CHECK(net.edges[route[2]].length == 100.0);
    int drops = 0;
    for (const auto& j : net.junctions) drops += j.rule == PriorityRule::lane_drop;
    CHECK(drops == 2);
  }
  CHECK_THROWS_AS(build_bottleneck(0), ConfigError);
}

TEST_CASE("lane_to_world offsets lanes to the left by the lane width") {
  const RoadNetwork net = build_bottleneck(1);
  for (int lane = 0; lane < 4; ++lane) {
    const Pose p0 = lane_to_world(net, 0, 0, 50.0);
    const Pose pl = lane_to_world(net, 0, lane, 50.0);
    CHECK(distance(p0.position, pl.position) == doctest::Approx(lane * kLaneWidth));
    CHECK(pl.heading == p0.heading);
  }
  // A straight edge has one heading everywhere.
  CHECK(lane_to_world(net, 0, 0, 10.0).heading == lane_to_world(net, 0, 0, 190.0).heading);
}

TEST_CASE("lane_to_world rejects positions outside the lane") {
  const RoadNetwork net = build_ring(260.0);
  CHECK_THROWS_AS(lane_to_world(net, 0, 0, -0.1), DomainError);
  CHECK_THROWS_AS(lane_to_world(net, 0, 0, 260.1), DomainError);
  CHECK_THROWS_AS(lane_to_world(net, 0, 1, 10.0), DomainError);
  CHECK_THROWS_AS(lane_to_world(net, 5, 0, 10.0), DomainError);
}

TEST_CASE("arc positions round-trip through world coordinates") {
  for (EnvKind kind : fixture::all_kinds()) {
    const auto net = fixture::default_network(kind);
    for (const auto& e : net->edges) {
      CAPTURE(e.id);
      for (int k = 0; k <= 20; ++k) {
        if (kind == EnvKind::ring && k == 20) continue;  // the end coincides with the start
        const double arc = k == 20 ? e.length : e.length * k / 20.0;
        const Pose p = lane_to_world(*net, net->edge_index(e.id), 0, arc);
        CHECK(std::abs(e.centerline.project(p.position) - arc) < 1e-6);
      }
    }
  }
}

TEST_CASE("builders are pure") {
  for (EnvKind kind : fixture::all_kinds()) {
    CHECK(network_to_text(*fixture::default_network(kind)) == network_to_text(*fixture::default_network(kind)));
  }
}

TEST_CASE("network descriptions match the golden files") {
  for (EnvKind kind : fixture::all_kinds()) {
    CAPTURE(to_string(kind));
    const std::string text = network_to_text(*fixture::default_network(kind));
    CHECK(fixture::matches_golden("network_" + to_string(kind) + ".json", text));
    CHECK(nlohmann::json::parse(text).is_object());
  }
}
