#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/rewards.hpp"
#include "support.hpp"

using namespace mixtraffic;

namespace {

VehicleState vehicle(VehicleId id, int edge, int lane, double arc, double v, Role role = Role::hv, int slot = -1) {
  VehicleState s;
  s.id = id;
  s.edge_id = edge;
  s.lane_index = lane;
  s.arc_pos = arc;
  s.velocity = v;
  s.role = role;
  s.slot = slot;
  return s;
}

World world_on(RoadNetwork net) {
  World w;
  w.network = std::make_shared<const RoadNetwork>(std::move(net));
  return w;
}

int count_value(const BevImage& img, std::uint8_t value) {
  return static_cast<int>(std::count(img.pixels.begin(), img.pixels.end(), value));
}

const std::uint8_t* slice(const Observation& obs, int s) { return obs.image.data() + s * kImagePixels; }

bool uniform_background(const Observation& obs, int s) {
  return std::all_of(slice(obs, s), slice(obs, s) + kImagePixels, [](std::uint8_t p) { return p == 0; });
}

// Pixel of a slice containing a world point, given the slice center.
std::uint8_t pixel_at(const Observation& obs, int s, Vec2 center, double mpp, Vec2 p) {
  const int col = static_cast<int>(std::floor((p.x - center.x) / mpp + kImageSide / 2.0));
  const int row = static_cast<int>(std::floor(kImageSide / 2.0 - (p.y - center.y) / mpp));
  return slice(obs, s)[row * kImageSide + col];
}

}  // namespace

TEST_CASE("default observation specs per environment") {
  const auto ring = default_observation_spec(EnvKind::ring);
  CHECK(*ring.mask_radius == 28.75);
  CHECK(ring.view_side == 57.5);
  CHECK(ring.stack_size == 1);
  CHECK(*default_observation_spec(EnvKind::figure_eight).mask_radius == 21.25);
  const auto inter = default_observation_spec(EnvKind::intersection);
  CHECK_FALSE(inter.mask_radius.has_value());
  CHECK(inter.view_side == 50.0);
  CHECK(inter.center_rule == CenterRule::junction);
  const auto merge = default_observation_spec(EnvKind::merge);
  CHECK_FALSE(merge.mask_radius.has_value());
  CHECK(merge.view_side == 41.25);
  CHECK(merge.stack_size == 5);
  const auto bottleneck = default_observation_spec(EnvKind::bottleneck);
  CHECK(*bottleneck.mask_radius == 25.0);
  CHECK(bottleneck.stack_size == 15);
}

TEST_CASE("empty world renders only background and road") {
  for (EnvKind kind : fixture::all_kinds()) {
    World w;
    w.network = fixture::default_network(kind);
    const auto spec = default_observation_spec(kind);
    const BevImage img = render_bev(w, w.network->junctions.front().center, spec);
    CHECK(count_value(img, 0) + count_value(img, 85) == kImagePixels);
    CHECK(count_value(img, 85) > 0);
  }
}

TEST_CASE("masked render leaves everything beyond the radius as background") {
  World w = world_on(build_ring(260.0));
  for (int k = 0; k < 22; ++k) w.vehicles.push_back(vehicle(k, 0, 0, 5.0 + k * 11.0, 3.0));
  const auto spec = default_observation_spec(EnvKind::ring);
  const Vec2 center = vehicle_center(w, w.vehicles[3]);
  const BevImage img = render_bev(w, center, spec);
  int outside = 0;
  for (int r = 0; r < kImageSide; ++r) {
    for (int c = 0; c < kImageSide; ++c) {
      if (distance(img.pixel_center(r, c), center) > 28.75) {
        ++outside;
        CHECK(img.at(r, c) == 0);
      }
    }
  }
  CHECK(outside > 0);
  CHECK(img.meters_per_pixel == doctest::Approx(57.5 / 84));
}

TEST_CASE("RV footprint pixel count matches the rectangle oracle") {
  World w = world_on(build_ring(260.0));
  w.vehicles.push_back(vehicle(0, 0, 0, 40.0, 0.0, Role::rv, 0));
  const auto spec = default_observation_spec(EnvKind::ring);
  const Vec2 center = vehicle_center(w, w.vehicles[0]);
  const BevImage img = render_bev(w, center, spec);
  const double mpp = spec.meters_per_pixel();
  const int rv = count_value(img, 255);
  const double heading = w.network->lane_pose(0, 0, 40.0 - 2.5).heading;
  CHECK(rv == oracle::rect_pixel_count(center, mpp, center, heading, 5.0, 1.8));
  const double expected = 5.0 * 1.8 / (mpp * mpp);
  CHECK(rv >= 0.8 * expected);
  CHECK(rv <= 1.2 * expected);
}

TEST_CASE("rendering is pure and translation equivariant on pixel-aligned shifts") {
  for (EnvKind kind : fixture::all_kinds()) {
    CAPTURE(to_string(kind));
    const auto spec = default_observation_spec(kind);
    Rng rng(17);
    const World w = fixture::fuzz_world(kind, rng, 15);
    const Vec2 center = w.network->junctions.front().center + Vec2{3.0, -2.0};
    const BevImage a = render_bev(w, center, spec);
    CHECK(render_bev(w, center, spec).pixels == a.pixels);
    const double mpp = spec.meters_per_pixel();
    const Vec2 shift{32.0 * mpp, -16.0 * mpp};
    World moved = w;
    moved.network = std::make_shared<const RoadNetwork>(w.network->translated(shift));
    const BevImage b = render_bev(moved, center + shift, spec);
    int differing = 0;
    for (int p = 0; p < kImagePixels; ++p) differing += a.pixels[p] != b.pixels[p];
    CHECK(differing == 0);
  }
}

TEST_CASE("stack padding: 3 RVs in a stack of 5") {
  World w = world_on(build_merge());
  for (int k = 0; k < 3; ++k) w.vehicles.push_back(vehicle(k, 0, 0, 50.0 + 30.0 * k, 10.0, Role::rv, k));
  const Observation obs = stack_rv_observations(w, default_observation_spec(EnvKind::merge));
  REQUIRE(obs.stack == 5);
  for (int s = 0; s < 3; ++s) CHECK_FALSE(uniform_background(obs, s));
  CHECK(uniform_background(obs, 3));
  CHECK(uniform_background(obs, 4));
}

TEST_CASE("stack padding: no RVs in a stack of 15") {
  World w = world_on(build_bottleneck(1));
  for (int k = 0; k < 6; ++k) w.vehicles.push_back(vehicle(k, 0, k % 4, 20.0 + 25.0 * k, 10.0));
  const Observation obs = stack_rv_observations(w, default_observation_spec(EnvKind::bottleneck));
  REQUIRE(obs.stack == 15);
  REQUIRE(obs.image.size() == 15u * kImagePixels);
  for (int s = 0; s < 15; ++s) CHECK(uniform_background(obs, s));
}

TEST_CASE("stack overflow: RVs beyond the stack are drawn as HVs") {
  World w = world_on(build_merge());
  const auto spec = default_observation_spec(EnvKind::merge);
  for (int k = 0; k < 7; ++k) {
    w.vehicles.push_back(vehicle(k, 0, 0, 100.0 + 10.0 * k, 10.0, Role::rv, k < 5 ? k : -1));
  }
  const Observation obs = stack_rv_observations(w, spec);
  const double mpp = spec.meters_per_pixel();
  for (int s = 0; s < 5; ++s) {
    const Vec2 center = vehicle_center(w, w.vehicles[s]);
    for (int k = 0; k < 7; ++k) {
      const Vec2 mid = vehicle_center(w, w.vehicles[k]);
      if (std::abs(mid.x - center.x) > 18.0 || std::abs(mid.y - center.y) > 18.0) continue;
      CAPTURE(s);
      CAPTURE(k);
      CHECK(pixel_at(obs, s, center, mpp, mid) == (k < 5 ? 255 : 170));
    }
  }
}

TEST_CASE("raster invariants on fuzzed worlds") {
  for (EnvKind kind : fixture::all_kinds()) {
    CHECK(fixture::raster_invariant_violation(kind, 20, 1234) == "");
  }
}

TEST_CASE("precise ring vector") {
  World w = world_on(build_ring(260.0));
  w.vehicles = {vehicle(0, 0, 0, 100.0, 5.0, Role::rv, 0), vehicle(1, 0, 0, 115.0, 5.0)};
  const DynamicsParams params;
  CHECK(precise_ring(w, params) == std::vector<double>{5.0, 0.0, 10.0});
  CHECK(position_only_ring(w, params) == std::vector<double>{10.0});
  // Leader across the wrap point.
  w.vehicles = {vehicle(0, 0, 0, 255.0, 4.0, Role::rv, 0), vehicle(1, 0, 0, 8.0, 6.0)};
  const auto v = precise_ring(w, params);
  CHECK(v[1] == 2.0);
  CHECK(v[2] == doctest::Approx(8.0));
  CHECK(v[2] > 0.0);
  CHECK(v[2] < 260.0);
  CHECK(position_only_ring(w, params)[0] == v[2]);
}

TEST_CASE("precise figure-eight vector") {
  World w = world_on(build_figure_eight(25.0));
  PopulationSpec spec;
  spec.total = 14;
  Rng rng(3);
  w.vehicles = init_closed_population(*w.network, spec, rng);
  const auto v = precise_figure_eight(w);
  REQUIRE(v.size() == 28);
  for (std::size_t k = 1; k < v.size(); k += 2) CHECK(v[k] == 0.0);
  // Position entries follow id order, not storage order.
  World shuffled = w;
  std::reverse(shuffled.vehicles.begin(), shuffled.vehicles.end());
  std::sort(shuffled.vehicles.begin(), shuffled.vehicles.end(), [](auto& a, auto& b) { return a.id < b.id; });
  CHECK(precise_figure_eight(shuffled) == v);
  w.vehicles.pop_back();
  CHECK_THROWS_AS(precise_figure_eight(w), LayoutError);
}

TEST_CASE("precise intersection vector") {
  IntersectionGeometry g;
  g.approach_length = 120.0;
  World w = world_on(build_intersection(g));
  const auto empty = precise_intersection(w);
  CHECK(empty.size() == vector_length(EnvKind::intersection, default_observation_spec(EnvKind::intersection), 8));
  CHECK(std::all_of(empty.begin(), empty.end(), [](double x) { return x == 0.0; }));
  const int north = w.network->edge_index("north_in");
  w.vehicles = {vehicle(0, north, 0, 100.0, 5.0)};
  const auto one = precise_intersection(w);
  CHECK(one[0] == 5.0);
  CHECK(one[1] == 20.0);
  CHECK(one[2] == north);
  w.vehicles.clear();
  for (int k = 0; k < 4; ++k) w.vehicles.push_back(vehicle(k, north, 0, 10.0 + 20.0 * k, 2.0));
  const auto four = precise_intersection(w);
  // Edge features start after 4 approaches x 6 vehicles x 3 values; north_in is the first edge.
  CHECK(four[72] == doctest::Approx(4.0 / 120.0));
  CHECK(four[73] == 2.0);
}

TEST_CASE("precise merge vector") {
  World w = world_on(build_merge());
  const DynamicsParams params;
  w.vehicles = {vehicle(0, 0, 0, 100.0, 7.0, Role::rv, 0)};
  const auto alone = precise_merge(w, params);
  REQUIRE(alone.size() == 25);
  CHECK(std::vector<double>(alone.begin(), alone.begin() + 5) == std::vector<double>{0, 0, 1000, 1000, 7});
  CHECK(std::all_of(alone.begin() + 5, alone.end(), [](double x) { return x == 0.0; }));
  w.vehicles = {vehicle(0, 0, 0, 60.0, 6.0), vehicle(1, 0, 0, 100.0, 7.0, Role::rv, 0), vehicle(2, 0, 0, 130.0, 8.0)};
  const auto v = precise_merge(w, params);
  const LaneOccupancy occ(w);
  const Neighbor lead = find_leader(w, occ, 1, params, false);
  CHECK(v[0] == 8.0);
  CHECK(v[1] == 6.0);
  CHECK(v[2] == lead.gap);
  CHECK(v[2] == doctest::Approx(25.0));
  CHECK(v[3] == doctest::Approx(35.0));
  CHECK(v[4] == 7.0);
}

TEST_CASE("precise bottleneck vector") {
  World w = world_on(build_bottleneck(1));
  const auto empty = precise_bottleneck(w);
  REQUIRE(empty.size() == 13);
  CHECK(std::all_of(empty.begin(), empty.end(), [](double x) { return x == 0.0; }));
  w.vehicles = {vehicle(0, 0, 0, 50.0, 4.0), vehicle(1, 0, 2, 70.0, 6.0), vehicle(2, 1, 0, 20.0, 9.0, Role::rv)};
  for (double t : {1.0, 12.0, 15.0, 19.5}) w.exits.record(t, 99);
  w.time = 20.0;
  const auto v = precise_bottleneck(w);
  CHECK(v[0] == 60.0);
  CHECK(v[1] == 5.0);
  CHECK(v[2] == 0.0);
  CHECK(v[6] == 220.0);
  CHECK(v[7] == 9.0);
  CHECK(v[12] == reward_bottleneck(w.exits, 20.0, 20.0));
  CHECK(v[12] == 4 * 3600.0 / 20.0);
}

TEST_CASE("vector lengths are fixed per environment") {
  CHECK(vector_length(EnvKind::ring, default_observation_spec(EnvKind::ring, ObsMode::precise), 1) == 3);
  CHECK(vector_length(EnvKind::figure_eight, default_observation_spec(EnvKind::figure_eight, ObsMode::precise), 1) ==
        28);
  CHECK(vector_length(EnvKind::intersection, default_observation_spec(EnvKind::intersection, ObsMode::precise), 8) ==
        88);
  CHECK(vector_length(EnvKind::merge, default_observation_spec(EnvKind::merge, ObsMode::precise), 5) == 25);
  CHECK(vector_length(EnvKind::bottleneck, default_observation_spec(EnvKind::bottleneck, ObsMode::precise), 15) == 13);
  CHECK(vector_length(EnvKind::ring, default_observation_spec(EnvKind::ring, ObsMode::position_only), 1) == 1);
  const DynamicsParams params;
  for (EnvKind kind : {EnvKind::ring, EnvKind::intersection, EnvKind::merge, EnvKind::bottleneck}) {
    const auto config = default_config(kind);
    const auto spec = default_observation_spec(kind, ObsMode::precise);
    Rng rng(8);
    for (int k = 0; k < 25; ++k) {
      const World w = fixture::fuzz_world(kind, rng, config.max_agents);
      CHECK(observe(w, spec, params, config.max_agents).vector.size() == vector_length(kind, spec, config.max_agents));
    }
  }
}

TEST_CASE("golden observation images") {
  for (EnvKind kind : fixture::all_kinds()) {
    CAPTURE(to_string(kind));
    const Observation obs = fixture::golden_observation(kind);
    REQUIRE(obs.is_image());
    const std::span<const std::uint8_t> first(obs.image.data(), kImagePixels);
    CHECK(fixture::matches_golden("obs_" + to_string(kind) + ".pgm", encode_pgm(first, kImageSide, kImageSide)));
    CHECK(fixture::matches_golden("obs_" + to_string(kind) + ".mxtr",
                                  encode_tensor(obs.image, obs.stack, kImageSide, kImageSide)));
  }
}
