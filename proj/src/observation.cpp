#include "mixtraffic/observation.hpp"

#include <algorithm>
#include <cmath>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

namespace {

constexpr double kOutflowObsWindow = 20.0;

struct Box {
  double min_x = kInfinity, min_y = kInfinity, max_x = -kInfinity, max_y = -kInfinity;
  void add(Vec2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

// Pixel index range [lo, hi] covering world coordinates [a, b] along one axis.
void col_range(double a, double b, Vec2 center, double mpp, int& lo, int& hi) {
  const double half = kImageSide / 2.0;
  lo = std::max(0, static_cast<int>(std::floor((a - center.x) / mpp + half - 0.5)));
  hi = std::min(kImageSide - 1, static_cast<int>(std::ceil((b - center.x) / mpp + half - 0.5)));
}

void row_range(double a, double b, Vec2 center, double mpp, int& lo, int& hi) {
  const double half = kImageSide / 2.0;
  lo = std::max(0, static_cast<int>(std::floor(half - 0.5 - (b - center.y) / mpp)));
  hi = std::min(kImageSide - 1, static_cast<int>(std::ceil(half - 0.5 - (a - center.y) / mpp)));
}

void draw_road(BevImage& img, const RoadNetwork& net, std::uint8_t value) {
  const double mpp = img.meters_per_pixel;
  const double w = net.lane_width;
  for (const auto& edge : net.edges) {
    const double reach = edge.lane_count * w + w;
    Box box;
    for (Vec2 p : edge.centerline.sample(2.0)) box.add(p);
    int c0, c1, r0, r1;
    col_range(box.min_x - reach, box.max_x + reach, img.center, mpp, c0, c1);
    row_range(box.min_y - reach, box.max_y + reach, img.center, mpp, r0, r1);
    const double lateral_max = (edge.lane_count - 1) * w + w / 2;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Vec2 p = img.pixel_center(r, c);
        const double s = edge.centerline.project(p);
        const Pose pose = edge.centerline.at(s);
        const Vec2 q = p - pose.position;
        if (std::abs(q.dot(unit(pose.heading))) > 1e-6) continue;  // beyond an end
        const double lateral = q.dot(left_normal(pose.heading));
        if (lateral >= -w / 2 && lateral <= lateral_max) img.pixels[r * kImageSide + c] = value;
      }
    }
  }
}

void draw_vehicle(BevImage& img, const World& world, const VehicleState& v, std::uint8_t value) {
  const double mpp = img.meters_per_pixel;
  const Vec2 mid = vehicle_center(world, v);
  const double arc = v.arc_pos - v.length / 2;
  const double heading = world.network->lane_pose(v.edge_id, v.lane_index, std::max(arc, 0.0)).heading;
  const Vec2 t = unit(heading);
  const Vec2 n = left_normal(heading);
  const double hl = v.length / 2;
  const double hw = class_width(v.cls) / 2;
  const double reach = std::hypot(hl, hw);
  int c0, c1, r0, r1;
  col_range(mid.x - reach, mid.x + reach, img.center, mpp, c0, c1);
  row_range(mid.y - reach, mid.y + reach, img.center, mpp, r0, r1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const Vec2 q = img.pixel_center(r, c) - mid;
      if (std::abs(q.dot(t)) <= hl && std::abs(q.dot(n)) <= hw) img.pixels[r * kImageSide + c] = value;
    }
  }
}

const VehicleState* in_slot(const World& world, int slot) {
  for (const auto& v : world.vehicles) {
    if (v.slot == slot) return &v;
  }
  return nullptr;
}

}  // namespace

std::string to_string(ObsMode mode) {
  switch (mode) {
    case ObsMode::image: return "image";
    case ObsMode::precise: return "precise";
    case ObsMode::position_only: return "position-only";
  }
  return "?";
}

ObsMode obs_mode_from_string(std::string_view name) {
  if (name == "image") return ObsMode::image;
  if (name == "precise") return ObsMode::precise;
  if (name == "position-only" || name == "position_only") return ObsMode::position_only;
  throw ConfigError("unknown observation mode '" + std::string(name) + "'", "observation.mode");
}

void ObservationSpec::validate() const {
  if (stack_size < 1) throw ConfigError("stack size must be positive", "observation.stack_size");
  if (!(view_side > 0)) throw ConfigError("view side must be positive", "observation.view_side");
  if (mask_radius && !(*mask_radius > 0)) throw ConfigError("mask radius must be positive", "observation.mask_radius");
  if (intersection_vehicles < 0) {
    throw ConfigError("vehicle count must be non-negative", "observation.intersection_vehicles");
  }
}

ObservationSpec default_observation_spec(EnvKind kind, ObsMode mode) {
  ObservationSpec spec;
  spec.mode = mode;
  auto masked = [&](double radius, int stack) {
    spec.mask_radius = radius;
    spec.view_side = 2 * radius;
    spec.stack_size = stack;
  };
  switch (kind) {
    case EnvKind::ring: masked(28.75, 1); break;
    case EnvKind::figure_eight: masked(21.25, 1); break;
    case EnvKind::intersection:
      spec.view_side = 50.0;
      spec.stack_size = 1;
      spec.center_rule = CenterRule::junction;
      break;
    case EnvKind::merge:
      spec.view_side = 41.25;
      spec.stack_size = 5;
      break;
    case EnvKind::bottleneck: masked(25.0, 15); break;
  }
  return spec;
}

Vec2 BevImage::pixel_center(int row, int col) const {
  const double half = kImageSide / 2.0;
  return {center.x + (col + 0.5 - half) * meters_per_pixel, center.y + (half - row - 0.5) * meters_per_pixel};
}

Vec2 vehicle_center(const World& world, const VehicleState& v) {
  const auto& net = *world.network;
  const double arc = v.arc_pos - v.length / 2;
  if (arc < 0.0) {
    const auto& preds = net.predecessors({v.edge_id, v.lane_index});
    if (!preds.empty()) {
      const LaneRef p = preds.front();
      return net.lane_pose(p.edge, p.lane, net.edges[p.edge].length + arc).position;
    }
  }
  return net.lane_pose(v.edge_id, v.lane_index, arc).position;
}

BevImage render_bev(const World& world, Vec2 center, const ObservationSpec& spec) {
  BevImage img;
  img.center = center;
  img.meters_per_pixel = spec.meters_per_pixel();
  img.pixels.fill(spec.palette.background);
  draw_road(img, *world.network, spec.palette.road);
  for (const auto& v : world.vehicles) {
    if (!(v.role == Role::rv && v.slot >= 0)) draw_vehicle(img, world, v, spec.palette.hv);
  }
  for (const auto& v : world.vehicles) {
    if (v.role == Role::rv && v.slot >= 0) draw_vehicle(img, world, v, spec.palette.rv);
  }
  if (spec.mask_radius) {
    for (int r = 0; r < kImageSide; ++r) {
      for (int c = 0; c < kImageSide; ++c) {
        if (distance(img.pixel_center(r, c), center) > *spec.mask_radius) {
          img.pixels[r * kImageSide + c] = spec.palette.background;
        }
      }
    }
  }
  return img;
}

Observation stack_rv_observations(const World& world, const ObservationSpec& spec) {
  Observation obs;
  obs.stack = spec.stack_size;
  obs.image.assign(static_cast<std::size_t>(spec.stack_size) * kImagePixels, spec.palette.background);
  for (int s = 0; s < spec.stack_size; ++s) {
    std::optional<Vec2> center;
    if (spec.center_rule == CenterRule::junction) {
      if (s == 0 && !world.network->junctions.empty()) center = world.network->junctions.front().center;
    } else if (const VehicleState* v = in_slot(world, s)) {
      center = vehicle_center(world, *v);
    }
    if (!center) continue;
    const BevImage img = render_bev(world, *center, spec);
    std::copy(img.pixels.begin(), img.pixels.end(), obs.image.begin() + static_cast<std::ptrdiff_t>(s) * kImagePixels);
  }
  return obs;
}

Neighbor vehicle_leader(const World& world, const LaneOccupancy& occ, int vehicle, const DynamicsParams& params) {
  return find_leader(world, occ, vehicle, params, false);
}

double route_position(const World& world, const VehicleState& vehicle) {
  return world.network->edges[vehicle.edge_id].route_offset + vehicle.arc_pos;
}

std::vector<double> precise_ring(const World& world, const DynamicsParams& params) {
  std::vector<double> out(3, 0.0);
  const LaneOccupancy occ(world);
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& v = world.vehicles[i];
    if (v.slot != 0) continue;
    const Neighbor lead = vehicle_leader(world, occ, static_cast<int>(i), params);
    out[0] = v.velocity;
    if (lead.exists()) {
      out[1] = lead.speed - v.velocity;
      out[2] = lead.gap;
    }
    break;
  }
  return out;
}

std::vector<double> position_only_ring(const World& world, const DynamicsParams& params) {
  return {precise_ring(world, params)[2]};
}

std::vector<double> precise_figure_eight(const World& world, int expected_vehicles) {
  if (static_cast<int>(world.vehicles.size()) != expected_vehicles) {
    throw LayoutError("figure-eight observation expects " + std::to_string(expected_vehicles) + " vehicles, found " +
                      std::to_string(world.vehicles.size()));
  }
  std::vector<double> out;
  out.reserve(2 * world.vehicles.size());
  for (const auto& v : world.vehicles) {  // ascending id
    out.push_back(route_position(world, v));
    out.push_back(v.velocity);
  }
  return out;
}

std::vector<double> precise_intersection(const World& world, int per_approach) {
  const auto& net = *world.network;
  const auto& junction = net.junctions.front();
  std::vector<double> out;
  std::vector<int> observed_edges;
  for (const auto& mv : junction.movements) {
    std::vector<std::pair<double, const VehicleState*>> approaching;
    for (const auto& v : world.vehicles) {
      if (v.edge_id == mv.approach) approaching.push_back({net.edges[mv.approach].length - v.arc_pos, &v});
    }
    std::sort(approaching.begin(), approaching.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->id < b.second->id;
    });
    for (int k = 0; k < per_approach; ++k) {
      if (k < static_cast<int>(approaching.size())) {
        out.push_back(approaching[k].second->velocity);
        out.push_back(approaching[k].first);
        out.push_back(static_cast<double>(mv.approach));
      } else {
        out.insert(out.end(), {0.0, 0.0, 0.0});
      }
    }
  }
  for (std::size_t e = 0; e < net.edges.size(); ++e) {
    if (net.edges[e].internal) continue;
    int count = 0;
    double speed = 0.0;
    for (const auto& v : world.vehicles) {
      if (v.edge_id == static_cast<int>(e)) {
        ++count;
        speed += v.velocity;
      }
    }
    out.push_back(count / net.edges[e].length);
    out.push_back(count > 0 ? speed / count : 0.0);
  }
  return out;
}

std::vector<double> precise_merge(const World& world, const DynamicsParams& params, int max_rvs) {
  std::vector<double> out(static_cast<std::size_t>(5 * max_rvs), 0.0);
  const LaneOccupancy occ(world);
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& v = world.vehicles[i];
    if (v.slot < 0 || v.slot >= max_rvs) continue;
    const Neighbor lead = vehicle_leader(world, occ, static_cast<int>(i), params);
    const Neighbor follow = follower_from(world, occ, {v.edge_id, v.lane_index}, v.arc_pos - v.length, v.id,
                                          params.lookahead);
    double* slot = out.data() + 5 * v.slot;
    slot[0] = lead.exists() ? lead.speed : 0.0;
    slot[1] = follow.exists() ? follow.speed : 0.0;
    slot[2] = lead.exists() ? lead.gap : kMissingGap;
    slot[3] = follow.exists() ? follow.gap : kMissingGap;
    slot[4] = v.velocity;
  }
  return out;
}

std::vector<double> precise_bottleneck(const World& world) {
  const auto& net = *world.network;
  const auto& route = net.routes.front();
  std::vector<double> out;
  for (int edge : route.edges) {
    double sums[4] = {0, 0, 0, 0};
    int hv = 0, rv = 0;
    for (const auto& v : world.vehicles) {
      if (v.edge_id != edge) continue;
      if (v.role == Role::rv) {
        sums[2] += route_position(world, v);
        sums[3] += v.velocity;
        ++rv;
      } else {
        sums[0] += route_position(world, v);
        sums[1] += v.velocity;
        ++hv;
      }
    }
    out.push_back(hv ? sums[0] / hv : 0.0);
    out.push_back(hv ? sums[1] / hv : 0.0);
    out.push_back(rv ? sums[2] / rv : 0.0);
    out.push_back(rv ? sums[3] / rv : 0.0);
  }
  out.push_back(world.exits.count_window(world.time, kOutflowObsWindow) * 3600.0 / kOutflowObsWindow);
  return out;
}

Observation observe(const World& world, const ObservationSpec& spec, const DynamicsParams& params, int max_agents) {
  const EnvKind kind = world.network->kind;
  if (spec.mode == ObsMode::image) return stack_rv_observations(world, spec);
  Observation obs;
  if (spec.mode == ObsMode::position_only) {
    if (kind != EnvKind::ring) throw ConfigError("position-only observations exist for the ring only", "observation.mode");
    obs.vector = position_only_ring(world, params);
    return obs;
  }
  switch (kind) {
    case EnvKind::ring: obs.vector = precise_ring(world, params); break;
    case EnvKind::figure_eight: obs.vector = precise_figure_eight(world, spec.figure_eight_vehicles); break;
    case EnvKind::intersection: obs.vector = precise_intersection(world, spec.intersection_vehicles); break;
    case EnvKind::merge: obs.vector = precise_merge(world, params, max_agents); break;
    case EnvKind::bottleneck: obs.vector = precise_bottleneck(world); break;
  }
  return obs;
}

std::size_t vector_length(EnvKind kind, const ObservationSpec& spec, int max_agents) {
  if (spec.mode == ObsMode::position_only) return 1;
  switch (kind) {
    case EnvKind::ring: return 3;
    case EnvKind::figure_eight: return 2 * static_cast<std::size_t>(spec.figure_eight_vehicles);
    case EnvKind::intersection: return 4 * 3 * static_cast<std::size_t>(spec.intersection_vehicles) + 8 * 2;
    case EnvKind::merge: return 5 * static_cast<std::size_t>(max_agents);
    case EnvKind::bottleneck: return 13;
  }
  return 0;
}

}  // namespace mixtraffic
