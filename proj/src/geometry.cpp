#include "mixtraffic/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mixtraffic {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Pose CurvePiece::at(double s) const {
  if (curvature == 0.0) {
    return {start + unit(heading) * s, heading};
  }
  const double radius = 1.0 / curvature;
  const Vec2 center = start + left_normal(heading) * radius;
  const double theta = heading + curvature * s;
  return {center + Vec2{std::sin(theta), -std::cos(theta)} * radius, theta};
}

double CurvePiece::closest(Vec2 p) const {
  if (curvature == 0.0) {
    const double s = (p - start).dot(unit(heading));
    return std::clamp(s, 0.0, length);
  }
  const double radius = 1.0 / curvature;
  const Vec2 center = start + left_normal(heading) * radius;
  const Vec2 rel = p - center;
  if (rel.norm() == 0.0) return 0.0;
  // Point angle is theta - pi/2 for counter-clockwise arcs, theta + pi/2 otherwise.
  const double point_angle = std::atan2(rel.y, rel.x);
  const double theta = curvature > 0 ? point_angle + std::numbers::pi / 2
                                     : point_angle - std::numbers::pi / 2;
  const double period = kTwoPi / std::abs(curvature);
  double s = std::fmod((theta - heading) / curvature, period);
  if (s < 0) s += period;
  if (s <= length) return s;
  const double to_end = distance(p, end());
  const double to_start = distance(p, start);
  return to_end < to_start ? length : 0.0;
}

Centerline& Centerline::line(double length) {
  if (!(length > 0)) throw std::invalid_argument("centerline piece length must be positive");
  CurvePiece piece{cursor_.position, cursor_.heading, length, 0.0};
  cursor_ = piece.at(length);
  pieces_.push_back(piece);
  length_ += length;
  return *this;
}

Centerline& Centerline::arc(double length, double curvature) {
  if (!(length > 0)) throw std::invalid_argument("centerline piece length must be positive");
  CurvePiece piece{cursor_.position, cursor_.heading, length, curvature};
  cursor_ = piece.at(length);
  pieces_.push_back(piece);
  length_ += length;
  return *this;
}

Pose Centerline::at(double s) const {
  if (pieces_.empty()) return cursor_;
  if (s <= 0.0) {
    const auto& first = pieces_.front();
    return {first.start + unit(first.heading) * s, first.heading};
  }
  double offset = 0.0;
  for (const auto& piece : pieces_) {
    if (s <= offset + piece.length) return piece.at(s - offset);
    offset += piece.length;
  }
  const Pose tail = pieces_.back().at(pieces_.back().length);
  return {tail.position + unit(tail.heading) * (s - length_), tail.heading};
}

double Centerline::project(Vec2 p) const {
  double best = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  double offset = 0.0;
  for (const auto& piece : pieces_) {
    const double s = piece.closest(p);
    const double d = distance(piece.at(s).position, p);
    if (d < best_dist) {
      best_dist = d;
      best = offset + s;
    }
    offset += piece.length;
  }
  return best;
}

double Centerline::distance_to(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_) {
    best = std::min(best, distance(piece.at(piece.closest(p)).position, p));
  }
  return best;
}

std::vector<Vec2> Centerline::sample(double max_step) const {
  std::vector<Vec2> points;
  if (pieces_.empty()) return points;
  points.push_back(pieces_.front().start);
  for (const auto& piece : pieces_) {
    const int n = std::max(1, static_cast<int>(std::ceil(piece.length / max_step)));
    for (int i = 1; i <= n; ++i) {
      points.push_back(piece.at(piece.length * i / n).position);
    }
  }
  return points;
}

Centerline Centerline::translated(Vec2 delta) const {
  Centerline out = *this;
  for (auto& piece : out.pieces_) piece.start = piece.start + delta;
  out.cursor_.position = out.cursor_.position + delta;
  return out;
}

}  // namespace mixtraffic
