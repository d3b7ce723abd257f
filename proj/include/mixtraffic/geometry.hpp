#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace mixtraffic {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Left-hand normal of a heading (counter-clockwise rotation by 90 degrees).
inline Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

struct Pose {
  Vec2 position;
  double heading = 0.0;
};

// A straight segment (curvature 0) or a circular arc of signed curvature.
struct CurvePiece {
  Vec2 start;
  double heading = 0.0;
  double length = 0.0;
  double curvature = 0.0;

  Pose at(double s) const;
  Vec2 end() const { return at(length).position; }
  // Arc-length parameter of the closest point, clamped to [0, length].
  double closest(Vec2 p) const;
};

// Piecewise centerline with exact arc-length parametrization. Points outside
// [0, length] are extrapolated along the end tangents.
class Centerline {
 public:
  Centerline() = default;
  Centerline(Vec2 start, double heading) : cursor_{start, heading} {}

  Centerline& line(double length);
  Centerline& arc(double length, double curvature);
  // Kink: the next piece starts at the current point with a new heading.
  Centerline& turn_to(double heading) {
    cursor_.heading = heading;
    return *this;
  }

  double length() const { return length_; }
  const std::vector<CurvePiece>& pieces() const { return pieces_; }

  Pose at(double s) const;
  double project(Vec2 p) const;
  double distance_to(Vec2 p) const;
  // Polyline sampled at most max_step apart, endpoints included.
  std::vector<Vec2> sample(double max_step) const;
  Centerline translated(Vec2 delta) const;

 private:
  std::vector<CurvePiece> pieces_;
  Pose cursor_;
  double length_ = 0.0;
};

}  // namespace mixtraffic
