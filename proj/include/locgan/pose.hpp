#pragma once

#include <cmath>

namespace locgan {

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

/// SE(2) element: planar position in meters plus heading in radians.
/// Heading is kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  static Pose2D identity() { return {}; }
};

inline Pose2D make_pose(double x, double y, double heading) {
  return Pose2D{x, y, wrap_angle(heading)};
}

/// a * b: apply b in the frame of a.
inline Pose2D se2_compose(const Pose2D& a, const Pose2D& b) {
  const double c = std::cos(a.heading);
  const double s = std::sin(a.heading);
  return Pose2D{a.x + c * b.x - s * b.y,
                a.y + s * b.x + c * b.y,
                wrap_angle(a.heading + b.heading)};
}

inline Pose2D se2_inverse(const Pose2D& p) {
  const double c = std::cos(p.heading);
  const double s = std::sin(p.heading);
  return Pose2D{-(c * p.x + s * p.y), -(-s * p.x + c * p.y),
                wrap_angle(-p.heading)};
}

/// Relative pose from a to b: se2_compose(a, se2_relative(a, b)) == b.
inline Pose2D se2_relative(const Pose2D& a, const Pose2D& b) {
  return se2_compose(se2_inverse(a), b);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Map a point given in the frame of `p` to the world frame.
inline Vec2 se2_transform_point(const Pose2D& p, Vec2 local) {
  const double c = std::cos(p.heading);
  const double s = std::sin(p.heading);
  return Vec2{p.x + c * local.x - s * local.y,
              p.y + s * local.x + c * local.y};
}

/// Map a world point into the frame of `p`.
inline Vec2 se2_untransform_point(const Pose2D& p, Vec2 world) {
  const double c = std::cos(p.heading);
  const double s = std::sin(p.heading);
  const double dx = world.x - p.x;
  const double dy = world.y - p.y;
  return Vec2{c * dx + s * dy, -s * dx + c * dy};
}

}  // namespace locgan
