#pragma once

#include <numbers>
#include <span>
#include <vector>

namespace rhombot {

inline constexpr double kPi = std::numbers::pi;

/// Collinearity / degeneracy tolerance for footprint polygons, in meters.
inline constexpr double kGeomTol = 1e-9;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 v);

/// Planar rigid transform. Maps a point p in the local frame to R(yaw) p + (x, y).
/// Every constructor and operation keeps yaw in (-pi, pi].
struct Pose2 {
  double yaw = 0.0;
  double x = 0.0;
  double y = 0.0;

  Pose2() = default;
  Pose2(double yaw_, double x_, double y_);

  static Pose2 identity() { return {}; }
  static Pose2 rotation(double yaw) { return {yaw, 0.0, 0.0}; }

  Vec2 translation() const { return {x, y}; }
  Vec2 apply(Vec2 p) const;
  /// Rotates a direction without translating it.
  Vec2 rotate(Vec2 v) const;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// a ∘ b: b expressed in a's frame.
Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 invert(const Pose2& p);

/// Counterclockwise, strictly convex polygon. Construction validates both
/// properties and throws Error(Geometry) otherwise.
class ConvexPoly {
 public:
  explicit ConvexPoly(std::vector<Vec2> vertices);

  std::span<const Vec2> vertices() const { return vertices_; }
  double area() const;
  ConvexPoly translated(Vec2 d) const;
  ConvexPoly transformed(const Pose2& p) const;
  /// Extent of the polygon along the unit direction u: max(u·v) - min(u·v).
  double width_along(Vec2 u) const;
  /// Strict interior test with kGeomTol margin.
  bool contains_strict(Vec2 p) const;

 private:
  std::vector<Vec2> vertices_;
};

/// True iff the two interiors, each eroded by clearance/2, intersect.
/// Polygons touching along an edge or a vertex do not overlap.
bool poly_overlap(const ConvexPoly& a, const ConvexPoly& b, double clearance = 0.0);

}  // namespace rhombot
