#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace rhombot {

double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

Pose2::Pose2(double yaw_, double x_, double y_) : yaw(normalize_angle(yaw_)), x(x_), y(y_) {}

Vec2 Pose2::rotate(Vec2 v) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 Pose2::apply(Vec2 p) const { return rotate(p) + translation(); }

Pose2 compose(const Pose2& a, const Pose2& b) {
  const Vec2 t = a.apply(b.translation());
  return {a.yaw + b.yaw, t.x, t.y};
}

Pose2 invert(const Pose2& p) {
  const Pose2 r = Pose2::rotation(-p.yaw);
  const Vec2 t = r.rotate(p.translation());
  return {-p.yaw, -t.x, -t.y};
}

namespace {

double signed_area(std::span<const Vec2> v) {
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    twice += cross(v[i], v[(i + 1) % v.size()]);
  }
  return 0.5 * twice;
}

void projection(std::span<const Vec2> v, Vec2 axis, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (const Vec2& p : v) {
    const double d = dot(p, axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

// Returns true if some edge normal of `edges_of` separates the two polygons
// (projected overlap no larger than clearance).
bool separated_by(std::span<const Vec2> edges_of, std::span<const Vec2> a, std::span<const Vec2> b,
                  double clearance) {
  for (std::size_t i = 0; i < edges_of.size(); ++i) {
    const Vec2 e = edges_of[(i + 1) % edges_of.size()] - edges_of[i];
    const double len = norm(e);
    const Vec2 n{e.y / len, -e.x / len};
    double alo, ahi, blo, bhi;
    projection(a, n, alo, ahi);
    projection(b, n, blo, bhi);
    const double overlap = std::min(ahi, bhi) - std::max(alo, blo);
    if (overlap <= clearance + kGeomTol) return true;
  }
  return false;
}

}  // namespace

ConvexPoly::ConvexPoly(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) throw Error(ErrorCode::Geometry, "invalid module geometry: polygon needs at least 3 vertices");
  double longest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = norm(vertices_[(i + 1) % n] - vertices_[i]);
    if (len <= kGeomTol) throw Error(ErrorCode::Geometry, "invalid module geometry: repeated vertex");
    longest = std::max(longest, len);
  }
  const double area = signed_area(vertices_);
  if (std::abs(area) <= kGeomTol * longest) {
    throw Error(ErrorCode::Geometry, "invalid module geometry: degenerate (zero-area) polygon");
  }
  if (area < 0.0) throw Error(ErrorCode::Geometry, "invalid module geometry: polygon is clockwise");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = vertices_[(i + 1) % n] - vertices_[i];
    const Vec2 f = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
    // Signed distance of the next vertex from the supporting line of e.
    if (cross(e, f) / norm(e) < -kGeomTol) {
      throw Error(ErrorCode::Geometry, "invalid module geometry: polygon is not convex");
    }
  }
}

double ConvexPoly::area() const { return signed_area(vertices_); }

ConvexPoly ConvexPoly::translated(Vec2 d) const {
  std::vector<Vec2> out;
  out.reserve(vertices_.size());
  for (const Vec2& v : vertices_) out.push_back(v + d);
  return ConvexPoly(std::move(out));
}

ConvexPoly ConvexPoly::transformed(const Pose2& p) const {
  std::vector<Vec2> out;
  out.reserve(vertices_.size());
  for (const Vec2& v : vertices_) out.push_back(p.apply(v));
  return ConvexPoly(std::move(out));
}

double ConvexPoly::width_along(Vec2 u) const {
  double lo, hi;
  projection(vertices_, u, lo, hi);
  return hi - lo;
}

bool ConvexPoly::contains_strict(Vec2 p) const {
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = vertices_[(i + 1) % n] - vertices_[i];
    if (cross(e, p - vertices_[i]) / norm(e) <= kGeomTol) return false;
  }
  return true;
}

bool poly_overlap(const ConvexPoly& a, const ConvexPoly& b, double clearance) {
  if (separated_by(a.vertices(), a.vertices(), b.vertices(), clearance)) return false;
  if (separated_by(b.vertices(), a.vertices(), b.vertices(), clearance)) return false;
  return true;
}

}  // namespace rhombot
