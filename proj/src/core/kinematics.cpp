#include "core/kinematics.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace rhombot {

void ModuleParams::validate() const {
  if (!(a > 0.0)) throw Error(ErrorCode::Validation, "module half side length a must be positive");
  if (!(theta_min > 0.0 && theta_min < theta_max && theta_max < kPi)) {
    throw Error(ErrorCode::Validation, "folding limits must satisfy 0 < theta_min < theta_max < pi");
  }
}

EdgeIndex::EdgeIndex(int value) : value_(value) {
  if (value < 0 || value > 3) {
    throw Error(ErrorCode::Usage, "invalid edge index " + std::to_string(value) + " (expected 0..3)");
  }
}

ModuleState ModuleState::from_theta(ModuleId id, double theta, int label_offset,
                                    const ModuleParams& params) {
  ModuleState s;
  s.id = id;
  s.label_offset = ((label_offset % 4) + 4) % 4;
  s.params = params;
  s.set_theta(theta);
  return s;
}

double ModuleState::theta() const { return parity() ? kPi - sigma : sigma; }

void ModuleState::set_theta(double theta) { sigma = parity() ? kPi - theta : theta; }

EdgeIndex ModuleState::label_of_port(int port) const {
  return EdgeIndex((((port - label_offset) % 4) + 4) % 4);
}

int ModuleState::port_of_label(EdgeIndex k) const { return (k.value() + label_offset) % 4; }

Pose2 edge_transform(const ModuleState& s, EdgeIndex k) {
  const double a = s.params.a;
  const double c = std::cos(s.sigma);
  const double n = std::sin(s.sigma);
  switch (k.value()) {
    case 1:
      return {s.sigma + kPi, a + a * c, a * n};
    case 2:
      return {0.0, 2.0 * a * c, 2.0 * a * n};
    case 3:
      // Midpoint of DA with D = (-a + 2a cos σ, 2a sin σ), A = (-a, 0).
      return {s.sigma, -a + a * c, a * n};
    default:
      return Pose2::identity();
  }
}

Pose2 mating_transform(const ModuleState& s, EdgeIndex k) {
  return k.value() == 0 ? Pose2::rotation(kPi) : edge_transform(s, k);
}

Pose2 edge_frame_inward(const ModuleState& s, EdgeIndex k) {
  if (k.value() == 0) return Pose2::identity();
  return compose(edge_transform(s, k), Pose2::rotation(kPi));
}

std::array<Vec2, 4> rhombus_vertices(const ModuleState& s) {
  const double a = s.params.a;
  const double c = std::cos(s.sigma);
  const double n = std::sin(s.sigma);
  return {Vec2{-a, 0.0}, Vec2{a, 0.0}, Vec2{a + 2.0 * a * c, 2.0 * a * n},
          Vec2{-a + 2.0 * a * c, 2.0 * a * n}};
}

ConvexPoly footprint(const ModuleState& s, const Pose2& frame) {
  const auto local = rhombus_vertices(s);
  std::vector<Vec2> world;
  world.reserve(4);
  for (const Vec2& v : local) world.push_back(frame.apply(v));
  return ConvexPoly(std::move(world));
}

ModuleState remap_sigma(const ModuleState& s, EdgeIndex new_e0) {
  ModuleState out = s;
  out.label_offset = (s.label_offset + new_e0.value()) % 4;
  if (new_e0.value() % 2 == 1) out.sigma = kPi - s.sigma;
  return out;
}

Pose2 relabel_transform(const ModuleState& s, EdgeIndex new_e0) { return edge_frame_inward(s, new_e0); }

Pose2 forward_kinematics(std::span<const ChainLink> chain) {
  Pose2 pose;
  for (const ChainLink& link : chain) pose = compose(pose, edge_transform(link.state, link.edge));
  return pose;
}

Pose2 center_transform(const ModuleState& s) {
  const double a = s.params.a;
  return {0.0, a * std::cos(s.sigma), a * std::sin(s.sigma)};
}

Pose2 body_transform(const ModuleState& s) {
  const EdgeIndex k = s.label_of_port(0);
  const ModuleState canonical = remap_sigma(s, k);
  return compose(relabel_transform(s, k), center_transform(canonical));
}

Pose2 loop_residual(std::span<const ChainLink> branch1, const ModuleState& end1,
                    std::span<const ChainLink> branch2, const ModuleState& end2) {
  if (branch1.empty() && branch2.empty()) {
    throw Error(ErrorCode::Usage, "loop residual needs at least one non-empty branch");
  }
  const Pose2 via1 = compose(forward_kinematics(branch1), body_transform(end1));
  const Pose2 via2 = compose(forward_kinematics(branch2), body_transform(end2));
  return compose(invert(via2), via1);
}

}  // namespace rhombot
