#include "core/actuation.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/geometry.hpp"

namespace rhombot {

void ActuationParams::validate() const {
  if (!(servo_torque > 0 && winch_radius > 0 && holding_force > 0 && magnet_position > 0 && friction_torque > 0 &&
        encoder_resolution > 0 && hysteresis_counts >= 0) ||
      output_teeth <= 0 || input_teeth <= 0) {
    throw Error(ErrorCode::Validation, "actuation constants must be positive");
  }
}

double actuation_torque(const ActuationParams& p, double a, double theta) {
  const double winch = p.servo_torque * p.output_teeth / (p.winch_radius * p.input_teeth);
  return winch * 2.0 * a * std::sin(theta / 2.0);
}

double resisting_torque(const ActuationParams& p, double a) {
  if (p.magnet_position >= 2.0 * a) {
    // b = 2a is the degenerate boundary: the magnet sits on the hinge.
    if (p.magnet_position == 2.0 * a) return p.friction_torque;
    throw Error(ErrorCode::Geometry, "electromagnet position b must be below the side length 2a");
  }
  return p.holding_force * (2.0 * a - p.magnet_position) + p.friction_torque;
}

bool can_disconnect_single_sided(const ActuationParams& p, double a, double theta) {
  return actuation_torque(p, a, theta) > resisting_torque(p, a);
}

std::optional<double> disconnect_threshold(const ActuationParams& p, double a) {
  const double resist = resisting_torque(p, a);
  auto f = [&](double th) { return actuation_torque(p, a, th) - resist; };
  double lo = 0.0;
  double hi = kPi;
  if (f(lo) >= 0.0 || f(hi) <= 0.0) return std::nullopt;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

CableProfile diagonal_cable_profile(double routing_length) {
  return [routing_length](double a, double theta) { return routing_length + 4.0 * a * std::cos(theta / 2.0); };
}

double cable_length(double a, double theta, const CableProfile& profile) { return profile(a, theta); }

StrokeModel::StrokeModel(ActuationParams params, double a, CableProfile profile)
    : params_(params), a_(a), profile_(std::move(profile)) {
  params_.validate();
}

double StrokeModel::ideal_counts(double theta_from, double theta_to) const {
  const double travel = std::abs(profile_(a_, theta_to) - profile_(a_, theta_from));
  const double servo_turns =
      travel / params_.winch_radius * (static_cast<double>(params_.output_teeth) / params_.input_teeth) / (2.0 * kPi);
  return servo_turns * params_.encoder_resolution;
}

double StrokeModel::servo_stroke(double theta_from, double theta_to, StrokeDirection direction) {
  if (theta_to == theta_from) return 0.0;
  const bool increasing = theta_to > theta_from;
  if (increasing != (direction == StrokeDirection::Forward)) {
    throw Error(ErrorCode::Usage, "stroke direction disagrees with the folding angles");
  }
  double counts = ideal_counts(theta_from, theta_to);
  if (last_ && *last_ != direction) counts += params_.hysteresis_counts;
  last_ = direction;
  return counts;
}

double counts_to_degrees(double counts, double resolution) { return counts / resolution * 360.0; }

}  // namespace rhombot
