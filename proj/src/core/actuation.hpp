#pragma once

#include <functional>
#include <optional>

namespace rhombot {

inline constexpr double kKgCmToNm = 0.0980665;

/// Drive and connector constants, SI units.
struct ActuationParams {
  double servo_torque = 4.5 * kKgCmToNm;      ///< T [N·m]
  int output_teeth = 12;                      ///< Z1
  int input_teeth = 24;                       ///< Z2
  double winch_radius = 0.005;                ///< r [m]
  double holding_force = 25.0;                ///< Fe [N]
  double magnet_position = 0.070;             ///< b [m]
  double friction_torque = 0.84 * kKgCmToNm;  ///< eps [N·m]
  double encoder_resolution = 4095.0;         ///< counts per revolution
  double hysteresis_counts = 1500.0;

  /// Throws Error(Validation) on non-positive constants.
  void validate() const;
};

/// Torque between adjacent edges produced by the cable drive:
/// (T Z1) / (r Z2) * 2a sin(theta / 2).
double actuation_torque(const ActuationParams& p, double a, double theta);

/// Torque the mate's connector resists with: Fe (2a - b) + eps.
/// Throws Error(Geometry) when b >= 2a.
double resisting_torque(const ActuationParams& p, double a);

bool can_disconnect_single_sided(const ActuationParams& p, double a, double theta);

/// Folding angle at which actuation and resisting torques balance, by
/// bisection on (0, pi). nullopt when the drive never (or always) wins.
std::optional<double> disconnect_threshold(const ActuationParams& p, double a);

/// Total cable length as a function of (a, theta).
using CableProfile = std::function<double(double a, double theta)>;

/// Cable spanning the folding diagonal: L0 + 4a cos(theta / 2).
CableProfile diagonal_cable_profile(double routing_length = 0.0);

double cable_length(double a, double theta, const CableProfile& profile = diagonal_cable_profile());

enum class StrokeDirection { Forward, Reverse };

/// Servo-stroke model with direction-reversal hysteresis. Stateful: remembers
/// the direction of the last non-zero stroke.
class StrokeModel {
 public:
  StrokeModel(ActuationParams params, double a, CableProfile profile = diagonal_cable_profile());

  /// Encoder counts to move from theta_from to theta_to. Forward means
  /// increasing theta; the direction must agree with the angles.
  double servo_stroke(double theta_from, double theta_to, StrokeDirection direction);

  /// Counts for the cable travel alone, without hysteresis.
  double ideal_counts(double theta_from, double theta_to) const;

  std::optional<StrokeDirection> last_direction() const { return last_; }
  void reset() { last_.reset(); }

 private:
  ActuationParams params_;
  double a_;
  CableProfile profile_;
  std::optional<StrokeDirection> last_;
};

/// Angle (degrees) swept by `counts` at the given encoder resolution.
double counts_to_degrees(double counts, double resolution);

}  // namespace rhombot
