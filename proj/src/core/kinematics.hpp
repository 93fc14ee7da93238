#pragma once

#include <array>
#include <span>
#include <vector>

#include "core/geometry.hpp"

namespace rhombot {

using ModuleId = int;

struct ModuleParams {
  double a = 0.140;  ///< half side length [m]
  double theta_min = deg2rad(45.0);
  double theta_max = deg2rad(135.0);

  /// Throws Error(Validation) unless a > 0 and 0 < theta_min < theta_max < pi.
  void validate() const;
  friend bool operator==(const ModuleParams&, const ModuleParams&) = default;
};

/// Edge label E0..E3, counterclockwise, E0 being the reference (parent) edge.
class EdgeIndex {
 public:
  constexpr EdgeIndex() = default;
  /// Throws Error(Usage) outside {0,1,2,3}.
  explicit EdgeIndex(int value);

  constexpr int value() const { return value_; }
  friend bool operator==(EdgeIndex, EdgeIndex) = default;

 private:
  int value_ = 0;
};

/// A module's configuration. The physical connectors (ports 0..3) are fixed
/// hardware; `label_offset` says which port currently carries the E0 label,
/// so edge label k sits on port (k + label_offset) mod 4. sigma is the
/// interior angle between E0 and E3 under the current labeling; the folding
/// angle theta reported by the encoder is the angle at the port0/port3 corner.
struct ModuleState {
  ModuleId id = 0;
  double sigma = kPi / 2;
  int label_offset = 0;
  ModuleParams params;

  static ModuleState from_theta(ModuleId id, double theta, int label_offset = 0,
                                const ModuleParams& params = {});

  /// True when sigma = pi - theta.
  bool parity() const { return (label_offset & 1) != 0; }
  double theta() const;
  void set_theta(double theta);

  EdgeIndex label_of_port(int port) const;
  int port_of_label(EdgeIndex k) const;

  friend bool operator==(const ModuleState&, const ModuleState&) = default;
};

/// Pose of the frame a neighbor attached at edge k would have as its E0 frame,
/// expressed in the module frame. Its y axis is the outward normal of edge k.
/// k = 0 returns identity.
Pose2 edge_transform(const ModuleState& s, EdgeIndex k);

/// Frame of a neighbor mated on edge k. Same as edge_transform except at
/// k = 0, where the neighbor's frame is the half-turn about the E0 midpoint.
/// Only the root can have a neighbor there.
Pose2 mating_transform(const ModuleState& s, EdgeIndex k);

/// The module's own (inward-facing) frame at edge k.
Pose2 edge_frame_inward(const ModuleState& s, EdgeIndex k);

/// Rhombus vertices A, B, C, D in the module frame (E0 = AB, E1 = BC, E2 = CD, E3 = DA).
std::array<Vec2, 4> rhombus_vertices(const ModuleState& s);

ConvexPoly footprint(const ModuleState& s, const Pose2& frame);

/// Relabels edges counterclockwise starting at new_e0. sigma is kept for an
/// opposite edge and replaced by pi - sigma for an adjacent one.
ModuleState remap_sigma(const ModuleState& s, EdgeIndex new_e0);

/// Pose of the relabeled module's frame expressed in the old module frame.
Pose2 relabel_transform(const ModuleState& s, EdgeIndex new_e0);

struct ChainLink {
  ModuleState state;
  EdgeIndex edge;
};

/// Product of edge transforms along the chain. Empty chain gives identity.
Pose2 forward_kinematics(std::span<const ChainLink> chain);

/// E0 midpoint to module center: pure translation (a cos σ, a sin σ).
Pose2 center_transform(const ModuleState& s);

/// Labeling-independent body frame of the module, in its current E0 frame:
/// origin at the center, axes aligned with the port-0 frame.
Pose2 body_transform(const ModuleState& s);

/// Residual between two routes from one base frame to the same module.
/// Each route ends at the shared module, described with that route's own
/// labeling. Identity iff the loop closes.
Pose2 loop_residual(std::span<const ChainLink> branch1, const ModuleState& end1,
                    std::span<const ChainLink> branch2, const ModuleState& end2);

}  // namespace rhombot
