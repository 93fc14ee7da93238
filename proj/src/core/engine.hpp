#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/loop_solver.hpp"
#include "core/topology.hpp"

namespace rhombot {

struct MorphTarget {
  ModuleId module = 0;
  double theta = 0.0;  ///< rad
  int order = 0;       ///< equal order indices morph together
};

/// One reconfiguration step: morph, connect, disconnect, morph.
/// When `align` is non-empty the pre-morph targets are solved so that the
/// new connection closes, using the listed modules (in that order).
struct MorphPivotOp {
  Connection new_con;
  Connection new_discon;
  std::vector<MorphTarget> pre_morph;
  std::vector<ModuleId> align;
  bool align_equal = false;
  std::vector<MorphTarget> post_morph;
  std::optional<double> morph_rate;  ///< rad/s, falls back to EngineOptions
};

struct EngineOptions {
  Tolerances tol;
  double clearance = 0.0;
  double dt = 0.05;
  double morph_rate = 0.2;
  bool sequential = true;
};

enum class FrameEvent { Morph, Connect, Disconnect, Reparent };

const char* frame_event_name(FrameEvent e);
FrameEvent frame_event_from_name(const std::string& name);

struct ModuleSnapshot {
  ModuleId id = 0;
  Pose2 pose;  ///< world pose of the E0 frame
  double sigma = 0.0;
  int label_offset = 0;
  double a = 0.0;

  double theta() const { return label_offset % 2 ? kPi - sigma : sigma; }
  friend bool operator==(const ModuleSnapshot&, const ModuleSnapshot&) = default;
};

struct SimFrame {
  double time = 0.0;
  ModuleId root = 0;
  std::vector<ModuleSnapshot> modules;
  std::vector<Connection> connections;
  FrameEvent event = FrameEvent::Morph;

  friend bool operator==(const SimFrame&, const SimFrame&) = default;
};

SimFrame snapshot(const KTree& tree, const std::map<ModuleId, Pose2>& poses, double time, FrameEvent event);

struct DockingReport {
  double position_offset = 0.0;
  double angular_offset = 0.0;
  bool pass = false;
};

class CollisionError : public Error {
 public:
  CollisionError(const std::string& what, double time, ModuleId a, ModuleId b)
      : Error(ErrorCode::Collision, what), time_(time), a_(a), b_(b) {}
  double time() const { return time_; }
  ModuleId first() const { return a_; }
  ModuleId second() const { return b_; }

 private:
  double time_;
  ModuleId a_, b_;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double residual) : Error(ErrorCode::Infeasible, what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Folding targets for `morphing` that close connection `con`.
/// Throws InfeasibleError when the loop cannot close within folding limits.
std::vector<MorphTarget> plan_alignment(const KTree& tree, const Connection& con,
                                        const std::vector<ModuleId>& morphing, bool equal_angles = false);

/// The loop closed by `con`, cut open at `con` (for diagnostics and tests).
LoopSpec alignment_loop(const KTree& tree, const Connection& con);

struct MorphResult {
  KTree tree;
  std::vector<SimFrame> frames;
};

/// Ramps folding angles linearly at `rate`, one order group after the other,
/// emitting a frame every dt (the last one exactly at the end). Every frame is
/// checked for overlap between unconnected modules and for open loops.
MorphResult execute_morph(const KTree& tree, const std::vector<MorphTarget>& targets, double rate,
                          const EngineOptions& options, double start_time = 0.0);

struct MorphPivotResult {
  KTree tree;
  std::vector<SimFrame> frames;
  DockingReport report;
  bool docked = false;
};

MorphPivotResult morphpivot(const KTree& tree, const MorphPivotOp& op, const EngineOptions& options,
                            double start_time = 0.0);

struct ScriptFailure {
  std::size_t index = 0;
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};

struct ScriptResult {
  KTree tree;
  std::vector<SimFrame> frames;
  std::vector<DockingReport> reports;
  std::size_t completed = 0;
  std::optional<ScriptFailure> failure;
};

/// Runs ops in order and stops at the first failure; `tree` is the state
/// after the completed prefix.
ScriptResult run_script(const KTree& tree, const std::vector<MorphPivotOp>& script, const EngineOptions& options);

}  // namespace rhombot
