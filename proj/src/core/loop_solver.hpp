#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "core/kinematics.hpp"

namespace rhombot {

/// One factor of a loop branch: module `module` under the labeling whose E0
/// sits on port `label_offset`, left through edge `edge`.
struct LoopStep {
  ModuleId module = 0;
  int label_offset = 0;
  EdgeIndex edge;
};

/// A route from the shared base frame to the shared module's body frame.
struct LoopBranch {
  std::vector<LoopStep> steps;
  ModuleId terminal = 0;
  int terminal_offset = 0;
};

/// A closed loop cut open at one connection: both branches must reach the
/// same module. Folding angles come from a ModuleTable, so a module that
/// appears under different labelings in the two branches stays one variable.
struct LoopSpec {
  LoopBranch branch1;
  LoopBranch branch2;
};

using ModuleTable = std::map<ModuleId, ModuleState>;

/// Modules whose folding angles move together. A singleton group is an
/// independent variable.
using FreeGroups = std::vector<std::vector<ModuleId>>;

struct LoopEvaluation {
  Pose2 residual;
  /// (yaw, x / 2a, y / 2a) with a taken from the terminal module.
  Eigen::Vector3d scaled = Eigen::Vector3d::Zero();
  /// d scaled / d theta_g, one column per free group.
  Eigen::Matrix<double, 3, Eigen::Dynamic> jacobian;
};

Pose2 loop_residual(const LoopSpec& loop, const ModuleTable& modules);

LoopEvaluation evaluate_loop(const LoopSpec& loop, const ModuleTable& modules, const FreeGroups& free);

struct LoopSolveOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  double residual_tolerance = 1e-8;
  double initial_damping = 1e-3;
};

struct LoopSolution {
  bool success = false;
  /// Folding angle theta per free module (every member of every group).
  std::map<ModuleId, double> thetas;
  double residual_norm = 0.0;
  Pose2 residual;
  int iterations = 0;
};

/// Damped least squares on the scaled residual, starting from the current
/// angles and clamped to each group's folding limits. success is false when
/// the residual at convergence stays above residual_tolerance.
LoopSolution solve_loop(const LoopSpec& loop, const ModuleTable& modules, const FreeGroups& free,
                        const LoopSolveOptions& options = {});

}  // namespace rhombot
