#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/topology.hpp"

namespace rhombot {

inline constexpr int kScenarioVersion = 1;

/// Angles are kept in degrees as written so documents round-trip exactly.
struct ScenarioModule {
  ModuleId id = 0;
  double theta_deg = 90.0;
  double a = 0.140;
  double theta_min_deg = 45.0;
  double theta_max_deg = 135.0;

  ModuleParams params() const;
  friend bool operator==(const ScenarioModule&, const ScenarioModule&) = default;
};

struct ScenarioConnection {
  ModuleId a = 0;
  int port_a = 0;
  ModuleId b = 0;
  int port_b = 0;
  bool tree = false;  ///< declared spanning-tree connection

  friend bool operator==(const ScenarioConnection&, const ScenarioConnection&) = default;
};

struct ScenarioDefaults {
  double pos_tol = 0.005;
  double ang_tol_deg = 3.0;
  double morph_rate = 0.2;
  double dt = 0.05;
  double clearance = 0.0;
  bool sequential = true;

  friend bool operator==(const ScenarioDefaults&, const ScenarioDefaults&) = default;
};

struct ScenarioBase {
  double x = 0.0;
  double y = 0.0;
  double yaw_deg = 0.0;

  friend bool operator==(const ScenarioBase&, const ScenarioBase&) = default;
};

struct ScenarioDoc {
  int version = kScenarioVersion;
  std::string name;
  ModuleId root = 0;
  ScenarioBase base;
  ScenarioDefaults defaults;
  std::vector<ScenarioModule> modules;
  std::vector<ScenarioConnection> connections;

  friend bool operator==(const ScenarioDoc&, const ScenarioDoc&) = default;
};

struct Diagnostic {
  std::string path;  ///< JSON pointer into the document, empty for global problems
  std::string message;
};

/// Parses a scenario (JSON, comments allowed). Syntax errors throw
/// Error(Parse) with line and column; schema errors (unknown or mistyped
/// fields) throw Error(Parse) with the field's JSON pointer.
ScenarioDoc parse_scenario(const std::string& text);
std::string serialize_scenario(const ScenarioDoc& doc);

/// Every semantic problem: duplicate or dangling ids, limits, ports,
/// connectivity and geometric consistency. Empty when build_tree succeeds.
std::vector<Diagnostic> validate_scenario(const ScenarioDoc& doc);

/// Throws Error(Validation) (or a subclass) on the first problem.
KTree build_tree(const ScenarioDoc& doc);
EngineOptions engine_options(const ScenarioDoc& doc);
EngineOptions engine_options(const ScenarioDefaults& defaults);

/// Document describing `tree`, with its tree connections declared so that
/// build_tree reproduces the same parent map.
ScenarioDoc scenario_from_tree(const KTree& tree, const ScenarioDefaults& defaults, const std::string& name = {});

/// Script of reconfiguration steps. Angles in degrees on disk.
struct ScriptDoc {
  int version = kScenarioVersion;
  std::string name;
  std::vector<MorphPivotOp> ops;
};

ScriptDoc parse_script(const std::string& text);
std::string serialize_script(const ScriptDoc& doc);

/// A single script op as a standalone JSON object.
MorphPivotOp parse_op(const std::string& text);
std::string serialize_op(const MorphPivotOp& op);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rhombot
