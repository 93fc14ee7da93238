#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/kinematics.hpp"

namespace rhombot {

enum class ConnectionKind { Tree, Loop };

/// A mated pair of connectors. Ports are physical connector indices (0..3),
/// stable across relabeling; a module's current edge label for a port is
/// ModuleState::label_of_port.
struct Connection {
  ModuleId module_a = 0;
  int port_a = 0;
  ModuleId module_b = 0;
  int port_b = 0;
  ConnectionKind kind = ConnectionKind::Loop;

  /// Same connector pair, ignoring direction and kind.
  bool same_pair(const Connection& other) const;
  bool touches(ModuleId m) const { return module_a == m || module_b == m; }
  /// The module across the connection from m, with both ports.
  ModuleId other(ModuleId m) const { return module_a == m ? module_b : module_a; }
  int port_of(ModuleId m) const { return module_a == m ? port_a : port_b; }

  friend bool operator==(const Connection&, const Connection&) = default;
};

std::string describe(const Connection& c);

struct ParentLink {
  ModuleId parent = 0;
  int parent_port = 0;
  int child_port = 0;  ///< always the child's E0 port

  friend bool operator==(const ParentLink&, const ParentLink&) = default;
};

struct Tolerances {
  double position = 0.005;          ///< m
  double angle = deg2rad(3.0);      ///< rad
};

/// Rooted kinematic tree plus surplus (loop) connections. The root's E0
/// frame sits at `base` in the world. A non-empty `orphans` set marks the
/// transient state between disconnecting a tree edge and re-parenting; every
/// operation except assign_new_parent rejects such a tree.
struct KTree {
  std::map<ModuleId, ModuleState> modules;
  ModuleId root = 0;
  Pose2 base;
  std::map<ModuleId, ParentLink> parent;
  std::vector<Connection> loops;
  std::set<ModuleId> orphans;

  bool pending() const { return !orphans.empty(); }
  const ModuleState& module(ModuleId id) const;
  std::vector<Connection> connections() const;
  std::map<ModuleId, std::vector<ModuleId>> children() const;
  /// Connection using the given connector, if any.
  std::optional<Connection> at_port(ModuleId m, int port) const;

  friend bool operator==(const KTree&, const KTree&) = default;
};

enum class TreeMode {
  Bfs,       ///< breadth-first spanning tree from the root, ties by ascending id
  Declared,  ///< use the connections flagged ConnectionKind::Tree
};

/// Builds the tree from modules (theta and params are used, labeling is
/// recomputed) and connections. Every non-root module is relabeled so that
/// its port toward the parent is E0. Loop connections must close within tol.
KTree initialize_ktree(const std::vector<ModuleState>& modules, const std::vector<Connection>& connections,
                       ModuleId root, const Pose2& base, const Tolerances& tol = {},
                       TreeMode mode = TreeMode::Bfs);

/// World pose of each module's E0 frame. Throws Error(Pending) on a pending tree.
std::map<ModuleId, Pose2> world_poses(const KTree& tree);

/// Frame a partner mated at (m, port) would use as its E0 frame, in the world.
Pose2 mating_frame(const KTree& tree, const std::map<ModuleId, Pose2>& poses, ModuleId m, int port);

struct DockingOffsets {
  double position = 0.0;  ///< distance between the two edge midpoints [m]
  double angle = 0.0;     ///< |yaw difference - pi| [rad]
};

DockingOffsets measure_docking(const KTree& tree, const std::map<ModuleId, Pose2>& poses,
                               const Connection& c);

class MisalignmentError : public Error {
 public:
  MisalignmentError(const std::string& what, DockingOffsets offsets)
      : Error(ErrorCode::Misaligned, what), offsets_(offsets) {}
  DockingOffsets offsets() const { return offsets_; }

 private:
  DockingOffsets offsets_;
};

struct ConnResult {
  bool connected = false;
  std::vector<ModuleId> path;
};

/// Reachability over tree and loop connections, ignoring `excluding`.
/// Path is a BFS shortest path, neighbors visited in ascending id.
ConnResult is_conn(const KTree& tree, ModuleId from, ModuleId to, std::optional<ModuleId> excluding = {});

/// Adds c as a loop connection. Both connectors must be free and aligned.
KTree connect(const KTree& tree, Connection c, const Tolerances& tol = {});

/// Removes c. Removing a tree connection leaves the child side orphaned.
/// Throws Error(Connectivity) if the module set would split.
KTree disconnect(const KTree& tree, const Connection& c);

/// The side of c that loses its path to the root through the tree when c is
/// removed; nullopt for loop connections.
std::optional<ModuleId> determine_child(const KTree& tree, const Connection& c);

/// Re-anchors orphan m through its lowest-labeled edge whose neighbor is
/// reachable from the root without m, relabels m (and, if the anchor had to
/// be a descendant, the path up to it) and clears the pending state.
KTree assign_new_parent(const KTree& tree, ModuleId m);

/// True when the module adjacency graphs of the two trees (tree and loop
/// connections, ports ignored) are isomorphic.
bool adjacency_isomorphic(const KTree& a, const KTree& b);

/// Every violated structural invariant, empty when the tree is sound.
std::vector<std::string> check_invariants(const KTree& tree);

}  // namespace rhombot
