#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "core/engine.hpp"
#include "core/topology.hpp"

namespace rhombot::testing {

inline ModuleState square_module(ModuleId id, double theta_deg = 90.0) {
  return ModuleState::from_theta(id, deg2rad(theta_deg));
}

inline Connection link(ModuleId a, int pa, ModuleId b, int pb) { return {a, pa, b, pb, ConnectionKind::Loop}; }

/// 2x2 lattice: M0 bottom-left, M1 bottom-right, M2 top-right, M3 top-left.
/// Unrotated lattice ports: 0 down, 1 right, 2 up, 3 left.
inline KTree square_tree() {
  return initialize_ktree({square_module(0), square_module(1), square_module(2), square_module(3)},
                          {link(0, 1, 1, 3), link(1, 2, 2, 0), link(2, 3, 3, 1), link(3, 0, 0, 2)}, 0, {});
}

/// Four modules stacked vertically, M0 at the bottom.
inline KTree chain_tree(int n = 4) {
  std::vector<ModuleState> mods;
  std::vector<Connection> cons;
  for (int i = 0; i < n; ++i) {
    mods.push_back(square_module(i));
    if (i > 0) cons.push_back(link(i - 1, 2, i, 0));
  }
  return initialize_ktree(mods, cons, 0, {});
}

/// Three modules around M1: M2 on M1's upper edge, M3 on its right edge.
inline KTree triangle_tree(double theta_deg = 90.0) {
  return initialize_ktree({square_module(1, theta_deg), square_module(2, theta_deg), square_module(3, theta_deg)},
                          {link(1, 2, 2, 1), link(1, 1, 3, 0)}, 1, {});
}

inline MorphPivotOp triangle_op(double pre_deg = 120.0, double post_deg = 90.0) {
  MorphPivotOp op;
  op.new_con = link(2, 2, 3, 3);
  op.new_discon = link(1, 1, 3, 0);
  for (int i = 0; i < 3; ++i) {
    op.pre_morph.push_back({i + 1, deg2rad(pre_deg), i});
    op.post_morph.push_back({i + 1, deg2rad(post_deg), i});
  }
  return op;
}

/// The op that undoes `op` applied to `before`: connect what it broke, break
/// what it made, replay the morphs backwards.
inline MorphPivotOp mirror_op(const MorphPivotOp& op, const KTree& before) {
  MorphPivotOp m;
  m.new_con = op.new_discon;
  m.new_discon = op.new_con;
  int order = 0;
  for (auto it = op.pre_morph.rbegin(); it != op.pre_morph.rend(); ++it) {
    m.pre_morph.push_back({it->module, it->theta, order++});
  }
  order = 0;
  for (auto it = op.pre_morph.rbegin(); it != op.pre_morph.rend(); ++it) {
    m.post_morph.push_back({it->module, before.module(it->module).theta(), order++});
  }
  m.morph_rate = op.morph_rate;
  return m;
}

/// Rhombus vertices built directly from side vectors (independent of the library).
inline std::array<Vec2, 4> oracle_vertices(double sigma, double a) {
  const Vec2 A{-a, 0.0};
  const Vec2 B{a, 0.0};
  const Vec2 side{2.0 * a * std::cos(sigma), 2.0 * a * std::sin(sigma)};
  return {A, B, B + side, A + side};
}

/// Frame a neighbor mated on edge (p, q) of a counterclockwise polygon
/// would take: origin at the midpoint, x from q to p, y outward.
inline Pose2 oracle_edge_frame(Vec2 p, Vec2 q) {
  const Vec2 mid = 0.5 * (p + q);
  const Vec2 x = p - q;
  return {std::atan2(x.y, x.x), mid.x, mid.y};
}

/// Canonical undirected adjacency (module pairs) of a tree's connections.
inline std::vector<std::pair<ModuleId, ModuleId>> adjacency_pairs(const KTree& t) {
  std::vector<std::pair<ModuleId, ModuleId>> out;
  for (const Connection& c : t.connections()) out.push_back(std::minmax(c.module_a, c.module_b));
  std::sort(out.begin(), out.end());
  return out;
}

/// Connector-level adjacency, direction-free.
inline std::vector<std::array<int, 4>> port_pairs(const KTree& t) {
  std::vector<std::array<int, 4>> out;
  for (const Connection& c : t.connections()) {
    std::array<int, 4> e{c.module_a, c.port_a, c.module_b, c.port_b};
    if (std::pair(e[2], e[3]) < std::pair(e[0], e[1])) e = {e[2], e[3], e[0], e[1]};
    out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rhombot::testing
