#include "core/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <sstream>

namespace rhombot {

namespace {

std::string mname(ModuleId id) { return "M" + std::to_string(id); }

void require_not_pending(const KTree& tree, const char* op) {
  if (tree.pending()) {
    std::ostringstream os;
    os << op << ": tree has orphaned modules pending re-parenting (";
    for (ModuleId m : tree.orphans) os << ' ' << mname(m);
    os << " )";
    throw Error(ErrorCode::Pending, os.str());
  }
}

void require_module(const KTree& tree, ModuleId id) {
  if (!tree.modules.contains(id)) throw Error(ErrorCode::Usage, "unknown module " + mname(id));
}

void require_port(int port) {
  if (port < 0 || port > 3) throw Error(ErrorCode::Usage, "invalid port " + std::to_string(port));
}

// Undirected adjacency over every connection, neighbors sorted by id then port.
std::map<ModuleId, std::vector<ModuleId>> adjacency(const KTree& tree) {
  std::map<ModuleId, std::vector<ModuleId>> adj;
  for (const auto& [id, s] : tree.modules) adj[id];
  for (const Connection& c : tree.connections()) {
    adj[c.module_a].push_back(c.module_b);
    adj[c.module_b].push_back(c.module_a);
  }
  for (auto& [id, n] : adj) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return adj;
}

std::set<ModuleId> reachable(const std::map<ModuleId, std::vector<ModuleId>>& adj, ModuleId start) {
  std::set<ModuleId> seen{start};
  std::deque<ModuleId> queue{start};
  while (!queue.empty()) {
    const ModuleId m = queue.front();
    queue.pop_front();
    for (ModuleId n : adj.at(m)) {
      if (seen.insert(n).second) queue.push_back(n);
    }
  }
  return seen;
}

// m and all of its descendants through the parent map.
std::set<ModuleId> subtree(const KTree& tree, ModuleId m) {
  const auto kids = tree.children();
  std::set<ModuleId> out{m};
  std::deque<ModuleId> queue{m};
  while (!queue.empty()) {
    const ModuleId x = queue.front();
    queue.pop_front();
    auto it = kids.find(x);
    if (it == kids.end()) continue;
    for (ModuleId c : it->second) {
      if (out.insert(c).second) queue.push_back(c);
    }
  }
  return out;
}

void relabel_to_port(KTree& tree, ModuleId id, int port) {
  ModuleState& s = tree.modules.at(id);
  s = remap_sigma(s, s.label_of_port(port));
}

std::optional<std::size_t> find_loop(const KTree& tree, const Connection& c) {
  for (std::size_t i = 0; i < tree.loops.size(); ++i) {
    if (tree.loops[i].same_pair(c)) return i;
  }
  return std::nullopt;
}

std::optional<ModuleId> find_tree_child(const KTree& tree, const Connection& c) {
  for (const auto& [child, link] : tree.parent) {
    const Connection e{link.parent, link.parent_port, child, link.child_port, ConnectionKind::Tree};
    if (e.same_pair(c)) return child;
  }
  return std::nullopt;
}

}  // namespace

bool Connection::same_pair(const Connection& o) const {
  return (module_a == o.module_a && port_a == o.port_a && module_b == o.module_b && port_b == o.port_b) ||
         (module_a == o.module_b && port_a == o.port_b && module_b == o.module_a && port_b == o.port_a);
}

std::string describe(const Connection& c) {
  std::ostringstream os;
  os << mname(c.module_a) << ".p" << c.port_a << "-" << mname(c.module_b) << ".p" << c.port_b;
  return os.str();
}

const ModuleState& KTree::module(ModuleId id) const {
  auto it = modules.find(id);
  if (it == modules.end()) throw Error(ErrorCode::Usage, "unknown module " + mname(id));
  return it->second;
}

std::vector<Connection> KTree::connections() const {
  std::vector<Connection> out;
  out.reserve(parent.size() + loops.size());
  for (const auto& [child, link] : parent) {
    out.push_back({link.parent, link.parent_port, child, link.child_port, ConnectionKind::Tree});
  }
  out.insert(out.end(), loops.begin(), loops.end());
  return out;
}

std::map<ModuleId, std::vector<ModuleId>> KTree::children() const {
  std::map<ModuleId, std::vector<ModuleId>> out;
  for (const auto& [child, link] : parent) out[link.parent].push_back(child);
  return out;
}

std::optional<Connection> KTree::at_port(ModuleId m, int port) const {
  for (const Connection& c : connections()) {
    if ((c.module_a == m && c.port_a == port) || (c.module_b == m && c.port_b == port)) return c;
  }
  return std::nullopt;
}

KTree initialize_ktree(const std::vector<ModuleState>& modules, const std::vector<Connection>& connections,
                       ModuleId root, const Pose2& base, const Tolerances& tol, TreeMode mode) {
  KTree tree;
  tree.root = root;
  tree.base = base;
  for (const ModuleState& s : modules) {
    s.params.validate();
    const double theta = s.theta();
    if (theta < s.params.theta_min - 1e-12 || theta > s.params.theta_max + 1e-12) {
      std::ostringstream os;
      os << mname(s.id) << ": folding angle " << rad2deg(theta) << " deg outside ["
         << rad2deg(s.params.theta_min) << ", " << rad2deg(s.params.theta_max) << "]";
      throw Error(ErrorCode::Validation, os.str());
    }
    if (!tree.modules.emplace(s.id, ModuleState::from_theta(s.id, theta, 0, s.params)).second) {
      throw Error(ErrorCode::Validation, "duplicate module id " + mname(s.id));
    }
  }
  if (!tree.modules.contains(root)) throw Error(ErrorCode::Validation, "root " + mname(root) + " is not a module");

  std::set<std::pair<ModuleId, int>> used;
  for (const Connection& c : connections) {
    require_port(c.port_a);
    require_port(c.port_b);
    if (!tree.modules.contains(c.module_a) || !tree.modules.contains(c.module_b)) {
      throw Error(ErrorCode::Validation, "connection " + describe(c) + " references an unknown module");
    }
    if (c.module_a == c.module_b) throw Error(ErrorCode::Validation, "connection " + describe(c) + " is a self-loop");
    if (!used.insert({c.module_a, c.port_a}).second || !used.insert({c.module_b, c.port_b}).second) {
      throw Error(ErrorCode::Validation, "duplicate edge use in connection " + describe(c));
    }
  }

  // Spanning tree: candidate tree connections per module, sorted so BFS
  // visits neighbors in ascending id.
  std::vector<std::size_t> order(connections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::map<ModuleId, std::vector<std::size_t>> incident;
  for (std::size_t i = 0; i < connections.size(); ++i) {
    const Connection& c = connections[i];
    if (mode == TreeMode::Declared && c.kind != ConnectionKind::Tree) continue;
    incident[c.module_a].push_back(i);
    incident[c.module_b].push_back(i);
  }
  for (auto& [m, list] : incident) {
    std::sort(list.begin(), list.end(), [&](std::size_t x, std::size_t y) {
      const Connection& cx = connections[x];
      const Connection& cy = connections[y];
      return std::pair(cx.other(m), cx.port_of(m)) < std::pair(cy.other(m), cy.port_of(m));
    });
  }

  std::vector<bool> in_tree(connections.size(), false);
  std::set<ModuleId> seen{root};
  std::deque<ModuleId> queue{root};
  while (!queue.empty()) {
    const ModuleId m = queue.front();
    queue.pop_front();
    for (std::size_t i : incident[m]) {
      const Connection& c = connections[i];
      const ModuleId n = c.other(m);
      if (seen.contains(n)) continue;
      seen.insert(n);
      in_tree[i] = true;
      tree.parent[n] = {m, c.port_of(m), c.port_of(n)};
      relabel_to_port(tree, n, c.port_of(n));
      queue.push_back(n);
    }
  }
  if (seen.size() != tree.modules.size()) {
    std::ostringstream os;
    os << (mode == TreeMode::Declared ? "declared tree connections do not span the system; "
                                      : "disconnected: ")
       << "unreachable from root " << mname(root) << ":";
    for (const auto& [id, s] : tree.modules) {
      if (!seen.contains(id)) os << ' ' << mname(id);
    }
    throw Error(mode == TreeMode::Declared ? ErrorCode::Validation : ErrorCode::Connectivity, os.str());
  }
  for (std::size_t i = 0; i < connections.size(); ++i) {
    if (in_tree[i]) continue;
    if (mode == TreeMode::Declared && connections[i].kind == ConnectionKind::Tree) {
      throw Error(ErrorCode::Validation, "declared tree connection " + describe(connections[i]) + " closes a cycle");
    }
    Connection loop = connections[i];
    loop.kind = ConnectionKind::Loop;
    tree.loops.push_back(loop);
  }

  const auto poses = world_poses(tree);
  for (const Connection& c : tree.loops) {
    const DockingOffsets off = measure_docking(tree, poses, c);
    if (off.position > tol.position || off.angle > tol.angle) {
      std::ostringstream os;
      os << "geometrically inconsistent connection " << describe(c) << ": offset " << off.position * 1e3
         << " mm, " << rad2deg(off.angle) << " deg";
      throw MisalignmentError(os.str(), off);
    }
  }
  return tree;
}

std::map<ModuleId, Pose2> world_poses(const KTree& tree) {
  require_not_pending(tree, "world poses");
  std::map<ModuleId, Pose2> poses;
  poses[tree.root] = tree.base;
  const auto kids = tree.children();
  std::deque<ModuleId> queue{tree.root};
  while (!queue.empty()) {
    const ModuleId m = queue.front();
    queue.pop_front();
    auto it = kids.find(m);
    if (it == kids.end()) continue;
    const ModuleState& s = tree.modules.at(m);
    for (ModuleId c : it->second) {
      const ParentLink& link = tree.parent.at(c);
      poses[c] = compose(poses[m], mating_transform(s, s.label_of_port(link.parent_port)));
      queue.push_back(c);
    }
  }
  if (poses.size() != tree.modules.size()) {
    throw Error(ErrorCode::Internal, "parent map does not reach every module");
  }
  return poses;
}

Pose2 mating_frame(const KTree& tree, const std::map<ModuleId, Pose2>& poses, ModuleId m, int port) {
  const ModuleState& s = tree.module(m);
  return compose(poses.at(m), mating_transform(s, s.label_of_port(port)));
}

DockingOffsets measure_docking(const KTree& tree, const std::map<ModuleId, Pose2>& poses, const Connection& c) {
  const Pose2 fa = mating_frame(tree, poses, c.module_a, c.port_a);
  const Pose2 fb = mating_frame(tree, poses, c.module_b, c.port_b);
  return {norm(fa.translation() - fb.translation()), std::abs(normalize_angle(fa.yaw - fb.yaw - kPi))};
}

ConnResult is_conn(const KTree& tree, ModuleId from, ModuleId to, std::optional<ModuleId> excluding) {
  require_module(tree, from);
  require_module(tree, to);
  if (excluding && (*excluding == from || *excluding == to)) return {};
  if (from == to) return {true, {from}};
  const auto adj = adjacency(tree);
  std::map<ModuleId, ModuleId> came_from;
  std::set<ModuleId> seen{from};
  std::deque<ModuleId> queue{from};
  while (!queue.empty()) {
    const ModuleId m = queue.front();
    queue.pop_front();
    for (ModuleId n : adj.at(m)) {
      if ((excluding && n == *excluding) || seen.contains(n)) continue;
      seen.insert(n);
      came_from[n] = m;
      if (n == to) {
        std::vector<ModuleId> path{to};
        for (ModuleId x = to; x != from;) {
          x = came_from.at(x);
          path.push_back(x);
        }
        std::reverse(path.begin(), path.end());
        return {true, path};
      }
      queue.push_back(n);
    }
  }
  return {};
}

KTree connect(const KTree& tree, Connection c, const Tolerances& tol) {
  require_not_pending(tree, "connect");
  require_module(tree, c.module_a);
  require_module(tree, c.module_b);
  require_port(c.port_a);
  require_port(c.port_b);
  if (c.module_a == c.module_b) throw Error(ErrorCode::Usage, "cannot connect a module to itself");
  for (auto [m, p] : {std::pair{c.module_a, c.port_a}, std::pair{c.module_b, c.port_b}}) {
    if (auto existing = tree.at_port(m, p)) {
      throw Error(ErrorCode::Occupied, mname(m) + " port " + std::to_string(p) + " is already used by " +
                                           describe(*existing));
    }
  }
  const auto poses = world_poses(tree);
  const DockingOffsets off = measure_docking(tree, poses, c);
  if (off.position > tol.position || off.angle > tol.angle) {
    std::ostringstream os;
    os << "misaligned connectors " << describe(c) << ": offset " << off.position * 1e3 << " mm, "
       << rad2deg(off.angle) << " deg";
    throw MisalignmentError(os.str(), off);
  }
  KTree out = tree;
  c.kind = ConnectionKind::Loop;
  out.loops.push_back(c);
  return out;
}

std::optional<ModuleId> determine_child(const KTree& tree, const Connection& c) {
  return find_tree_child(tree, c);
}

KTree disconnect(const KTree& tree, const Connection& c) {
  require_not_pending(tree, "disconnect");
  const auto loop_index = find_loop(tree, c);
  const auto child = find_tree_child(tree, c);
  if (!loop_index && !child) throw Error(ErrorCode::Validation, "no connection " + describe(c));

  KTree out = tree;
  if (loop_index) {
    out.loops.erase(out.loops.begin() + static_cast<std::ptrdiff_t>(*loop_index));
  } else {
    out.parent.erase(*child);
  }
  if (reachable(adjacency(out), out.root).size() != out.modules.size()) {
    throw Error(ErrorCode::Connectivity,
                "connectivity violation: removing " + describe(c) + " would split the system");
  }
  if (child) out.orphans.insert(*child);
  return out;
}

KTree assign_new_parent(const KTree& tree, ModuleId m) {
  require_module(tree, m);
  if (!tree.orphans.contains(m)) throw Error(ErrorCode::Usage, mname(m) + " is not orphaned");

  const std::set<ModuleId> detached = subtree(tree, m);

  struct Candidate {
    ModuleId anchor;
    std::size_t loop;
  };
  // Loop connections of `x` leaving the detached set, by ascending edge label then neighbor id.
  auto candidates_of = [&](ModuleId x) {
    std::vector<std::pair<std::pair<int, ModuleId>, std::size_t>> found;
    const ModuleState& s = tree.modules.at(x);
    for (std::size_t i = 0; i < tree.loops.size(); ++i) {
      const Connection& c = tree.loops[i];
      if (!c.touches(x)) continue;
      const ModuleId near = c.other(x);
      if (detached.contains(near)) continue;
      found.push_back({{s.label_of_port(c.port_of(x)).value(), near}, i});
    }
    std::sort(found.begin(), found.end());
    return found;
  };

  std::optional<Candidate> pick;
  for (const auto& [key, i] : candidates_of(m)) {
    const ConnResult r = is_conn(tree, tree.root, key.second, m);
    if (r.connected && std::find(r.path.begin(), r.path.end(), m) == r.path.end()) {
      pick = Candidate{m, i};
      break;
    }
  }
  if (!pick) {
    // No direct neighbor: re-anchor the detached subtree through the first
    // descendant (breadth-first, ascending id) that still touches the rest.
    const auto kids = tree.children();
    std::deque<ModuleId> queue{m};
    while (!queue.empty() && !pick) {
      const ModuleId x = queue.front();
      queue.pop_front();
      if (x != m) {
        const auto found = candidates_of(x);
        if (!found.empty()) pick = Candidate{x, found.front().second};
      }
      if (auto it = kids.find(x); it != kids.end()) {
        for (ModuleId c : it->second) queue.push_back(c);
      }
    }
  }
  if (!pick) {
    throw Error(ErrorCode::Connectivity, "unrecoverable split: " + mname(m) + " has no neighbor to re-anchor to");
  }

  KTree out = tree;
  const Connection promoted = out.loops[pick->loop];
  out.loops.erase(out.loops.begin() + static_cast<std::ptrdiff_t>(pick->loop));

  // Reverse the tree path from the anchor up to m.
  std::vector<ModuleId> path{pick->anchor};
  while (path.back() != m) path.push_back(tree.parent.at(path.back()).parent);
  for (std::size_t i = path.size() - 1; i > 0; --i) {
    const ModuleId upper = path[i];
    const ModuleId lower = path[i - 1];
    const ParentLink old = tree.parent.at(lower);
    out.parent[upper] = {lower, old.child_port, old.parent_port};
    relabel_to_port(out, upper, old.parent_port);
  }
  const ModuleId anchor = pick->anchor;
  const ModuleId near = promoted.other(anchor);
  out.parent[anchor] = {near, promoted.port_of(near), promoted.port_of(anchor)};
  relabel_to_port(out, anchor, promoted.port_of(anchor));
  out.orphans.erase(m);
  return out;
}

bool adjacency_isomorphic(const KTree& a, const KTree& b) {
  if (a.modules.size() != b.modules.size()) return false;
  const auto adj_a = adjacency(a);
  const auto adj_b = adjacency(b);
  std::vector<ModuleId> va, vb;
  for (const auto& [id, n] : adj_a) va.push_back(id);
  for (const auto& [id, n] : adj_b) vb.push_back(id);
  auto degree_profile = [](const std::map<ModuleId, std::vector<ModuleId>>& adj) {
    std::vector<std::size_t> d;
    for (const auto& [id, n] : adj) d.push_back(n.size());
    std::sort(d.begin(), d.end());
    return d;
  };
  if (degree_profile(adj_a) != degree_profile(adj_b)) return false;

  // Backtracking over a -> b assignments, pruned by degree and by
  // consistency with already assigned neighbors.
  std::map<ModuleId, ModuleId> fwd;
  std::set<ModuleId> used;
  auto adjacent = [](const std::map<ModuleId, std::vector<ModuleId>>& adj, ModuleId x, ModuleId y) {
    const auto& n = adj.at(x);
    return std::binary_search(n.begin(), n.end(), y);
  };
  std::function<bool(std::size_t)> extend = [&](std::size_t i) {
    if (i == va.size()) return true;
    const ModuleId x = va[i];
    for (ModuleId y : vb) {
      if (used.contains(y) || adj_a.at(x).size() != adj_b.at(y).size()) continue;
      bool ok = true;
      for (const auto& [px, py] : fwd) {
        if (adjacent(adj_a, x, px) != adjacent(adj_b, y, py)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      fwd[x] = y;
      used.insert(y);
      if (extend(i + 1)) return true;
      fwd.erase(x);
      used.erase(y);
    }
    return false;
  };
  return extend(0);
}

std::vector<std::string> check_invariants(const KTree& tree) {
  std::vector<std::string> problems;
  if (!tree.modules.contains(tree.root)) {
    problems.push_back("root " + mname(tree.root) + " is not a module");
    return problems;
  }
  if (tree.parent.contains(tree.root)) problems.push_back("root has a parent");
  for (const auto& [id, s] : tree.modules) {
    if (s.id != id) problems.push_back(mname(id) + ": state id mismatch");
    if (!(s.sigma > 0.0 && s.sigma < kPi)) problems.push_back(mname(id) + ": sigma outside (0, pi)");
    const double th = s.theta();
    if (th < s.params.theta_min - 1e-9 || th > s.params.theta_max + 1e-9) {
      problems.push_back(mname(id) + ": theta outside folding limits");
    }
    if (id == tree.root || tree.orphans.contains(id)) continue;
    auto it = tree.parent.find(id);
    if (it == tree.parent.end()) {
      problems.push_back(mname(id) + ": no parent");
      continue;
    }
    if (s.label_offset != it->second.child_port) problems.push_back(mname(id) + ": E0 is not the parent edge");
    // Walk to the root (or an orphan) without revisiting.
    std::set<ModuleId> seen{id};
    ModuleId x = id;
    while (x != tree.root && !tree.orphans.contains(x)) {
      auto p = tree.parent.find(x);
      if (p == tree.parent.end()) {
        problems.push_back(mname(id) + ": ancestor chain broken at " + mname(x));
        break;
      }
      x = p->second.parent;
      if (!seen.insert(x).second) {
        problems.push_back(mname(id) + ": parent map has a cycle");
        break;
      }
    }
  }
  for (ModuleId o : tree.orphans) {
    if (!tree.modules.contains(o)) problems.push_back("orphan " + mname(o) + " is not a module");
    if (tree.parent.contains(o)) problems.push_back("orphan " + mname(o) + " still has a parent");
  }
  std::set<std::pair<ModuleId, int>> used;
  for (const Connection& c : tree.connections()) {
    if (!tree.modules.contains(c.module_a) || !tree.modules.contains(c.module_b)) {
      problems.push_back("connection " + describe(c) + " references an unknown module");
      continue;
    }
    if (c.module_a == c.module_b) problems.push_back("self connection " + describe(c));
    if (c.port_a < 0 || c.port_a > 3 || c.port_b < 0 || c.port_b > 3) {
      problems.push_back("connection " + describe(c) + " has an invalid port");
    }
    if (!used.insert({c.module_a, c.port_a}).second || !used.insert({c.module_b, c.port_b}).second) {
      problems.push_back("edge used twice in " + describe(c));
    }
  }
  if (!tree.pending() && reachable(adjacency(tree), tree.root).size() != tree.modules.size()) {
    problems.push_back("system is disconnected");
  }
  return problems;
}

}  // namespace rhombot
