#include "core/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace rhombot {

namespace {

std::string mname(ModuleId id) { return "M" + std::to_string(id); }

// Modules from the root down to m.
std::vector<ModuleId> root_path(const KTree& tree, ModuleId m) {
  std::vector<ModuleId> path{m};
  while (path.back() != tree.root) path.push_back(tree.parent.at(path.back()).parent);
  std::reverse(path.begin(), path.end());
  return path;
}

// Steps along path[from..] where each module exits through the edge that
// carries the next module of the path.
std::vector<LoopStep> steps_along(const KTree& tree, const std::vector<ModuleId>& path, std::size_t from) {
  std::vector<LoopStep> steps;
  for (std::size_t i = from; i + 1 < path.size(); ++i) {
    const ModuleState& s = tree.modules.at(path[i]);
    const int port = tree.parent.at(path[i + 1]).parent_port;
    steps.push_back({s.id, s.label_offset, s.label_of_port(port)});
  }
  return steps;
}

std::set<std::pair<ModuleId, ModuleId>> connected_pairs(const KTree& tree) {
  std::set<std::pair<ModuleId, ModuleId>> out;
  for (const Connection& c : tree.connections()) {
    out.insert(std::minmax(c.module_a, c.module_b));
  }
  return out;
}

// Throws on overlap between unconnected modules or on a loop connection
// pulled apart beyond tolerance.
void check_frame(const KTree& tree, const std::map<ModuleId, Pose2>& poses,
                 const std::set<std::pair<ModuleId, ModuleId>>& connected, const EngineOptions& options,
                 double time) {
  std::vector<std::pair<ModuleId, ConvexPoly>> polys;
  polys.reserve(tree.modules.size());
  for (const auto& [id, s] : tree.modules) polys.emplace_back(id, footprint(s, poses.at(id)));
  for (std::size_t i = 0; i < polys.size(); ++i) {
    for (std::size_t j = i + 1; j < polys.size(); ++j) {
      const ModuleId a = polys[i].first;
      const ModuleId b = polys[j].first;
      if (connected.contains(std::minmax(a, b))) continue;
      if (poly_overlap(polys[i].second, polys[j].second, options.clearance)) {
        std::ostringstream os;
        os << "collision between " << mname(a) << " and " << mname(b) << " at t=" << time << " s";
        throw CollisionError(os.str(), time, a, b);
      }
    }
  }
  for (const Connection& c : tree.loops) {
    const DockingOffsets off = measure_docking(tree, poses, c);
    if (off.position > options.tol.position || off.angle > options.tol.angle) {
      std::ostringstream os;
      os << "loop connection " << describe(c) << " pulled apart at t=" << time << " s (" << off.position * 1e3
         << " mm, " << rad2deg(off.angle) << " deg)";
      throw MisalignmentError(os.str(), off);
    }
  }
}

[[noreturn]] void rethrow_with_stage(const Error& e, const char* stage) {
  const std::string msg = std::string(stage) + ": " + e.what();
  if (auto* c = dynamic_cast<const CollisionError*>(&e)) throw CollisionError(msg, c->time(), c->first(), c->second());
  if (auto* m = dynamic_cast<const MisalignmentError*>(&e)) throw MisalignmentError(msg, m->offsets());
  if (auto* f = dynamic_cast<const InfeasibleError*>(&e)) throw InfeasibleError(msg, f->residual());
  throw Error(e.code(), msg);
}

}  // namespace

const char* frame_event_name(FrameEvent e) {
  switch (e) {
    case FrameEvent::Morph: return "morph";
    case FrameEvent::Connect: return "connect";
    case FrameEvent::Disconnect: return "disconnect";
    case FrameEvent::Reparent: return "reparent";
  }
  return "morph";
}

FrameEvent frame_event_from_name(const std::string& name) {
  if (name == "morph") return FrameEvent::Morph;
  if (name == "connect") return FrameEvent::Connect;
  if (name == "disconnect") return FrameEvent::Disconnect;
  if (name == "reparent") return FrameEvent::Reparent;
  throw Error(ErrorCode::Parse, "unknown frame event '" + name + "'");
}

SimFrame snapshot(const KTree& tree, const std::map<ModuleId, Pose2>& poses, double time, FrameEvent event) {
  SimFrame f;
  f.time = time;
  f.root = tree.root;
  f.event = event;
  for (const auto& [id, s] : tree.modules) {
    f.modules.push_back({id, poses.at(id), s.sigma, s.label_offset, s.params.a});
  }
  f.connections = tree.connections();
  return f;
}

LoopSpec alignment_loop(const KTree& tree, const Connection& con) {
  const std::vector<ModuleId> pa = root_path(tree, con.module_a);
  const std::vector<ModuleId> pb = root_path(tree, con.module_b);
  std::size_t lca = 0;
  while (lca + 1 < pa.size() && lca + 1 < pb.size() && pa[lca + 1] == pb[lca + 1]) ++lca;

  LoopSpec loop;
  loop.branch1.steps = steps_along(tree, pa, lca);
  const ModuleState& sa = tree.modules.at(con.module_a);
  loop.branch1.steps.push_back({sa.id, sa.label_offset, sa.label_of_port(con.port_a)});
  loop.branch1.terminal = con.module_b;
  loop.branch1.terminal_offset = con.port_b;

  loop.branch2.steps = steps_along(tree, pb, lca);
  loop.branch2.terminal = con.module_b;
  loop.branch2.terminal_offset = tree.modules.at(con.module_b).label_offset;
  return loop;
}

std::vector<MorphTarget> plan_alignment(const KTree& tree, const Connection& con,
                                        const std::vector<ModuleId>& morphing, bool equal_angles) {
  if (tree.pending()) throw Error(ErrorCode::Pending, "plan_alignment on a pending tree");
  tree.module(con.module_a);
  tree.module(con.module_b);
  for (ModuleId m : morphing) tree.module(m);
  if (morphing.empty()) throw Error(ErrorCode::Usage, "plan_alignment needs at least one morphing module");

  FreeGroups groups;
  if (equal_angles) {
    groups.push_back(morphing);
  } else {
    for (ModuleId m : morphing) groups.push_back({m});
  }
  const LoopSolution sol = solve_loop(alignment_loop(tree, con), tree.modules, groups);
  if (!sol.success) {
    std::ostringstream os;
    os << "infeasible alignment for " << describe(con) << ": residual " << sol.residual_norm
       << " after " << sol.iterations << " iterations (folding limits)";
    throw InfeasibleError(os.str(), sol.residual_norm);
  }
  std::vector<MorphTarget> targets;
  for (std::size_t i = 0; i < morphing.size(); ++i) {
    targets.push_back({morphing[i], sol.thetas.at(morphing[i]), static_cast<int>(i)});
  }
  return targets;
}

MorphResult execute_morph(const KTree& tree, const std::vector<MorphTarget>& targets, double rate,
                          const EngineOptions& options, double start_time) {
  if (tree.pending()) throw Error(ErrorCode::Pending, "cannot morph while modules are pending re-parenting");
  if (!(rate > 0.0)) throw Error(ErrorCode::Usage, "morph rate must be positive");
  if (!(options.dt > 0.0)) throw Error(ErrorCode::Usage, "dt must be positive");

  std::set<ModuleId> seen;
  for (const MorphTarget& t : targets) {
    const ModuleState& s = tree.module(t.module);
    if (!seen.insert(t.module).second) throw Error(ErrorCode::Usage, mname(t.module) + " targeted twice");
    if (t.theta < s.params.theta_min - 1e-12 || t.theta > s.params.theta_max + 1e-12) {
      std::ostringstream os;
      os << "limit breach: " << mname(t.module) << " target " << rad2deg(t.theta) << " deg outside ["
         << rad2deg(s.params.theta_min) << ", " << rad2deg(s.params.theta_max) << "]";
      throw Error(ErrorCode::Validation, os.str());
    }
  }

  struct Ramp {
    ModuleId module;
    double from, to, start, end;
  };
  std::vector<MorphTarget> sorted = targets;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const MorphTarget& x, const MorphTarget& y) { return x.order < y.order; });
  std::vector<Ramp> ramps;
  double clock = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double longest = 0.0;
    while (j < sorted.size() && (!options.sequential || sorted[j].order == sorted[i].order)) {
      const double from = tree.modules.at(sorted[j].module).theta();
      const double duration = std::abs(sorted[j].theta - from) / rate;
      ramps.push_back({sorted[j].module, from, sorted[j].theta, clock, clock + duration});
      longest = std::max(longest, duration);
      ++j;
    }
    clock += longest;
    i = j;
  }
  const double total = clock;

  MorphResult out{tree, {}};
  const auto connected = connected_pairs(tree);
  auto emit = [&](double t, bool final) {
    for (const Ramp& r : ramps) {
      double theta = r.to;
      if (!final) {
        if (t <= r.start) {
          theta = r.from;
        } else if (t < r.end) {
          theta = r.from + (r.to - r.from) * (t - r.start) / (r.end - r.start);
        }
      }
      out.tree.modules.at(r.module).set_theta(theta);
    }
    const auto poses = world_poses(out.tree);
    check_frame(out.tree, poses, connected, options, start_time + t);
    out.frames.push_back(snapshot(out.tree, poses, start_time + t, FrameEvent::Morph));
  };

  if (total <= 0.0) {
    emit(0.0, true);
    return out;
  }
  const double steps_exact = total / options.dt;
  auto steps = static_cast<long>(std::ceil(steps_exact));
  if (std::abs(steps_exact - std::round(steps_exact)) < 1e-9) steps = std::lround(steps_exact);
  for (long k = 0; k <= steps; ++k) {
    const bool last = k == steps;
    emit(last ? total : static_cast<double>(k) * options.dt, last);
  }
  return out;
}

MorphPivotResult morphpivot(const KTree& tree, const MorphPivotOp& op, const EngineOptions& options,
                            double start_time) {
  const double rate = op.morph_rate.value_or(options.morph_rate);
  try {
    if (tree.pending()) throw Error(ErrorCode::Pending, "tree is pending re-parenting");
    for (const Connection* c : {&op.new_con, &op.new_discon}) {
      tree.module(c->module_a);
      tree.module(c->module_b);
    }
    for (auto [m, p] : {std::pair{op.new_con.module_a, op.new_con.port_a},
                        std::pair{op.new_con.module_b, op.new_con.port_b}}) {
      if (auto used = tree.at_port(m, p)) {
        throw Error(ErrorCode::Occupied, mname(m) + " port " + std::to_string(p) + " is already used by " +
                                             describe(*used));
      }
    }
    // Topology-only dry run so a splitting disconnection fails before anything moves.
    KTree dry = tree;
    Connection loop = op.new_con;
    loop.kind = ConnectionKind::Loop;
    dry.loops.push_back(loop);
    disconnect(dry, op.new_discon);
  } catch (const Error& e) {
    rethrow_with_stage(e, "validate");
  }

  MorphPivotResult res;
  res.tree = tree;
  double now = start_time;
  auto append = [&](std::vector<SimFrame>&& frames) {
    if (!frames.empty()) now = frames.back().time;
    res.frames.insert(res.frames.end(), std::make_move_iterator(frames.begin()),
                      std::make_move_iterator(frames.end()));
  };

  KTree current = tree;
  try {
    std::vector<MorphTarget> pre = op.pre_morph;
    if (!op.align.empty()) pre = plan_alignment(current, op.new_con, op.align, op.align_equal);
    MorphResult m = execute_morph(current, pre, rate, options, now);
    current = std::move(m.tree);
    append(std::move(m.frames));
  } catch (const Error& e) {
    rethrow_with_stage(e, "pre-morph");
  }

  auto poses = world_poses(current);
  const DockingOffsets off = measure_docking(current, poses, op.new_con);
  res.report = {off.position, off.angle, off.position <= options.tol.position && off.angle <= options.tol.angle};
  if (!res.report.pass) return res;

  try {
    current = connect(current, op.new_con, options.tol);
    res.frames.push_back(snapshot(current, poses, now, FrameEvent::Connect));

    const std::optional<ModuleId> child = determine_child(current, op.new_discon);
    current = disconnect(current, op.new_discon);
    res.frames.push_back(snapshot(current, poses, now, FrameEvent::Disconnect));
    if (child) {
      current = assign_new_parent(current, *child);
      poses = world_poses(current);
      res.frames.push_back(snapshot(current, poses, now, FrameEvent::Reparent));
    }
  } catch (const Error& e) {
    rethrow_with_stage(e, "reconnect");
  }

  try {
    MorphResult m = execute_morph(current, op.post_morph, rate, options, now);
    current = std::move(m.tree);
    append(std::move(m.frames));
  } catch (const Error& e) {
    rethrow_with_stage(e, "post-morph");
  }

  const auto problems = check_invariants(current);
  if (!problems.empty()) throw Error(ErrorCode::Internal, "tree invariant violated: " + problems.front());
  res.tree = std::move(current);
  res.docked = true;
  return res;
}

ScriptResult run_script(const KTree& tree, const std::vector<MorphPivotOp>& script, const EngineOptions& options) {
  ScriptResult out;
  out.tree = tree;
  double now = 0.0;
  for (std::size_t i = 0; i < script.size(); ++i) {
    try {
      MorphPivotResult r = morphpivot(out.tree, script[i], options, now);
      if (!r.frames.empty()) now = r.frames.back().time;
      out.frames.insert(out.frames.end(), r.frames.begin(), r.frames.end());
      out.reports.push_back(r.report);
      if (!r.docked) {
        std::ostringstream os;
        os << "docking failed: offset " << r.report.position_offset * 1e3 << " mm, "
           << rad2deg(r.report.angular_offset) << " deg";
        out.failure = ScriptFailure{i, ErrorCode::Misaligned, os.str()};
        return out;
      }
      out.tree = std::move(r.tree);
      ++out.completed;
    } catch (const Error& e) {
      out.failure = ScriptFailure{i, e.code(), e.what()};
      return out;
    }
  }
  return out;
}

}  // namespace rhombot
