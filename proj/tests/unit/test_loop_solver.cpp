#include <cmath>
#include <random>

#include "../common/fixtures.hpp"
#include "core/loop_solver.hpp"
#include "doctest.h"

using namespace rhombot;
using namespace rhombot::testing;

namespace {

Eigen::Vector3d scaled_at(const LoopSpec& loop, ModuleTable table, const FreeGroups& groups,
                          std::size_t g, double theta) {
  for (ModuleId id : groups[g]) table.at(id).set_theta(theta);
  return evaluate_loop(loop, table, {}).scaled;
}

}  // namespace

TEST_CASE("square loop with one free module settles at 90 deg") {
  KTree t = square_tree();
  const LoopSpec loop = alignment_loop(t, t.loops[0]);
  for (ModuleId free : {0, 1, 2, 3}) {
    ModuleTable table = t.modules;
    table.at(free).set_theta(deg2rad(100));
    const LoopSolution sol = solve_loop(loop, table, {{free}});
    CHECK(sol.success);
    CHECK(rad2deg(sol.thetas.at(free)) == doctest::Approx(90).epsilon(1e-9));
    table.at(free).set_theta(sol.thetas.at(free));
    const Pose2 r = loop_residual(loop, table);
    CHECK(std::hypot(r.x, r.y) < 1e-8);
  }
}

TEST_CASE("triangle loop with equal angles settles at 120 deg") {
  const KTree t = triangle_tree();
  const LoopSpec loop = alignment_loop(t, triangle_op().new_con);
  const LoopSolution sol = solve_loop(loop, t.modules, {{1, 2, 3}});
  REQUIRE(sol.success);
  for (ModuleId m : {1, 2, 3}) CHECK(std::abs(rad2deg(sol.thetas.at(m)) - 120.0) < 1e-9);

  // With independent angles any three wedges filling the full turn close the loop.
  const LoopSolution each = solve_loop(loop, t.modules, {{1}, {2}, {3}});
  REQUIRE(each.success);
  double sum = 0.0;
  for (ModuleId m : {1, 2, 3}) sum += rad2deg(each.thetas.at(m));
  CHECK(std::abs(sum - 360.0) < 1e-6);
}

TEST_CASE("closure outside the folding limits is infeasible") {
  KTree t = triangle_tree();
  for (auto& [id, s] : t.modules) s.params.theta_max = deg2rad(110);
  const LoopSolution sol = solve_loop(alignment_loop(t, triangle_op().new_con), t.modules, {{1, 2, 3}});
  CHECK_FALSE(sol.success);
  CHECK(sol.residual_norm > 1e-3);
  CHECK(rad2deg(sol.thetas.at(1)) <= 110 + 1e-9);
}

TEST_CASE("analytic Jacobian matches central differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> th(deg2rad(60), deg2rad(130));
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    KTree t = (trial % 2) ? triangle_tree() : square_tree();
    const Connection con = (trial % 2) ? triangle_op().new_con : t.loops[0];
    if (!(trial % 2)) t.loops.clear();
    const LoopSpec loop = alignment_loop(t, con);
    ModuleTable table = t.modules;
    for (auto& [id, s] : table) s.set_theta(th(rng));
    FreeGroups groups;
    for (const auto& [id, s] : table) groups.push_back({id});
    if (trial % 4 == 1) {
      groups = {{1, 3}, {2}};
      table.at(3).set_theta(table.at(1).theta());
    }

    const LoopEvaluation ev = evaluate_loop(loop, table, groups);
    if (std::abs(ev.scaled(0)) > 3.0) continue;  // too close to the yaw branch cut
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double base = table.at(groups[g][0]).theta();
      const Eigen::Vector3d fd =
          (scaled_at(loop, table, groups, g, base + h) - scaled_at(loop, table, groups, g, base - h)) / (2 * h);
      for (int r = 0; r < 3; ++r) {
        const double an = ev.jacobian(r, static_cast<Eigen::Index>(g));
        CHECK(std::abs(an - fd(r)) <= 1e-5 * std::max(1.0, std::abs(fd(r))));
      }
      ++checked;
    }
  }
  CHECK(checked > 400);
}

TEST_CASE("successful solves leave a residual below tolerance") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> th(deg2rad(70), deg2rad(125));
  const KTree t = triangle_tree();
  const LoopSpec loop = alignment_loop(t, triangle_op().new_con);
  int successes = 0;
  for (int i = 0; i < 100; ++i) {
    ModuleTable table = t.modules;
    for (auto& [id, s] : table) s.set_theta(th(rng));
    const LoopSolution sol = solve_loop(loop, table, {{1}, {2}, {3}});
    if (!sol.success) continue;
    ++successes;
    for (auto [id, theta] : sol.thetas) table.at(id).set_theta(theta);
    const Eigen::Vector3d r = evaluate_loop(loop, table, {}).scaled;
    CHECK(r.norm() < 1e-8);
  }
  CHECK(successes > 50);
}
