#include <cmath>
#include <random>

#include "../common/fixtures.hpp"
#include "core/topology.hpp"
#include "doctest.h"

using namespace rhombot;
using namespace rhombot::testing;

namespace {

void check_same_footprints(const KTree& a, const KTree& b, double tol = 1e-9) {
  const auto pa = world_poses(a);
  const auto pb = world_poses(b);
  for (const auto& [id, s] : a.modules) {
    const ConvexPoly fa = footprint(s, pa.at(id));
    const ConvexPoly fb = footprint(b.modules.at(id), pb.at(id));
    for (const Vec2& v : fa.vertices()) {
      bool hit = false;
      for (const Vec2& w : fb.vertices()) hit = hit || norm(v - w) <= tol;
      CHECK(hit);
    }
  }
}

}  // namespace

TEST_CASE("initialize_ktree examples") {
  const KTree single = initialize_ktree({square_module(5)}, {}, 5, {});
  CHECK(single.modules.size() == 1);
  CHECK(single.parent.empty());
  CHECK(check_invariants(single).empty());

  const KTree sq = square_tree();
  CHECK(sq.parent.size() == 3);
  CHECK(sq.loops.size() == 1);
  CHECK(sq.loops[0].same_pair(link(2, 3, 3, 1)));
  CHECK(check_invariants(sq).empty());

  const KTree chain = chain_tree();
  CHECK(chain.parent.size() == 3);
  CHECK(chain.loops.empty());

  // Each child is relabeled so the port toward its parent carries E0.
  CHECK(sq.modules.at(1).label_offset == 3);
  CHECK(sq.modules.at(3).label_offset == 0);
  CHECK(sq.modules.at(1).theta() == doctest::Approx(kPi / 2));
}

TEST_CASE("initialize_ktree errors") {
  CHECK_THROWS_AS(initialize_ktree({square_module(0), square_module(1)}, {}, 0, {}), Error);
  try {
    initialize_ktree({square_module(0), square_module(1)}, {}, 0, {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Connectivity);
    CHECK(std::string(e.what()).find("disconnected") != std::string::npos);
  }
  // Geometric inconsistency: M1 on M0's top cannot also mate M0's right edge.
  CHECK_THROWS_AS(initialize_ktree({square_module(0), square_module(1)}, {link(0, 2, 1, 0), link(0, 1, 1, 3)}, 0, {}),
                  MisalignmentError);
  // Duplicate connector use.
  try {
    initialize_ktree({square_module(0), square_module(1), square_module(2)}, {link(0, 2, 1, 0), link(0, 2, 2, 0)}, 0,
                     {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
  }
  CHECK_THROWS_AS(initialize_ktree({square_module(0, 150)}, {}, 0, {}), Error);
}

TEST_CASE("initialize_ktree is idempotent on its own output") {
  for (const KTree& t : {square_tree(), chain_tree(), triangle_tree(120)}) {
    std::vector<ModuleState> mods;
    for (const auto& [id, s] : t.modules) mods.push_back(s);
    const KTree again = initialize_ktree(mods, t.connections(), t.root, t.base);
    CHECK(again == t);
  }
}

TEST_CASE("declared tree mode keeps the given spanning tree") {
  std::vector<Connection> cons{link(0, 1, 1, 3), link(1, 2, 2, 0), link(2, 3, 3, 1), link(3, 0, 0, 2)};
  cons[0].kind = cons[1].kind = cons[2].kind = ConnectionKind::Tree;
  const KTree t = initialize_ktree({square_module(0), square_module(1), square_module(2), square_module(3)}, cons, 0,
                                   {}, {}, TreeMode::Declared);
  CHECK(t.parent.at(3).parent == 2);
  CHECK(t.loops.size() == 1);
  CHECK(t.loops[0].same_pair(cons[3]));
  CHECK(check_invariants(t).empty());
}

TEST_CASE("is_conn examples") {
  const KTree sq = square_tree();
  CHECK(is_conn(sq, 0, 0).path == std::vector<ModuleId>{0});
  CHECK(is_conn(sq, 0, 0).connected);
  const KTree chain = chain_tree(3);
  const ConnResult cut = is_conn(chain, 0, 2, 1);
  CHECK_FALSE(cut.connected);
  CHECK(cut.path.empty());
  const ConnResult around = is_conn(sq, 0, 2, 1);
  CHECK(around.connected);
  CHECK(around.path == std::vector<ModuleId>{0, 3, 2});
  CHECK_THROWS_AS(is_conn(sq, 0, 9), Error);
}

TEST_CASE("connect examples") {
  KTree t = triangle_tree(120);
  const KTree joined = connect(t, link(2, 2, 3, 3));
  CHECK(joined.loops.size() == 1);
  CHECK(joined.parent == t.parent);

  // M0 with M1 on top and M3 to the right; an oversized M2 hangs off M1's
  // right edge so its bottom edge sits 5 cm (diagonally) from M3's top edge.
  ModuleState big = square_module(2);
  big.params.a = 0.14 + 0.05 / std::sqrt(2.0);
  const KTree gap = initialize_ktree({square_module(0), square_module(1), big, square_module(3)},
                                     {link(0, 2, 1, 0), link(1, 1, 2, 3), link(0, 1, 3, 3)}, 0, {});
  try {
    connect(gap, link(2, 0, 3, 2));
    FAIL("expected misalignment");
  } catch (const MisalignmentError& e) {
    CHECK(e.offsets().position == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(e.offsets().angle == doctest::Approx(0.0));
  }
  try {
    connect(t, link(1, 2, 3, 3));
    FAIL("expected occupancy error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Occupied);
  }
}

TEST_CASE("disconnect examples") {
  KTree tri = connect(triangle_tree(120), link(2, 2, 3, 3));
  const KTree pending = disconnect(tri, link(1, 1, 3, 0));
  CHECK(pending.pending());
  CHECK(pending.orphans == std::set<ModuleId>{3});
  const KTree fixed = assign_new_parent(pending, 3);
  CHECK(fixed.parent.at(3).parent == 2);
  CHECK(check_invariants(fixed).empty());
  check_same_footprints(tri, fixed);

  // Removing the loop connection instead leaves a valid tree immediately.
  const KTree loopless = disconnect(tri, link(2, 2, 3, 3));
  CHECK_FALSE(loopless.pending());
  CHECK(check_invariants(loopless).empty());

  const KTree two = chain_tree(2);
  try {
    disconnect(two, link(0, 2, 1, 0));
    FAIL("expected a connectivity violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Connectivity);
  }

  const KTree sq = square_tree();
  const KTree orphaned = disconnect(sq, link(0, 1, 1, 3));
  CHECK(orphaned.orphans == std::set<ModuleId>{1});
  CHECK_THROWS_AS(world_poses(orphaned), Error);
  CHECK_THROWS_AS(connect(orphaned, link(0, 0, 1, 0)), Error);
  const KTree reparented = assign_new_parent(orphaned, 1);
  CHECK(reparented.parent.at(1).parent == 2);
  CHECK(check_invariants(reparented).empty());
  check_same_footprints(sq, reparented);
  CHECK(determine_child(sq, link(1, 3, 0, 1)) == std::optional<ModuleId>{1});
  CHECK_FALSE(determine_child(sq, sq.loops[0]).has_value());
}

TEST_CASE("assign_new_parent prefers the lowest edge label") {
  // Cells (col,row): root M4 at (1,1), M9 below it at (1,0), M0 at (0,0),
  // M2 at (2,0), M5 at (0,1), M6 at (2,1). M0 and M2 hang off M5 and M6, so
  // M9's side connections are both loop connections.
  std::vector<ModuleState> mods{square_module(0), square_module(9), square_module(2), square_module(4),
                                square_module(5), square_module(6)};
  const std::vector<Connection> cons{link(4, 0, 9, 2), link(9, 3, 0, 1), link(9, 1, 2, 3), link(4, 3, 5, 1),
                                     link(4, 1, 6, 3), link(5, 0, 0, 2), link(6, 0, 2, 2)};
  const KTree t = initialize_ktree(mods, cons, 4, {});
  REQUIRE(t.parent.at(9).parent == 4);
  REQUIRE(t.parent.at(0).parent == 5);
  REQUIRE(t.modules.at(9).label_offset == 2);
  const KTree pending = disconnect(t, link(4, 0, 9, 2));
  // Candidates: M2 on port 1 (label E3) and M0 on port 3 (label E1).
  CHECK(t.modules.at(9).label_of_port(3).value() == 1);
  CHECK(t.modules.at(9).label_of_port(1).value() == 3);
  const KTree fixed = assign_new_parent(pending, 9);
  CHECK(fixed.parent.at(9).parent == 0);
  CHECK(fixed.modules.at(9).label_offset == 3);
  CHECK(check_invariants(fixed).empty());
  check_same_footprints(t, fixed);
}

TEST_CASE("assign_new_parent errors") {
  const KTree sq = square_tree();
  CHECK_THROWS_AS(assign_new_parent(sq, 1), Error);  // not orphaned
  // Orphan with no remaining connections.
  KTree broken = chain_tree(2);
  broken.parent.erase(1);
  broken.orphans.insert(1);
  try {
    assign_new_parent(broken, 1);
    FAIL("expected an unrecoverable split");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Connectivity);
  }
}

TEST_CASE("re-anchoring through a descendant") {
  // Column M0-M1-M2 upward, M3 right of M2, M4 right of M1 and below M3.
  // Cutting M1-M2 orphans M2, which has no loop connection of its own; its
  // child M3 still touches M4.
  std::vector<ModuleState> mods{square_module(0), square_module(1), square_module(2), square_module(3),
                                square_module(4)};
  const std::vector<Connection> cons{link(0, 2, 1, 0), link(1, 2, 2, 0), link(2, 1, 3, 3), link(1, 1, 4, 3),
                                     link(4, 2, 3, 0)};
  const KTree t = initialize_ktree(mods, cons, 0, {});
  REQUIRE(t.parent.at(3).parent == 2);
  REQUIRE(t.loops.size() == 1);
  const KTree pending = disconnect(t, link(1, 2, 2, 0));
  CHECK(pending.orphans == std::set<ModuleId>{2});
  const KTree fixed = assign_new_parent(pending, 2);
  CHECK(fixed.parent.at(3).parent == 4);
  CHECK(fixed.parent.at(2).parent == 3);
  CHECK(check_invariants(fixed).empty());
  check_same_footprints(t, fixed);
}

TEST_CASE("random connect/disconnect sequences keep the tree sound") {
  // Square lattice cells; any two adjacent occupied cells can be connected.
  std::mt19937_64 rng(12);
  for (int run = 0; run < 300; ++run) {
    std::uniform_int_distribution<int> count(2, 8);
    const int n = count(rng);
    // Random polyomino grown cell by cell.
    std::vector<std::pair<int, int>> cells{{0, 0}};
    const int dx[4] = {0, 1, 0, -1};
    const int dy[4] = {-1, 0, 1, 0};
    while (static_cast<int>(cells.size()) < n) {
      const auto c = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
      const int d = std::uniform_int_distribution<int>(0, 3)(rng);
      const std::pair<int, int> nc{c.first + dx[d], c.second + dy[d]};
      if (std::find(cells.begin(), cells.end(), nc) == cells.end()) cells.push_back(nc);
    }
    std::vector<ModuleState> mods;
    std::vector<Connection> all;
    for (int i = 0; i < n; ++i) mods.push_back(square_module(i));
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < 4; ++p) {
        const std::pair<int, int> nc{cells[static_cast<std::size_t>(i)].first + dx[p],
                                     cells[static_cast<std::size_t>(i)].second + dy[p]};
        auto it = std::find(cells.begin(), cells.end(), nc);
        if (it == cells.end()) continue;
        const int j = static_cast<int>(it - cells.begin());
        if (i < j) all.push_back(link(i, p, j, (p + 2) % 4));
      }
    }
    KTree t = initialize_ktree(mods, all, 0, Pose2(0.2, 1.0, -1.0));
    for (int step = 0; step < 20; ++step) {
      std::vector<Connection> present = t.connections();
      std::vector<Connection> absent;
      for (const Connection& c : all) {
        if (!t.at_port(c.module_a, c.port_a)) absent.push_back(c);
      }
      const bool do_connect = !absent.empty() && std::uniform_int_distribution<int>(0, 1)(rng);
      if (do_connect) {
        const Connection c = absent[std::uniform_int_distribution<std::size_t>(0, absent.size() - 1)(rng)];
        t = connect(t, c);
      } else {
        const Connection c = present[std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng)];
        try {
          const auto child = determine_child(t, c);
          KTree next = disconnect(t, c);
          if (child) next = assign_new_parent(next, *child);
          check_same_footprints(t, next);
          t = next;
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::Connectivity);
        }
      }
      REQUIRE(check_invariants(t).empty());
      CHECK(t.modules.size() == static_cast<std::size_t>(n));
      for (const auto& [id, s] : t.modules) CHECK(is_conn(t, t.root, id).connected);
    }
  }
}
