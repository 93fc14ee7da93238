#include <algorithm>
#include <cmath>
#include <random>

#include "../common/fixtures.hpp"
#include "core/kinematics.hpp"
#include "core/loop_solver.hpp"
#include "doctest.h"

using namespace rhombot;
using namespace rhombot::testing;

namespace {

ModuleState with_sigma(double sigma_deg, double a = 0.14) {
  ModuleState s;
  s.sigma = deg2rad(sigma_deg);
  s.params.a = a;
  return s;
}

void check_pose(const Pose2& p, const Pose2& q, double tol) {
  CHECK(std::abs(normalize_angle(p.yaw - q.yaw)) <= tol);
  CHECK(std::abs(p.x - q.x) <= tol);
  CHECK(std::abs(p.y - q.y) <= tol);
}

void check_vertices(const ConvexPoly& p, std::vector<Vec2> expected, double tol = 1e-12) {
  REQUIRE(p.vertices().size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(std::abs(p.vertices()[i].x - expected[i].x) <= tol);
    CHECK(std::abs(p.vertices()[i].y - expected[i].y) <= tol);
  }
}

// Every vertex of p matches some vertex of q.
bool same_vertex_set(const ConvexPoly& p, const ConvexPoly& q, double tol) {
  for (const Vec2& v : p.vertices()) {
    const bool hit = std::any_of(q.vertices().begin(), q.vertices().end(),
                                 [&](const Vec2& w) { return norm(v - w) <= tol; });
    if (!hit) return false;
  }
  return p.vertices().size() == q.vertices().size();
}

}  // namespace

TEST_CASE("edge_transform examples") {
  check_pose(edge_transform(with_sigma(90), EdgeIndex(2)), Pose2(0, 0, 0.28), 1e-12);
  check_pose(edge_transform(with_sigma(90), EdgeIndex(1)), Pose2(deg2rad(270), 0.14, 0.14), 1e-12);
  check_pose(edge_transform(with_sigma(90), EdgeIndex(3)), Pose2(deg2rad(90), -0.14, 0.14), 1e-12);
  CHECK(edge_transform(with_sigma(70), EdgeIndex(0)) == Pose2::identity());
  CHECK_THROWS_AS(EdgeIndex(4), Error);
  CHECK_THROWS_AS(EdgeIndex(-1), Error);
}

TEST_CASE("edge_transform matches the vertex-construction oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> sig(deg2rad(1), deg2rad(179));
  std::uniform_real_distribution<double> half(0.01, 1.0);
  for (int i = 0; i < 1000; ++i) {
    ModuleState s;
    s.sigma = sig(rng);
    s.params.a = half(rng);
    const auto v = oracle_vertices(s.sigma, s.params.a);
    for (int k = 1; k <= 3; ++k) {
      check_pose(edge_transform(s, EdgeIndex(k)), oracle_edge_frame(v[k], v[(k + 1) % 4]), 1e-12);
    }
    check_pose(edge_transform(s, EdgeIndex(0)), compose(oracle_edge_frame(v[0], v[1]), Pose2::rotation(kPi)),
               1e-12);
    for (int k = 0; k <= 3; ++k) {
      check_pose(mating_transform(s, EdgeIndex(k)), oracle_edge_frame(v[k], v[(k + 1) % 4]), 1e-12);
    }
  }
}

TEST_CASE("footprint examples and rhombus preservation") {
  check_vertices(footprint(with_sigma(90), {}), {{-0.14, 0}, {0.14, 0}, {0.14, 0.28}, {-0.14, 0.28}});
  check_vertices(footprint(with_sigma(60, 1.0), {}), {{-1, 0}, {1, 0}, {2, std::sqrt(3.0)}, {0, std::sqrt(3.0)}});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> sig(1e-3, kPi - 1e-3);
  for (int i = 0; i < 1000; ++i) {
    ModuleState s;
    s.sigma = sig(rng);
    const ConvexPoly p = footprint(s, Pose2(sig(rng), sig(rng), -sig(rng)));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(norm(p.vertices()[(k + 1) % 4] - p.vertices()[k]) - 2 * s.params.a) <= 1e-12);
    }
  }
}

TEST_CASE("remap_sigma examples") {
  const ModuleState s = with_sigma(75);
  CHECK(rad2deg(remap_sigma(s, EdgeIndex(2)).sigma) == doctest::Approx(75));
  CHECK(rad2deg(remap_sigma(s, EdgeIndex(1)).sigma) == doctest::Approx(105));
  CHECK(rad2deg(remap_sigma(s, EdgeIndex(3)).sigma) == doctest::Approx(105));
  const ModuleState back = remap_sigma(remap_sigma(s, EdgeIndex(1)), EdgeIndex(3));
  CHECK(back.label_offset == 0);
  CHECK(back.sigma == doctest::Approx(s.sigma).epsilon(1e-15));
  // theta is labeling-invariant.
  for (int k = 0; k < 4; ++k) CHECK(remap_sigma(s, EdgeIndex(k)).theta() == doctest::Approx(s.theta()));
  CHECK(remap_sigma(s, EdgeIndex(1)).parity());
  CHECK_FALSE(remap_sigma(s, EdgeIndex(2)).parity());
}

TEST_CASE("remap_sigma preserves the footprint up to rigid motion") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> sig(deg2rad(10), deg2rad(170));
  std::uniform_int_distribution<int> edge(0, 3);
  for (int i = 0; i < 500; ++i) {
    ModuleState s;
    s.sigma = sig(rng);
    s.label_offset = edge(rng);
    const EdgeIndex k(edge(rng));
    const ConvexPoly before = footprint(s, {});
    const ConvexPoly after = footprint(remap_sigma(s, k), relabel_transform(s, k));
    CHECK(same_vertex_set(before, after, 1e-9));
  }
}

TEST_CASE("forward_kinematics examples") {
  CHECK(forward_kinematics({}) == Pose2::identity());
  const std::vector<ChainLink> two{{with_sigma(90), EdgeIndex(2)}, {with_sigma(90), EdgeIndex(2)}};
  check_pose(forward_kinematics(two), Pose2(0, 0, 0.56), 1e-12);
  const std::vector<ChainLink> one{{with_sigma(90), EdgeIndex(1)}};
  CHECK(forward_kinematics(one) == edge_transform(one[0].state, one[0].edge));
}

TEST_CASE("forward_kinematics agrees with footprint edge chaining") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> sig(deg2rad(45), deg2rad(135));
  std::uniform_int_distribution<int> edge(1, 3);
  std::uniform_int_distribution<int> len(1, 6);
  for (int i = 0; i < 500; ++i) {
    std::vector<ChainLink> chain;
    const int n = len(rng);
    Pose2 frame;  // oracle: world frame of the current module's E0
    for (int j = 0; j < n; ++j) {
      ModuleState s;
      s.sigma = sig(rng);
      const EdgeIndex k(edge(rng));
      chain.push_back({s, k});
      std::array<Vec2, 4> w;
      const auto local = oracle_vertices(s.sigma, s.params.a);
      for (std::size_t q = 0; q < 4; ++q) w[q] = frame.apply(local[q]);
      frame = oracle_edge_frame(w[static_cast<std::size_t>(k.value())],
                                w[static_cast<std::size_t>((k.value() + 1) % 4)]);
    }
    check_pose(forward_kinematics(chain), frame, 1e-12);
  }
}

TEST_CASE("center_transform") {
  check_pose(center_transform(with_sigma(90)), Pose2(0, 0, 0.14), 1e-15);
  check_pose(center_transform(with_sigma(60, 1.0)), Pose2(0, 0.5, std::sqrt(3.0) / 2), 1e-15);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> sig(1e-3, kPi - 1e-3);
  for (int i = 0; i < 200; ++i) {
    const ModuleState s = with_sigma(rad2deg(sig(rng)));
    check_pose(compose(center_transform(s), center_transform(s)), edge_transform(s, EdgeIndex(2)), 1e-15);
  }
}

TEST_CASE("body_transform is labeling invariant") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> sig(deg2rad(45), deg2rad(135));
  for (int i = 0; i < 200; ++i) {
    const ModuleState s = ModuleState::from_theta(0, sig(rng));
    for (int k = 1; k < 4; ++k) {
      const ModuleState r = remap_sigma(s, EdgeIndex(k));
      // Same physical frame whether reached from the old or the new labeling.
      check_pose(compose(relabel_transform(s, EdgeIndex(k)), body_transform(r)), body_transform(s), 1e-12);
    }
  }
}

TEST_CASE("loop residual on the 2x2 square") {
  const KTree t = square_tree();
  REQUIRE(t.loops.size() == 1);
  const LoopSpec loop = alignment_loop(t, t.loops[0]);
  const Pose2 r = loop_residual(loop, t.modules);
  CHECK(std::abs(r.yaw) <= 1e-10);
  CHECK(std::hypot(r.x, r.y) <= 1e-10);
  for (ModuleId m = 0; m < 4; ++m) {
    ModuleTable perturbed = t.modules;
    perturbed.at(m).set_theta(deg2rad(95));
    const Pose2 p = loop_residual(loop, perturbed);
    CHECK(std::hypot(p.x, p.y) > 1e-3);
  }
}

TEST_CASE("loop residual from explicit branches") {
  // Square lattice, base at M0: long way M0 -> M1 -> M2 (E1 then E2), short way M0 -> M3 (E2).
  // The shared module M2 is entered through different ports on each branch.
  const ModuleState m0 = ModuleState::from_theta(0, kPi / 2);
  const ModuleState m1 = ModuleState::from_theta(1, kPi / 2, 3);
  const ModuleState m2_long = ModuleState::from_theta(2, kPi / 2, 0);
  const ModuleState m3 = ModuleState::from_theta(3, kPi / 2, 0);
  const ModuleState m2_short = ModuleState::from_theta(2, kPi / 2, 3);
  const std::vector<ChainLink> b1{{m0, EdgeIndex(1)}, {m1, m1.label_of_port(2)}};
  const std::vector<ChainLink> b2{{m0, EdgeIndex(2)}, {m3, m3.label_of_port(1)}};
  const Pose2 r = loop_residual(b1, m2_long, b2, m2_short);
  CHECK(std::abs(r.yaw) <= 1e-12);
  CHECK(std::hypot(r.x, r.y) <= 1e-12);

  const std::vector<ChainLink> same{{m0, EdgeIndex(2)}};
  CHECK(loop_residual(same, m3, same, m3) == Pose2::identity());
  CHECK_THROWS_AS(loop_residual({}, m3, {}, m3), Error);
}
