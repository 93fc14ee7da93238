#include <algorithm>
#include <random>

#include "../common/fixtures.hpp"
#include "core/evaluation.hpp"
#include "doctest.h"

using namespace rhombot;
using namespace rhombot::testing;

namespace {

MeasurementSeries exact_series(const ChainModel& model, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> angle(deg2rad(60), deg2rad(120));
  MeasurementSeries s;
  for (int i = 0; i < n; ++i) {
    MeasurementRow r;
    r.label = "r" + std::to_string(i);
    for (std::size_t k = 0; k < model.size(); ++k) r.theta.push_back(angle(rng));
    const Vec2 p = model.predict(r.theta);
    r.x = p.x;
    r.y = p.y;
    s.push_back(r);
  }
  return s;
}

}  // namespace

TEST_CASE("chain model geometry") {
  const KTree one = initialize_ktree({square_module(0)}, {}, 0, {});
  const ChainModel single(one, 0);
  CHECK(single.size() == 1);
  // Vertex C of a rhombus with sigma = theta: B + 2a (cos, sin).
  const Vec2 c = single.predict({deg2rad(60)});
  CHECK(c.x == doctest::Approx(0.14 + 0.28 * 0.5));
  CHECK(c.y == doctest::Approx(0.28 * std::sqrt(3.0) / 2));

  const ChainModel chain(chain_tree(3), 2);
  CHECK(chain.size() == 3);
  CHECK(chain.modules() == std::vector<ModuleId>{0, 1, 2});
  const Vec2 up = chain.predict({kPi / 2, kPi / 2, kPi / 2});
  CHECK(up.x == doctest::Approx(0.14));
  CHECK(up.y == doctest::Approx(3 * 0.28));
}

TEST_CASE("chain model rejects bad input") {
  const ChainModel chain(chain_tree(3), 2);
  CHECK_THROWS_AS(chain.predict({kPi / 2, kPi / 2}), Error);
  CHECK_THROWS_AS(chain.predict({kPi / 2, kPi / 2, deg2rad(150)}), Error);
  CHECK_THROWS_AS(evaluate_rmse({}, chain), Error);
}

TEST_CASE("rmse on exact and shifted data") {
  const ChainModel chain(chain_tree(4), 3);
  MeasurementSeries s = exact_series(chain, 200, 7);
  RmseResult r = evaluate_rmse(s, chain);
  CHECK(r.x < 1e-12);
  CHECK(r.y < 1e-12);

  for (MeasurementRow& row : s) {
    row.x += 0.003;
    row.y -= 0.004;
  }
  r = evaluate_rmse(s, chain);
  CHECK(r.x == doctest::Approx(0.003).epsilon(1e-9));
  CHECK(r.y == doctest::Approx(0.004).epsilon(1e-9));

  MeasurementSeries shuffled = s;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(3));
  const RmseResult p = evaluate_rmse(shuffled, chain);
  CHECK(p.x == doctest::Approx(r.x).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(r.y).epsilon(1e-12));
}

TEST_CASE("measurement csv") {
  const ChainModel chain(chain_tree(2), 1);
  const MeasurementSeries s = exact_series(chain, 5, 11);
  const std::string csv = serialize_measurements(s);
  CHECK(csv.rfind("label,theta_0,theta_1,x_mm,y_mm\n", 0) == 0);
  const MeasurementSeries back = parse_measurements(csv);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].label == s[i].label);
    CHECK(back[i].x == doctest::Approx(s[i].x).epsilon(1e-14));
    CHECK(back[i].theta[1] == doctest::Approx(s[i].theta[1]).epsilon(1e-14));
  }
  const MeasurementSeries hand = parse_measurements("label,theta_0,x_mm,y_mm\nA,90,140,280\n");
  REQUIRE(hand.size() == 1);
  CHECK(hand[0].theta[0] == doctest::Approx(kPi / 2));
  CHECK(hand[0].x == doctest::Approx(0.14));
  CHECK(hand[0].y == doctest::Approx(0.28));
  CHECK_THROWS_AS(parse_measurements("label,x_mm\nA,1\n"), Error);
  CHECK_THROWS_AS(parse_measurements("label,theta_0,x_mm,y_mm\nA,90,abc,2\n"), Error);
}
