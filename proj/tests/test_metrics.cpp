#include <cmath>
#include <stdexcept>

#include "awm/metrics.hpp"
#include "awm/rng.hpp"
#include "awm/rollout.hpp"
#include "awm/scenario.hpp"
#include "doctest.h"

using namespace awm;

namespace {

std::vector<VehicleState> path_of(std::initializer_list<std::pair<double, double>> pts) {
  std::vector<VehicleState> out;
  for (const auto& [x, y] : pts) out.push_back({x, y, 0, 0, 0});
  return out;
}

std::vector<VehicleState> shift(const std::vector<VehicleState>& in, double dx, double dy) {
  std::vector<VehicleState> out = in;
  for (auto& s : out) {
    s.x += dx;
    s.y += dy;
  }
  return out;
}

std::vector<VehicleState> rigid(const std::vector<VehicleState>& in, double ang, double dx,
                                double dy) {
  std::vector<VehicleState> out;
  const double c = std::cos(ang), sn = std::sin(ang);
  for (const auto& s : in) {
    out.push_back({c * s.x - sn * s.y + dx, sn * s.x + c * s.y + dy, s.vx, s.vy, s.yaw + ang});
  }
  return out;
}

}  // namespace

TEST_CASE("ade: identical sequences give zero") {
  const auto a = path_of({{0, 0}, {1, 0}, {2, 0}});
  CHECK(ade(a, a) == 0.0);
}

TEST_CASE("ade: constant unit shift gives one") {
  const auto a = path_of({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  CHECK(ade(shift(a, 1.0, 0.0), a) == doctest::Approx(1.0));
}

TEST_CASE("ade: length-3 sequences match a hand-computed mean") {
  const auto realized = path_of({{0, 0}, {1, 0}, {1, 1}});
  const auto expert = path_of({{0, 1}, {2, 0}, {4, 5}});
  // distances: 1, 1, 5 -> mean 7/3
  CHECK(ade(realized, expert) == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("ade contract errors") {
  const auto a = path_of({{0, 0}, {1, 0}});
  const auto b = path_of({{0, 0}});
  CHECK_THROWS_AS(ade(a, b), std::invalid_argument);
  const std::vector<VehicleState> empty;
  CHECK_THROWS_AS(ade(empty, empty), std::invalid_argument);
}

TEST_CASE("ade is invariant under a rigid transform of both sequences") {
  Rng rng(8);
  std::vector<VehicleState> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), 0, 0, 0});
    b.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), 0, 0, 0});
  }
  const double base = ade(a, b);
  const double moved = ade(rigid(a, 0.7, 3.0, -2.0), rigid(b, 0.7, 3.0, -2.0));
  CHECK(moved == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("min_ade: single rollout equals ade") {
  const auto expert = path_of({{0, 0}, {1, 0}});
  const auto rollout = path_of({{0, 1}, {1, 1}});
  const MinAde m = min_ade({rollout}, expert);
  CHECK(m.value == doctest::Approx(ade(rollout, expert)));
  CHECK(m.index == 0);
}

TEST_CASE("min_ade: a rollout equal to the expert wins with zero") {
  const auto expert = path_of({{0, 0}, {1, 0}, {2, 0}});
  const std::vector<std::vector<VehicleState>> rollouts = {shift(expert, 2, 2), expert,
                                                           shift(expert, -1, 0)};
  const MinAde m = min_ade(rollouts, expert);
  CHECK(m.value == 0.0);
  CHECK(m.index == 1);
}

TEST_CASE("min_ade: ties break to the lowest index and min is monotone in K") {
  const auto expert = path_of({{0, 0}, {1, 0}});
  const auto r1 = shift(expert, 1, 0);
  const auto r2 = shift(expert, 0, 1);  // same ADE as r1
  CHECK(min_ade({r1, r2}, expert).index == 0);

  std::vector<std::vector<VehicleState>> rollouts;
  Rng rng(3);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    rollouts.push_back(shift(expert, rng.uniform(-4, 4), rng.uniform(-4, 4)));
    const double v = min_ade(rollouts, expert).value;
    CHECK(v <= prev);
    prev = v;
  }
  rollouts.push_back(expert);
  CHECK(min_ade(rollouts, expert).value == 0.0);
  CHECK_THROWS_AS(min_ade({}, expert), std::invalid_argument);
}

TEST_CASE("overlap: riding on top of a replayed agent triggers the flag") {
  OtherAgent agent;
  agent.radius = 1.0;
  agent.poses = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const auto ego = path_of({{0, 0}, {1, 0}, {2, 0}});
  CHECK(overlap_flag(ego, std::vector<OtherAgent>{agent}, 1.0));

  const auto far = path_of({{0, 10}, {1, 10}, {2, 10}});
  CHECK(!overlap_flag(far, std::vector<OtherAgent>{agent}, 1.0));
}

TEST_CASE("offroad: lateral threshold against the corridor half width") {
  Roadgraph rg;
  rg.half_width = 3.0;
  Polyline seg;
  for (int i = 0; i <= 20; ++i) seg.pts.push_back({static_cast<double>(i), 0.0});
  rg.segments.push_back(seg);

  const auto parked_inside = path_of({{5.0, 2.9}, {5.0, 2.9}});
  CHECK(!offroad_flag(parked_inside, rg));
  const auto parked_outside = path_of({{5.0, 3.5}, {5.0, 3.5}});
  CHECK(offroad_flag(parked_outside, rg));
}

TEST_CASE("expert trajectories of generated scenarios are never offroad") {
  for (const ScenarioKind kind : {ScenarioKind::kStraight, ScenarioKind::kArc,
                                  ScenarioKind::kSCurve, ScenarioKind::kFork,
                                  ScenarioKind::kStopGo}) {
    const Scenario sc = generate_scenario(kind, 21);
    CHECK(!offroad_flag(sc.expert.states, sc.roadgraph));
  }
}

TEST_CASE("rates aggregated over a dataset equal the mean of per-scenario flags") {
  // three synthetic rows
  std::vector<EvalRow> rows(3);
  rows[0].overlap = true;
  rows[1].overlap = false;
  rows[2].overlap = true;
  rows[0].offroad = false;
  rows[1].offroad = false;
  rows[2].offroad = true;
  CHECK(overlap_rate(rows) == doctest::Approx(2.0 / 3.0));
  CHECK(offroad_rate(rows) == doctest::Approx(1.0 / 3.0));
}
