#include <cmath>
#include <cstdio>
#include <fstream>

#include "awm/metrics.hpp"
#include "awm/scenario.hpp"
#include "doctest.h"

using namespace awm;

namespace {

bool states_identical(const VehicleState& a, const VehicleState& b) {
  return a.x == b.x && a.y == b.y && a.vx == b.vx && a.vy == b.vy && a.yaw == b.yaw;
}

const std::vector<ScenarioKind> kAllKinds = {ScenarioKind::kStraight, ScenarioKind::kArc,
                                             ScenarioKind::kSCurve, ScenarioKind::kFork,
                                             ScenarioKind::kStopGo};

}  // namespace

TEST_CASE("straight scenarios keep a constant heading and near-zero curvature actions") {
  for (std::uint64_t seed : {0ull, 5ull, 9ull}) {
    const Scenario sc = generate_scenario(ScenarioKind::kStraight, seed);
    const double yaw0 = sc.expert.states.front().yaw;
    for (const VehicleState& s : sc.expert.states) CHECK(std::abs(s.yaw - yaw0) < 1e-9);
    for (const Action& a : sc.expert.actions) CHECK(std::abs(a.curvature) < 1e-6);
  }
}

TEST_CASE("fork experts with seeds 0 and 1 share a road but diverge by > 5 m") {
  const Scenario a = generate_scenario(ScenarioKind::kFork, 0);
  const Scenario b = generate_scenario(ScenarioKind::kFork, 1);

  // a shared trunk, opposite branches
  REQUIRE(a.roadgraph.segments.size() == 3);
  CHECK(a.expert.states.front().x == b.expert.states.front().x);
  CHECK(a.expert.states.front().yaw == b.expert.states.front().yaw);

  const VehicleState& fa = a.expert.states.back();
  const VehicleState& fb = b.expert.states.back();
  CHECK(std::hypot(fa.x - fb.x, fa.y - fb.y) > 5.0);
}

TEST_CASE("expert trajectories are exactly consistent with the dynamics") {
  GeneratorParams gp;
  for (const ScenarioKind kind : kAllKinds) {
    const Scenario sc = generate_scenario(kind, 3, gp);
    REQUIRE(sc.expert.states.size() == 80);
    REQUIRE(sc.expert.actions.size() == 79);
    for (std::size_t t = 0; t + 1 < sc.expert.states.size(); ++t) {
      const VehicleState replay = step(sc.expert.states[t], sc.expert.actions[t], gp.sim);
      CHECK(states_identical(replay, sc.expert.states[t + 1]));
    }
    // actions stay inside the clip bounds
    for (const Action& a : sc.expert.actions) {
      CHECK(std::abs(a.accel) <= gp.sim.max_accel);
      CHECK(std::abs(a.curvature) <= gp.sim.max_curvature);
    }
  }
}

TEST_CASE("generation is deterministic bit for bit") {
  for (const ScenarioKind kind : kAllKinds) {
    const Scenario a = generate_scenario(kind, 77);
    const Scenario b = generate_scenario(kind, 77);
    REQUIRE(a.expert.states.size() == b.expert.states.size());
    for (std::size_t t = 0; t < a.expert.states.size(); ++t) {
      CHECK(states_identical(a.expert.states[t], b.expert.states[t]));
    }
    REQUIRE(a.roadgraph.segments.size() == b.roadgraph.segments.size());
    CHECK(a.goal.x == b.goal.x);
    CHECK(a.goal.heading == b.goal.heading);
  }
}

TEST_CASE("experts stay on the road and inside the speed envelope") {
  for (const ScenarioKind kind : kAllKinds) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
      const Scenario sc = generate_scenario(kind, seed);
      for (const VehicleState& s : sc.expert.states) {
        const double lateral = distance_to_roadgraph({s.x, s.y}, sc.roadgraph);
        CHECK(lateral < sc.roadgraph.half_width);
        const double v = signed_speed(s);
        CHECK(v >= 0.5);
        CHECK(v <= 15.0);
      }
      CHECK(!offroad_flag(sc.expert.states, sc.roadgraph));
      // goal matches the expert's final pose
      CHECK(sc.goal.x == sc.expert.states.back().x);
      CHECK(sc.goal.y == sc.expert.states.back().y);
      CHECK(sc.goal.heading == sc.expert.states.back().yaw);
    }
  }
}

TEST_CASE("the replayed leading agent never overlaps the expert") {
  for (const ScenarioKind kind :
       {ScenarioKind::kStraight, ScenarioKind::kArc, ScenarioKind::kSCurve,
        ScenarioKind::kStopGo}) {
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
      const Scenario sc = generate_scenario(kind, seed);
      REQUIRE(!sc.others.empty());
      CHECK(!overlap_flag(sc.expert.states, sc.others, 1.0));
    }
  }
}

TEST_CASE("dataset save/load round trip is field identical") {
  std::vector<Scenario> scenarios;
  for (const ScenarioKind kind : kAllKinds) scenarios.push_back(generate_scenario(kind, 11));
  const std::string path = "dataset_roundtrip.jsonl";
  save_dataset(scenarios, path);
  const std::vector<Scenario> loaded = load_dataset(path);

  REQUIRE(loaded.size() == scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const Scenario& a = scenarios[i];
    const Scenario& b = loaded[i];
    CHECK(a.seed == b.seed);
    CHECK(a.kind == b.kind);
    CHECK(a.roadgraph.half_width == b.roadgraph.half_width);
    REQUIRE(a.roadgraph.segments.size() == b.roadgraph.segments.size());
    for (std::size_t s = 0; s < a.roadgraph.segments.size(); ++s) {
      REQUIRE(a.roadgraph.segments[s].pts.size() == b.roadgraph.segments[s].pts.size());
      for (std::size_t p = 0; p < a.roadgraph.segments[s].pts.size(); ++p) {
        CHECK(a.roadgraph.segments[s].pts[p].x == b.roadgraph.segments[s].pts[p].x);
        CHECK(a.roadgraph.segments[s].pts[p].y == b.roadgraph.segments[s].pts[p].y);
      }
    }
    REQUIRE(a.expert.states.size() == b.expert.states.size());
    for (std::size_t t = 0; t < a.expert.states.size(); ++t) {
      CHECK(states_identical(a.expert.states[t], b.expert.states[t]));
    }
    REQUIRE(a.expert.actions.size() == b.expert.actions.size());
    for (std::size_t t = 0; t < a.expert.actions.size(); ++t) {
      CHECK(a.expert.actions[t].accel == b.expert.actions[t].accel);
      CHECK(a.expert.actions[t].curvature == b.expert.actions[t].curvature);
    }
    REQUIRE(a.others.size() == b.others.size());
    CHECK(a.goal.x == b.goal.x);
    CHECK(a.goal.y == b.goal.y);
    CHECK(a.goal.heading == b.goal.heading);
  }
  std::remove(path.c_str());
}

TEST_CASE("empty dataset round trips") {
  const std::string path = "dataset_empty.jsonl";
  save_dataset({}, path);
  CHECK(load_dataset(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("unknown dataset version is rejected") {
  const std::string path = "dataset_badversion.jsonl";
  {
    std::ofstream out(path);
    out << "{\"schema\":\"awm-scenarios\",\"version\":99,\"count\":0}\n";
  }
  CHECK_THROWS_AS(load_dataset(path), DatasetError);
  std::remove(path.c_str());
}

TEST_CASE("malformed records report the scenario index") {
  const std::string path = "dataset_malformed.jsonl";
  {
    std::ofstream out(path);
    out << "{\"schema\":\"awm-scenarios\",\"version\":1,\"count\":1}\n";
    out << "{\"seed\":\"zzz\"}\n";
  }
  try {
    load_dataset(path);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.index == 0);
  }
  std::remove(path.c_str());
}

TEST_CASE("kind list parsing") {
  const auto kinds = parse_kind_list("straight,arc,s-curve,stop-go,fork");
  REQUIRE(kinds.size() == 5);
  CHECK(kinds[0] == ScenarioKind::kStraight);
  CHECK(kinds[4] == ScenarioKind::kFork);
  CHECK_THROWS_AS(parse_kind_list("roundabout"), std::invalid_argument);
}
