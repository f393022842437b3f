#include <cmath>
#include <limits>
#include <stdexcept>

#include "awm/dynamics.hpp"
#include "awm/gradcheck.hpp"
#include "awm/rng.hpp"
#include "doctest.h"

using namespace awm;

namespace {

SimConfig unclipped() {
  SimConfig cfg;
  cfg.clip_actions = false;
  return cfg;
}

VehicleState random_consistent_state(Rng& rng) {
  VehicleState s;
  s.x = rng.uniform(-100.0, 100.0);
  s.y = rng.uniform(-100.0, 100.0);
  s.yaw = rng.uniform(-8.0, 8.0);  // unwrapped yaws allowed
  const double v = rng.uniform(-15.0, 15.0);
  s.vx = v * std::cos(s.yaw);
  s.vy = v * std::sin(s.yaw);
  return s;
}

Action random_action(Rng& rng) {
  return {rng.uniform(-6.0, 6.0), rng.uniform(-0.3, 0.3)};
}

double max_field_delta(const VehicleState& a, const VehicleState& b) {
  double m = std::abs(a.x - b.x);
  m = std::max(m, std::abs(a.y - b.y));
  m = std::max(m, std::abs(a.vx - b.vx));
  m = std::max(m, std::abs(a.vy - b.vy));
  m = std::max(m, std::abs(a.yaw - b.yaw));
  return m;
}

// forward map over the stacked [state, action] vector, for gradcheck
std::vector<double> step_forward(std::span<const double> x, const SimConfig& cfg, bool inverse) {
  const VehicleState s = state_from(x.data());
  const Action a = action_from(x.data() + kStateDim);
  const VehicleState out = inverse ? inverse_step(s, a, cfg) : step(s, a, cfg);
  const StateVec v = to_vec(out);
  return {v.begin(), v.end()};
}

std::vector<double> step_vjp_stacked(std::span<const double> x, std::span<const double> u,
                                     const SimConfig& cfg, bool inverse) {
  const VehicleState s = state_from(x.data());
  const Action a = action_from(x.data() + kStateDim);
  StateVec up;
  for (int i = 0; i < kStateDim; ++i) up[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)];
  const StepVjp vjp = inverse ? inverse_step_vjp(s, a, cfg, up) : step_vjp(s, a, cfg, up);
  std::vector<double> g(vjp.ds.begin(), vjp.ds.end());
  g.insert(g.end(), vjp.da.begin(), vjp.da.end());
  return g;
}

}  // namespace

TEST_CASE("step: straight constant-speed motion") {
  const SimConfig cfg = unclipped();
  const VehicleState out = step({0, 0, 1, 0, 0}, {0, 0}, cfg);
  CHECK(out.x == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(out.y == 0.0);
  CHECK(out.vx == 1.0);
  CHECK(out.vy == 0.0);
  CHECK(out.yaw == 0.0);
}

TEST_CASE("step: accelerating curved motion matches the update equations") {
  const SimConfig cfg = unclipped();
  const VehicleState s{0, 0, 1, 0, 0};
  const Action a{2.0, 0.5};
  const VehicleState out = step(s, a, cfg);

  // independent hand evaluation of the update equations
  const double v = 1.0;
  const double v2 = v + 2.0 * 0.1;
  const double arc = v * 0.1 + 0.5 * 2.0 * 0.1 * 0.1;
  const double yaw2 = 0.5 * arc;
  CHECK(arc == doctest::Approx(0.11).epsilon(1e-15));
  CHECK(yaw2 == doctest::Approx(0.055).epsilon(1e-15));
  CHECK(v2 == doctest::Approx(1.2).epsilon(1e-15));

  CHECK(out.x == doctest::Approx(0.11).epsilon(1e-14));
  CHECK(out.y == doctest::Approx(0.0));
  CHECK(out.yaw == doctest::Approx(0.055).epsilon(1e-14));
  CHECK(out.vx == doctest::Approx(1.2 * std::cos(0.055)).epsilon(1e-14));
  CHECK(out.vy == doctest::Approx(1.2 * std::sin(0.055)).epsilon(1e-14));
}

TEST_CASE("step: zero speed and zero accel leave the state unchanged") {
  const SimConfig cfg = unclipped();
  const VehicleState out = step({0, 0, 0, 0, 0}, {0, 0.3}, cfg);
  CHECK(out.x == 0.0);
  CHECK(out.y == 0.0);
  CHECK(out.vx == 0.0);
  CHECK(out.vy == 0.0);
  CHECK(out.yaw == 0.0);
}

TEST_CASE("step output is always consistent") {
  Rng rng(11);
  SimConfig cfg = unclipped();
  for (int i = 0; i < 500; ++i) {
    const VehicleState out = step(random_consistent_state(rng), random_action(rng), cfg);
    CHECK(is_consistent(out));
  }
}

TEST_CASE("step is deterministic bit for bit") {
  Rng rng(12);
  const SimConfig cfg = unclipped();
  const VehicleState s = random_consistent_state(rng);
  const Action a = random_action(rng);
  const VehicleState o1 = step(s, a, cfg);
  const VehicleState o2 = step(s, a, cfg);
  CHECK(o1.x == o2.x);
  CHECK(o1.y == o2.y);
  CHECK(o1.vx == o2.vx);
  CHECK(o1.vy == o2.vy);
  CHECK(o1.yaw == o2.yaw);
}

TEST_CASE("non-finite inputs are rejected") {
  const SimConfig cfg = unclipped();
  VehicleState s{0, 0, 1, 0, 0};
  s.x = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step(s, {0, 0}, cfg), std::domain_error);
  CHECK_THROWS_AS(inverse_step(s, {0, 0}, cfg), std::domain_error);
  CHECK_THROWS_AS(inv_kin(s, {0, 0, 1, 0, 0}, cfg), std::domain_error);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(step({0, 0, 1, 0, 0}, {inf, 0}, cfg), std::domain_error);
}

TEST_CASE("inverse_step inverts straight motion") {
  const SimConfig cfg = unclipped();
  const VehicleState s = inverse_step({0.1, 0, 1, 0, 0}, {0, 0}, cfg);
  CHECK(s.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.y == 0.0);
  CHECK(s.vx == 1.0);
  CHECK(s.yaw == 0.0);
}

TEST_CASE("inverse_step round trip on a curved accelerating step") {
  const SimConfig cfg = unclipped();
  const VehicleState s{0, 0, 1, 0, 0};
  const Action a{2.0, 0.5};
  const VehicleState back = inverse_step(step(s, a, cfg), a, cfg);
  CHECK(max_field_delta(back, s) < 1e-9);
}

TEST_CASE("round trip A: inverse_step(step(s,a),a) = s over 1000 random pairs") {
  Rng rng(1234);
  const SimConfig cfg = unclipped();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const VehicleState s = random_consistent_state(rng);
    const Action a = random_action(rng);
    const VehicleState back = inverse_step(step(s, a, cfg), a, cfg);
    worst = std::max(worst, max_field_delta(back, s));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inv_kin recovers the action for a feasible target") {
  const SimConfig cfg = unclipped();
  const VehicleState s{0, 0, 1, 0, 0};
  const Action a{2.0, 0.5};
  const Action r = inv_kin(s, step(s, a, cfg), cfg);
  CHECK(std::abs(r.accel - a.accel) < 1e-9);
  CHECK(std::abs(r.curvature - a.curvature) < 1e-9);
}

TEST_CASE("inv_kin of the current state is the zero action") {
  const SimConfig cfg = unclipped();
  const VehicleState s{3.0, -2.0, 1.0, 0.0, 0.0};
  const Action a = inv_kin(s, s, cfg);
  CHECK(a.accel == 0.0);
  CHECK(a.curvature == 0.0);
}

TEST_CASE("round trip B: inv_kin(s, step(s,a)) = a over 1000 random feasible pairs") {
  Rng rng(77);
  const SimConfig cfg = unclipped();
  double worst = 0.0;
  int tried = 0;
  while (tried < 1000) {
    const VehicleState s = random_consistent_state(rng);
    const Action a = random_action(rng);
    const double v = signed_speed(s);
    const double arc = v * cfg.dt + 0.5 * a.accel * cfg.dt * cfg.dt;
    if (std::abs(arc) <= 1e-3) continue;
    ++tried;
    const Action r = inv_kin(s, step(s, a, cfg), cfg);
    worst = std::max(worst, std::abs(r.accel - a.accel));
    worst = std::max(worst, std::abs(r.curvature - a.curvature));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inv_kin zero-arc guard yields zero curvature") {
  const SimConfig cfg = unclipped();
  // zero speed, zero target speed: arc is exactly zero
  const VehicleState s{0, 0, 0, 0, 0.2};
  VehicleState target = s;
  target.yaw = 1.4;  // unreachable yaw from a zero-length arc
  const Action a = inv_kin(s, target, cfg);
  CHECK(a.curvature == 0.0);
}

TEST_CASE("step_vjp: translation invariance of the position update") {
  const SimConfig cfg = unclipped();
  const StateVec ex{1, 0, 0, 0, 0};
  const StepVjp vjp = step_vjp({0, 0, 1, 0, 0}, {0, 0}, cfg, ex);
  CHECK(vjp.ds[0] == 1.0);
  CHECK(vjp.ds[1] == 0.0);
}

TEST_CASE("step_vjp: saturated clip zeroes the action gradient") {
  SimConfig cfg;
  cfg.clip_actions = true;
  const StateVec ones{1, 1, 1, 1, 1};
  const StepVjp vjp = step_vjp({0, 0, 1, 0, 0}, {cfg.max_accel * 2, 0}, cfg, ones);
  CHECK(vjp.da[0] == 0.0);
  CHECK(vjp.da[1] != 0.0);
}

TEST_CASE("step_vjp and inverse_step_vjp match finite differences at 10 random points") {
  Rng rng(2024);
  const SimConfig cfg = unclipped();
  for (const bool inverse : {false, true}) {
    for (int i = 0; i < 10; ++i) {
      const VehicleState s = random_consistent_state(rng);
      const Action a = random_action(rng);
      const StateVec sv_tmp = to_vec(s);
      std::vector<double> x(sv_tmp.begin(), sv_tmp.end());
      x.push_back(a.accel);
      x.push_back(a.curvature);
      const auto report = gradcheck(
          [&](std::span<const double> p) { return step_forward(p, cfg, inverse); },
          [&](std::span<const double> p, std::span<const double> u) {
            return step_vjp_stacked(p, u, cfg, inverse);
          },
          x, 1e-6, 1e-5);
      CAPTURE(inverse);
      CAPTURE(i);
      CHECK(report.pass);
      CHECK(report.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("composite derivative of inverse_step(step(s,a),a) is the identity on consistent states") {
  // The round trip is the identity on the consistent-state manifold. The
  // dynamics read velocity only through its heading projection, so the
  // composite R^5 Jacobian is the projector onto that manifold: identity
  // along consistency-preserving directions and idempotent overall.
  Rng rng(5150);
  const SimConfig cfg = unclipped();
  const VehicleState s = random_consistent_state(rng);
  const Action a = random_action(rng);
  const VehicleState mid = step(s, a, cfg);

  // rows of each Jacobian via unit upstream seeds
  double j_step[5][5], j_inv[5][5];
  for (int r = 0; r < 5; ++r) {
    StateVec seed{};
    seed[static_cast<std::size_t>(r)] = 1.0;
    const StepVjp f = step_vjp(s, a, cfg, seed);
    const StepVjp b = inverse_step_vjp(mid, a, cfg, seed);
    for (int c = 0; c < 5; ++c) {
      j_step[r][c] = f.ds[static_cast<std::size_t>(c)];
      j_inv[r][c] = b.ds[static_cast<std::size_t>(c)];
    }
  }
  double composite[5][5];
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += j_inv[r][k] * j_step[k][c];
      composite[r][c] = acc;
    }
  }

  // tangent basis of the manifold: x, y, speed, yaw directions
  const double cy = std::cos(s.yaw);
  const double sy = std::sin(s.yaw);
  const double v = signed_speed(s);
  const double tangents[4][5] = {
      {1, 0, 0, 0, 0},
      {0, 1, 0, 0, 0},
      {0, 0, cy, sy, 0},
      {0, 0, -v * sy, v * cy, 1},
  };
  for (const auto& t : tangents) {
    for (int r = 0; r < 5; ++r) {
      double acc = 0.0;
      for (int c = 0; c < 5; ++c) acc += composite[r][c] * t[c];
      CHECK(acc == doctest::Approx(t[r]).epsilon(1e-6).scale(1.0));
    }
  }

  // idempotence: applying the round-trip derivative twice changes nothing
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += composite[r][k] * composite[k][c];
      CHECK(acc == doctest::Approx(composite[r][c]).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("inv_kin_vjp matches finite differences at 100 random feasible points") {
  Rng rng(90210);
  const SimConfig cfg = unclipped();
  int tried = 0;
  while (tried < 100) {
    const VehicleState s = random_consistent_state(rng);
    const VehicleState t = random_consistent_state(rng);
    const double v = signed_speed(s);
    const double vt = t.vx * std::cos(t.yaw) + t.vy * std::sin(t.yaw);
    const double accel = (vt - v) / cfg.dt;
    const double arc = v * cfg.dt + 0.5 * accel * cfg.dt * cfg.dt;
    if (std::abs(arc) <= 1e-3) continue;
    ++tried;

    const StateVec sv_tmp = to_vec(s);
      std::vector<double> x(sv_tmp.begin(), sv_tmp.end());
    const StateVec tv = to_vec(t);
    x.insert(x.end(), tv.begin(), tv.end());
    const auto report = gradcheck(
        [&](std::span<const double> p) {
          const Action out =
              inv_kin(state_from(p.data()), state_from(p.data() + kStateDim), cfg);
          return std::vector<double>{out.accel, out.curvature};
        },
        [&](std::span<const double> p, std::span<const double> u) {
          const InvKinVjp vjp = inv_kin_vjp(state_from(p.data()),
                                            state_from(p.data() + kStateDim), cfg,
                                            {u[0], u[1]});
          std::vector<double> g(vjp.ds.begin(), vjp.ds.end());
          g.insert(g.end(), vjp.dtarget.begin(), vjp.dtarget.end());
          return g;
        },
        x, 1e-6, 1e-5);
    CHECK(report.pass);
  }
}

TEST_CASE("inv_kin_vjp: curvature gradient is exactly zero on the zero-arc branch") {
  const SimConfig cfg = unclipped();
  // target speed = -current speed makes arc = dt*(v + vt)/2 = 0
  const VehicleState s{0, 0, 2, 0, 0};
  const VehicleState t{1, 1, -2, 0, 0};
  const InvKinVjp vjp = inv_kin_vjp(s, t, cfg, {0.0, 1.0});
  for (int i = 0; i < 5; ++i) {
    CHECK(vjp.ds[static_cast<std::size_t>(i)] == 0.0);
    CHECK(vjp.dtarget[static_cast<std::size_t>(i)] == 0.0);
  }
}
