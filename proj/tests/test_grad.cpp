#include <cmath>
#include <functional>
#include <stdexcept>

#include "awm/dynamics.hpp"
#include "awm/gradcheck.hpp"
#include "awm/rng.hpp"
#include "awm/tape.hpp"
#include "doctest.h"

using namespace awm;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// single-leaf program: the builder consumes one input node
using Builder = std::function<ValueId(Tape&, ValueId)>;

ForwardFn forward_of(const Builder& build) {
  return [build](std::span<const double> x) {
    Tape tape;
    ValueId in = tape.leaf(x);
    return to_vector(tape.value(build(tape, in)));
  };
}

VjpFn vjp_of(const Builder& build) {
  return [build](std::span<const double> x, std::span<const double> u) {
    Tape tape;
    ValueId in = tape.leaf(x);
    ValueId out = build(tape, in);
    tape.backward(out, u);
    return to_vector(tape.grad(in));
  };
}

void check_primitive(const Builder& build, std::span<const double> point, double tol = 1e-5) {
  const auto report = gradcheck(forward_of(build), vjp_of(build), point, 1e-6, tol);
  CAPTURE(report.max_rel_err);
  CHECK(report.pass);
}

std::vector<double> random_vector(Rng& rng, int n, double lo = -1.5, double hi = 1.5) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("one-node tape backward equals the dynamics VJP exactly") {
  SimConfig cfg;
  cfg.clip_actions = false;
  const VehicleState s{1.0, -2.0, 3.0 * std::cos(0.4), 3.0 * std::sin(0.4), 0.4};
  const Action a{1.5, 0.2};

  Tape tape;
  const int cfg_id = tape.register_sim_config(cfg);
  ValueId s_id = tape.leaf(to_vec(s));
  ValueId a_id = tape.leaf(to_vec(a));
  ValueId out = tape.sim_step(s_id, a_id, cfg_id);

  StateVec upstream{0.3, -1.1, 0.7, 0.2, 2.0};
  tape.backward(out, upstream);

  const StepVjp direct = step_vjp(s, a, cfg, upstream);
  const auto gs = tape.grad(s_id);
  const auto ga = tape.grad(a_id);
  for (int i = 0; i < kStateDim; ++i) CHECK(gs[static_cast<std::size_t>(i)] == direct.ds[static_cast<std::size_t>(i)]);
  for (int i = 0; i < kActionDim; ++i) CHECK(ga[static_cast<std::size_t>(i)] == direct.da[static_cast<std::size_t>(i)]);
}

TEST_CASE("10-step rollout: gradient of final x wrt initial x is one") {
  SimConfig cfg;
  cfg.clip_actions = false;
  Tape tape;
  const int cfg_id = tape.register_sim_config(cfg);
  const VehicleState s0{0, 0, 2.0, 0, 0};
  ValueId s_id = tape.leaf(to_vec(s0));
  ValueId a_id = tape.constant(to_vec(Action{0.5, 0.05}));
  ValueId cur = s_id;
  for (int t = 0; t < 10; ++t) cur = tape.sim_step(cur, a_id, cfg_id);
  ValueId x_final = tape.slice(cur, 0, 1);
  const double one = 1.0;
  tape.backward(x_final, std::span<const double>(&one, 1));
  CHECK(tape.grad(s_id)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward is linear in the seed") {
  Rng rng(5);
  const auto x = random_vector(rng, 4);
  Tape tape;
  ValueId in = tape.leaf(x);
  ValueId out = tape.tanh(tape.mul(in, in));

  const std::vector<double> seed = random_vector(rng, 4);
  std::vector<double> scaled = seed;
  for (double& v : scaled) v *= 3.5;

  tape.backward(out, seed);
  const std::vector<double> g1 = to_vector(tape.grad(in));
  tape.zero_grads();
  tape.backward(out, scaled);
  const std::vector<double> g2 = to_vector(tape.grad(in));
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g2[i] == doctest::Approx(3.5 * g1[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
  Rng rng(6);
  const auto x = random_vector(rng, 5);
  const auto target1 = random_vector(rng, 5);
  const auto target2 = random_vector(rng, 5);

  const double one = 1.0;
  Tape tape;
  ValueId in = tape.leaf(x);
  ValueId l1 = tape.sq_dist_const(tape.tanh(in), target1);
  ValueId l2 = tape.sq_dist_const(tape.sigmoid(in), target2);
  ValueId sum = tape.add(l1, l2);
  tape.backward(sum, std::span<const double>(&one, 1));
  const auto g_sum = to_vector(tape.grad(in));

  tape.zero_grads();
  tape.backward(l1, std::span<const double>(&one, 1));
  const auto g1 = to_vector(tape.grad(in));
  tape.zero_grads();
  tape.backward(l2, std::span<const double>(&one, 1));
  const auto g2 = to_vector(tape.grad(in));

  for (std::size_t i = 0; i < g_sum.size(); ++i) {
    CHECK(g_sum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("repeated backward calls accumulate additively") {
  Rng rng(7);
  const auto x = random_vector(rng, 3);
  Tape tape;
  ValueId in = tape.leaf(x);
  ValueId out = tape.exp(in);
  const std::vector<double> seed = {1.0, 2.0, 3.0};
  tape.backward(out, seed);
  const auto once = to_vector(tape.grad(in));
  tape.backward(out, seed);
  const auto twice = to_vector(tape.grad(in));
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
  }
}

TEST_CASE("elementwise and affine primitives match finite differences") {
  Rng rng(42);

  SUBCASE("tanh") { check_primitive([](Tape& t, ValueId x) { return t.tanh(x); }, random_vector(rng, 6)); }
  SUBCASE("sigmoid") { check_primitive([](Tape& t, ValueId x) { return t.sigmoid(x); }, random_vector(rng, 6)); }
  SUBCASE("exp") { check_primitive([](Tape& t, ValueId x) { return t.exp(x); }, random_vector(rng, 6)); }
  SUBCASE("scale") { check_primitive([](Tape& t, ValueId x) { return t.scale(x, -2.5); }, random_vector(rng, 6)); }

  SUBCASE("add/sub/mul via slices of one input") {
    const auto builder = [](Tape& t, ValueId x) {
      ValueId a = t.slice(x, 0, 3);
      ValueId b = t.slice(x, 3, 3);
      return t.mul(t.add(a, b), t.sub(a, b));
    };
    check_primitive(builder, random_vector(rng, 6));
  }

  SUBCASE("const variants and concat") {
    const std::vector<double> c = {0.5, -1.0, 2.0};
    const auto builder = [c](Tape& t, ValueId x) {
      ValueId a = t.slice(x, 0, 3);
      ValueId b = t.slice(x, 3, 3);
      return t.concat(t.add_const(a, c), t.mul_const(t.rsub_const(b, c), c));
    };
    check_primitive(builder, random_vector(rng, 6));
  }

  SUBCASE("affine") {
    // input packs x (3), W (2x3), b (2)
    const auto builder = [](Tape& t, ValueId in) {
      ValueId x = t.slice(in, 0, 3);
      ValueId w = t.slice(in, 3, 6);
      ValueId b = t.slice(in, 9, 2);
      return t.affine(x, w, b, 2, 3);
    };
    check_primitive(builder, random_vector(rng, 11));
  }

  SUBCASE("sq_dist_const") {
    const std::vector<double> target = {1.0, -2.0, 0.25};
    check_primitive([target](Tape& t, ValueId x) { return t.sq_dist_const(x, target); },
                    random_vector(rng, 3));
  }

  SUBCASE("sum") {
    check_primitive([](Tape& t, ValueId x) { return t.sum(x); }, random_vector(rng, 6));
  }
  SUBCASE("log") {
    check_primitive([](Tape& t, ValueId x) { return t.log(x); }, random_vector(rng, 6, 0.2, 3.0));
  }

  SUBCASE("cross_entropy_pick") {
    check_primitive([](Tape& t, ValueId x) { return t.cross_entropy_pick(x, 2); },
                    random_vector(rng, 6));
  }
}

TEST_CASE("dynamics primitives on the tape match finite differences") {
  Rng rng(314);
  SimConfig cfg;
  cfg.clip_actions = false;

  const double yaw = rng.uniform(-2.0, 2.0);
  const double v = rng.uniform(1.0, 8.0);
  std::vector<double> point = {rng.uniform(-5, 5), rng.uniform(-5, 5), v * std::cos(yaw),
                               v * std::sin(yaw), yaw, rng.uniform(-3, 3), rng.uniform(-0.2, 0.2)};

  SUBCASE("sim_step") {
    const auto builder = [cfg](Tape& t, ValueId in) {
      const int id = t.register_sim_config(cfg);
      return t.sim_step(t.slice(in, 0, 5), t.slice(in, 5, 2), id);
    };
    check_primitive(builder, point);
  }
  SUBCASE("sim_inverse_step") {
    const auto builder = [cfg](Tape& t, ValueId in) {
      const int id = t.register_sim_config(cfg);
      return t.sim_inverse_step(t.slice(in, 0, 5), t.slice(in, 5, 2), id);
    };
    check_primitive(builder, point);
  }
  SUBCASE("sim_inv_kin") {
    // state and a reachable, distinct target
    const VehicleState s = state_from(point.data());
    const VehicleState target = step(s, {1.2, 0.1}, cfg);
    const StateVec sv_tmp = to_vec(s);
    std::vector<double> both(sv_tmp.begin(), sv_tmp.end());
    const StateVec tv = to_vec(target);
    both.insert(both.end(), tv.begin(), tv.end());
    const auto builder = [cfg](Tape& t, ValueId in) {
      const int id = t.register_sim_config(cfg);
      return t.sim_inv_kin(t.slice(in, 0, 5), t.slice(in, 5, 5), id);
    };
    check_primitive(builder, both);
  }
}

TEST_CASE("gradcheck: constant map passes") {
  const std::vector<double> point = {1.0, 2.0};
  const auto report = gradcheck(
      [](std::span<const double>) { return std::vector<double>{3.14}; },
      [](std::span<const double>, std::span<const double>) {
        return std::vector<double>{0.0, 0.0};
      },
      point, 1e-6, 1e-9);
  CHECK(report.pass);
  CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("gradcheck: saturated clip is flagged as boundary and excluded") {
  const std::vector<double> point = {2.0};  // saturated for clip to [-1, 1]
  const auto clip_fwd = [](std::span<const double> x) {
    return std::vector<double>{std::clamp(x[0], -1.0, 1.0)};
  };
  const auto clip_vjp = [](std::span<const double> x, std::span<const double> u) {
    const double slope = std::abs(x[0]) > 1.0 ? 0.0 : 1.0;
    return std::vector<double>{slope * u[0]};
  };
  const auto report = gradcheck(clip_fwd, clip_vjp, point, 1e-6, 1e-9,
                                [](int) { return true; });
  CHECK(report.pass);
  CHECK(report.excluded == 1);
  CHECK(report.checked == 0);
}

TEST_CASE("gradcheck: non-finite evaluation is reported as failure") {
  const std::vector<double> point = {0.0};
  const auto report = gradcheck(
      [](std::span<const double> x) {
        return std::vector<double>{1.0 / x[0]};
      },
      [](std::span<const double>, std::span<const double>) {
        return std::vector<double>{0.0};
      },
      point, 1e-6, 1e-5);
  CHECK(!report.pass);
}

TEST_CASE("tape shape contracts are enforced") {
  Tape tape;
  ValueId a = tape.leaf(std::vector<double>{1.0, 2.0});
  ValueId b = tape.leaf(std::vector<double>{1.0, 2.0, 3.0});
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  ValueId out = tape.add(a, a);
  const std::vector<double> bad_seed = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(tape.backward(out, bad_seed), std::invalid_argument);
}
