#include <cmath>
#include <cstdio>
#include <fstream>

#include "awm/features.hpp"
#include "awm/gradcheck.hpp"
#include "awm/model.hpp"
#include "awm/rng.hpp"
#include "doctest.h"

using namespace awm;

namespace {

Scenario tiny_scene() {
  Scenario sc;
  sc.roadgraph.half_width = 3.0;
  Polyline seg;
  seg.pts = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  sc.roadgraph.segments.push_back(seg);
  sc.expert.states.push_back({0, 0, 1, 0, 0});
  sc.goal = {10.0, 0.0, 0.0};
  return sc;
}

VehicleState rotate_state(const VehicleState& s, double ang) {
  const double c = std::cos(ang), sn = std::sin(ang);
  VehicleState out;
  out.x = c * s.x - sn * s.y;
  out.y = sn * s.x + c * s.y;
  out.vx = c * s.vx - sn * s.vy;
  out.vy = sn * s.vx + c * s.vy;
  out.yaw = s.yaw + ang;
  return out;
}

Scenario rotate_scene(const Scenario& sc, double ang) {
  const double c = std::cos(ang), sn = std::sin(ang);
  Scenario out = sc;
  for (auto& seg : out.roadgraph.segments) {
    for (auto& p : seg.pts) p = {c * p.x - sn * p.y, sn * p.x + c * p.y};
  }
  for (auto& agent : out.others) {
    for (auto& pose : agent.poses) {
      const double x = c * pose.x - sn * pose.y;
      const double y = sn * pose.x + c * pose.y;
      pose = {x, y, pose.yaw + ang};
    }
  }
  out.goal = {c * sc.goal.x - sn * sc.goal.y, sn * sc.goal.x + c * sc.goal.y,
              sc.goal.heading + ang};
  for (auto& s : out.expert.states) s = rotate_state(s, ang);
  return out;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.enc_hidden = 8;
  cfg.enc_out = 6;
  cfg.hidden = 8;
  cfg.head_hidden = 6;
  cfg.mixture = 3;
  return cfg;
}

ModelParams random_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = ModelParams::init(cfg, seed);
  Rng rng(seed + 99);
  for (auto& [name, t] : const_cast<std::map<std::string, Tensor>&>(p.tensors())) {
    (void)name;
    for (double& v : t.data) v = rng.uniform(-0.7, 0.7);
  }
  return p;
}

}  // namespace

TEST_CASE("encode: ego at origin facing +x sees a road point at (1,0) unchanged") {
  const Scenario sc = tiny_scene();
  const VehicleState ego{0, 0, 1, 0, 0};
  const EncodeContext ctx = build_encode_context(sc, 0, ego, RouteConditioning::kNone, 0.1);
  const FeatureVector f = compute_features(ctx, ego);
  CHECK(f.values[0] == doctest::Approx(1.0));  // speed
  CHECK(f.values[2] == doctest::Approx(1.0));  // nearest point, ego frame x
  CHECK(f.values[3] == doctest::Approx(0.0));
  CHECK(f.road_mask[0] == 1);
  CHECK(f.road_mask[2] == 1);
  CHECK(f.road_mask[3] == 0);  // only 3 points available, padded beyond
  CHECK(f.values[2 + 2 * 3] == 0.0);
}

TEST_CASE("encode: features are invariant under a global rotation of the scene") {
  Scenario sc = tiny_scene();
  OtherAgent agent;
  agent.radius = 1.0;
  agent.poses = {{4.0, 1.0, 0.3}, {4.5, 1.0, 0.3}};
  sc.others.push_back(agent);
  const VehicleState ego{0.5, -0.25, 2.0 * std::cos(0.2), 2.0 * std::sin(0.2), 0.2};

  const double ang = 1.5707963267948966;  // 90 degrees
  const Scenario rotated = rotate_scene(sc, ang);
  const VehicleState ego_rot = rotate_state(ego, ang);

  for (const auto mode :
       {RouteConditioning::kNone, RouteConditioning::kHeading, RouteConditioning::kWaypoint}) {
    const FeatureVector a =
        compute_features(build_encode_context(sc, 0, ego, mode, 0.1), ego);
    const FeatureVector b =
        compute_features(build_encode_context(rotated, 0, ego_rot, mode, 0.1), ego_rot);
    for (int i = 0; i < kFeatureDim; ++i) {
      CAPTURE(i);
      CHECK(a.values[static_cast<std::size_t>(i)] ==
            doctest::Approx(b.values[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("encode: empty agent list pads with zeros and a zero mask") {
  const Scenario sc = tiny_scene();
  const VehicleState ego{0, 0, 1, 0, 0};
  const FeatureVector f =
      compute_features(build_encode_context(sc, 0, ego, RouteConditioning::kNone, 0.1), ego);
  for (int m = 0; m < kAgentSlots; ++m) {
    CHECK(f.agent_mask[static_cast<std::size_t>(m)] == 0);
    for (int j = 0; j < 4; ++j) {
      CHECK(f.values[static_cast<std::size_t>(2 + 2 * kRoadPoints + 4 * m + j)] == 0.0);
    }
  }
}

TEST_CASE("encode VJP matches finite differences in every conditioning mode") {
  Scenario sc = tiny_scene();
  OtherAgent agent;
  agent.poses = {{4.0, 1.0, 0.3}, {4.4, 1.2, 0.3}};
  sc.others.push_back(agent);

  Rng rng(321);
  for (const auto mode :
       {RouteConditioning::kNone, RouteConditioning::kHeading, RouteConditioning::kWaypoint}) {
    const double yaw = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(0.5, 3.0);
    const VehicleState ego{rng.uniform(-1, 1), rng.uniform(-1, 1), v * std::cos(yaw),
                           v * std::sin(yaw), yaw};
    // selection frozen at the base point, as in the tape op
    const EncodeContext ctx = build_encode_context(sc, 0, ego, mode, 0.1);

    const StateVec base = to_vec(ego);
    const std::vector<double> point(base.begin(), base.end());
    const auto report = gradcheck(
        [&](std::span<const double> p) {
          const FeatureVector f = compute_features(ctx, state_from(p.data()));
          return std::vector<double>(f.values.begin(), f.values.end());
        },
        [&](std::span<const double> p, std::span<const double> u) {
          const StateVec g = features_vjp(ctx, state_from(p.data()), u);
          return std::vector<double>(g.begin(), g.end());
        },
        point, 1e-6, 1e-5);
    CAPTURE(static_cast<int>(mode));
    CAPTURE(report.max_rel_err);
    CHECK(report.pass);
  }
}

TEST_CASE("core_step: zero parameters and zero hidden give zero output") {
  const ModelConfig cfg = small_config();
  ModelParams params = ModelParams::init(cfg, 1);
  for (auto& [name, t] : const_cast<std::map<std::string, Tensor>&>(params.tensors())) {
    (void)name;
    for (double& v : t.data) v = 0.0;
  }
  Tape tape;
  const BoundParams bound = bind_params(tape, params);
  const std::vector<double> x(static_cast<std::size_t>(cfg.enc_out), 0.3);
  const std::vector<double> h(static_cast<std::size_t>(cfg.hidden), 0.0);
  ValueId out = core_step(tape, bound, cfg, tape.constant(x), tape.constant(h));
  for (double v : tape.value(out)) CHECK(v == 0.0);
}

TEST_CASE("core_step: with zero weights the update is set by the gate biases") {
  const ModelConfig cfg = small_config();
  ModelParams params = ModelParams::init(cfg, 1);
  for (auto& [name, t] : const_cast<std::map<std::string, Tensor>&>(params.tensors())) {
    (void)name;
    for (double& v : t.data) v = 0.0;
  }
  params.tensor("gru.z.b").data.assign(static_cast<std::size_t>(cfg.hidden), 2.0);
  params.tensor("gru.h.b").data.assign(static_cast<std::size_t>(cfg.hidden), 0.5);

  Tape tape;
  const BoundParams bound = bind_params(tape, params);
  const std::vector<double> x(static_cast<std::size_t>(cfg.enc_out), 0.0);
  const std::vector<double> h(static_cast<std::size_t>(cfg.hidden), 0.0);
  ValueId out = core_step(tape, bound, cfg, tape.constant(x), tape.constant(h));
  const double sigma = 1.0 / (1.0 + std::exp(-2.0));
  const double expected = sigma * std::tanh(0.5);
  for (double v : tape.value(out)) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("core_step is deterministic") {
  const ModelConfig cfg = small_config();
  const ModelParams params = random_params(cfg, 7);
  Rng rng(3);
  std::vector<double> x(static_cast<std::size_t>(cfg.enc_out));
  std::vector<double> h(static_cast<std::size_t>(cfg.hidden));
  for (double& v : x) v = rng.uniform(-1, 1);
  for (double& v : h) v = rng.uniform(-1, 1);

  const auto run = [&] {
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    ValueId out = core_step(tape, bound, cfg, tape.constant(x), tape.constant(h));
    const auto v = tape.value(out);
    return std::vector<double>(v.begin(), v.end());
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("core_step gradient wrt inputs passes gradcheck") {
  const ModelConfig cfg = small_config();
  const ModelParams params = random_params(cfg, 11);
  Rng rng(13);
  std::vector<double> point(static_cast<std::size_t>(cfg.enc_out + cfg.hidden));
  for (double& v : point) v = rng.uniform(-1, 1);

  const auto build = [&](Tape& tape, ValueId in) {
    const BoundParams bound = bind_params(tape, params);
    ValueId x = tape.slice(in, 0, cfg.enc_out);
    ValueId h = tape.slice(in, cfg.enc_out, cfg.hidden);
    return core_step(tape, bound, cfg, x, h);
  };
  const auto report = gradcheck(
      [&](std::span<const double> p) {
        Tape tape;
        ValueId in = tape.leaf(p);
        const auto v = tape.value(build(tape, in));
        return std::vector<double>(v.begin(), v.end());
      },
      [&](std::span<const double> p, std::span<const double> u) {
        Tape tape;
        ValueId in = tape.leaf(p);
        ValueId out = build(tape, in);
        tape.backward(out, u);
        const auto g = tape.grad(in);
        return std::vector<double>(g.begin(), g.end());
      },
      point, 1e-6, 1e-5);
  CHECK(report.pass);
}

TEST_CASE("heads: zero-initialized final layers produce null predictions") {
  const ModelConfig cfg = small_config();
  const ModelParams params = ModelParams::init(cfg, 5);  // random trunk, zero .out layers
  Tape tape;
  const BoundParams bound = bind_params(tape, params);
  Rng rng(2);
  std::vector<double> h(static_cast<std::size_t>(cfg.hidden));
  for (double& v : h) v = rng.uniform(-1, 1);
  ValueId hid = tape.constant(h);
  ValueId act = tape.constant(std::vector<double>{0.5, -0.1});

  for (double v : tape.value(odometry_forward(tape, bound, cfg, hid, act))) CHECK(v == 0.0);
  for (double v : tape.value(planner_forward(tape, bound, cfg, hid))) CHECK(v == 0.0);
  for (double v : tape.value(inverse_forward(tape, bound, cfg, hid, act))) CHECK(v == 0.0);

  const MixtureValues mix = read_mixture(tape, policy_forward(tape, bound, cfg, hid), cfg);
  for (double m : mix.means) CHECK(m == 0.0);
  for (double l : mix.logits) CHECK(l == 0.0);
  CHECK(mix.stds[0] == doctest::Approx(cfg.sigma_min[0] + std::exp(cfg.logstd_offset[0])));
  CHECK(mix.stds[1] == doctest::Approx(cfg.sigma_min[1] + std::exp(cfg.logstd_offset[1])));
}

TEST_CASE("policy stddevs are strictly positive for any finite parameters") {
  const ModelConfig cfg = small_config();
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const ModelParams params = random_params(cfg, seed);
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    std::vector<double> h(static_cast<std::size_t>(cfg.hidden), 0.37);
    const MixtureValues mix =
        read_mixture(tape, policy_forward(tape, bound, cfg, tape.constant(h)), cfg);
    for (double s : mix.stds) CHECK(s > 0.0);
  }
}

TEST_CASE("each head passes gradcheck wrt its inputs at 10 random points") {
  const ModelConfig cfg = small_config();
  const ModelParams params = random_params(cfg, 17);
  Rng rng(19);

  const auto check_head = [&](const char* head) {
    const bool with_action = std::string(head) == "odo" || std::string(head) == "inv";
    const int in_dim = cfg.hidden + (with_action ? kActionDim : 0);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> point(static_cast<std::size_t>(in_dim));
      for (double& v : point) v = rng.uniform(-1, 1);
      const auto build = [&](Tape& tape, ValueId in) -> ValueId {
        const BoundParams bound = bind_params(tape, params);
        if (std::string(head) == "odo") {
          return odometry_forward(tape, bound, cfg, tape.slice(in, 0, cfg.hidden),
                                  tape.slice(in, cfg.hidden, kActionDim));
        }
        if (std::string(head) == "inv") {
          return inverse_forward(tape, bound, cfg, tape.slice(in, 0, cfg.hidden),
                                 tape.slice(in, cfg.hidden, kActionDim));
        }
        if (std::string(head) == "plan") {
          return planner_forward(tape, bound, cfg, in);
        }
        const MixtureIds mix = policy_forward(tape, bound, cfg, in);
        return tape.concat(tape.concat(mix.means, mix.raw_logstd), mix.logits);
      };
      const auto report = gradcheck(
          [&](std::span<const double> p) {
            Tape tape;
            ValueId in = tape.leaf(p);
            const auto v = tape.value(build(tape, in));
            return std::vector<double>(v.begin(), v.end());
          },
          [&](std::span<const double> p, std::span<const double> u) {
            Tape tape;
            ValueId in = tape.leaf(p);
            ValueId out = build(tape, in);
            tape.backward(out, u);
            const auto g = tape.grad(in);
            return std::vector<double>(g.begin(), g.end());
          },
          point, 1e-6, 1e-5);
      CAPTURE(head);
      CHECK(report.pass);
    }
  };
  check_head("odo");
  check_head("plan");
  check_head("inv");
  check_head("policy");
}

TEST_CASE("checkpoint round trip is bit exact") {
  const ModelConfig cfg = small_config();
  const ModelParams params = random_params(cfg, 23);
  const std::string path = "ckpt_roundtrip.awmc";
  save_checkpoint(params, path);
  const ModelParams loaded = load_checkpoint(path);

  CHECK(loaded.config().hidden == cfg.hidden);
  CHECK(loaded.config().mixture == cfg.mixture);
  for (const auto& [name, t] : params.tensors()) {
    const Tensor& lt = loaded.tensor(name);
    REQUIRE(lt.dims == t.dims);
    for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(lt.data[i] == t.data[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint load errors are distinct") {
  const ModelConfig cfg = small_config();
  const ModelParams params = random_params(cfg, 29);
  const std::string path = "ckpt_errors.awmc";
  save_checkpoint(params, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  const auto write_bytes = [&](const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  SUBCASE("corrupted magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_bytes(bad);
    try {
      load_checkpoint(path);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kBadMagic);
    }
  }

  SUBCASE("version mismatch") {
    std::string bad = bytes;
    bad[4] = 9;
    write_bytes(bad);
    try {
      load_checkpoint(path);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kVersion);
    }
  }

  SUBCASE("truncated file") {
    write_bytes(bytes.substr(0, bytes.size() - 9));
    try {
      load_checkpoint(path);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kTruncated);
    }
  }

  SUBCASE("shape mismatch names the tensor") {
    // patch the first dim of enc.l1.w (rank field follows the name)
    std::string bad = bytes;
    const std::size_t at = bad.find("enc.l1.w");
    REQUIRE(at != std::string::npos);
    const std::size_t dim_pos = at + std::string("enc.l1.w").size() + 4;
    bad[dim_pos] = static_cast<char>(bad[dim_pos] + 1);
    write_bytes(bad);
    try {
      load_checkpoint(path);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kShapeMismatch);
      CHECK(std::string(e.what()).find("enc.l1.w") != std::string::npos);
    }
  }

  std::remove(path.c_str());
}
