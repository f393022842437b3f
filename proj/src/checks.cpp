#include "awm/checks.hpp"

#include <cmath>
#include <cstring>

#include "awm/gradcheck.hpp"
#include "awm/losses.hpp"
#include "awm/model.hpp"
#include "awm/rng.hpp"
#include "awm/scenario.hpp"

namespace awm {

namespace {

VehicleState random_consistent_state(Rng& rng) {
  VehicleState s;
  s.x = rng.uniform(-50.0, 50.0);
  s.y = rng.uniform(-50.0, 50.0);
  s.yaw = rng.uniform(-3.0, 3.0);
  const double v = rng.uniform(0.5, 12.0);
  s.vx = v * std::cos(s.yaw);
  s.vy = v * std::sin(s.yaw);
  return s;
}

// in-bounds action with a comfortable margin to the clip boundary
Action random_action(Rng& rng) {
  return {rng.uniform(-5.0, 5.0), rng.uniform(-0.25, 0.25)};
}

ModelConfig check_config() {
  ModelConfig cfg;
  cfg.enc_hidden = 8;
  cfg.enc_out = 6;
  cfg.hidden = 8;
  cfg.head_hidden = 6;
  cfg.mixture = 2;
  return cfg;
}

ModelParams random_model(std::uint64_t seed) {
  const ModelConfig cfg = check_config();
  ModelParams p = ModelParams::init(cfg, seed);
  Rng rng(derive_seed({seed, 0x90d31u}));
  for (auto& [name, t] : const_cast<std::map<std::string, Tensor>&>(p.tensors())) {
    (void)name;
    for (double& v : t.data) v = rng.uniform(-0.3, 0.3);
  }
  return p;
}

std::vector<double> flatten(const ModelParams& p, const TrainablePred& pred) {
  std::vector<double> out;
  for (const auto& [name, t] : p.tensors()) {
    if (pred && !pred(name)) continue;
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  return out;
}

void unflatten(ModelParams* p, const TrainablePred& pred, std::span<const double> flat) {
  std::size_t at = 0;
  for (auto& [name, t] : const_cast<std::map<std::string, Tensor>&>(p->tensors())) {
    if (pred && !pred(name)) continue;
    std::memcpy(t.data.data(), flat.data() + at, t.data.size() * sizeof(double));
    at += t.data.size();
  }
}

std::vector<double> flatten_grads(const ModelParams& p, const TrainablePred& pred,
                                  const GradientAccumulator& grads) {
  std::vector<double> out;
  for (const auto& [name, t] : p.tensors()) {
    if (pred && !pred(name)) continue;
    const std::vector<double>* g = grads.find(name);
    if (g) {
      out.insert(out.end(), g->begin(), g->end());
    } else {
      out.insert(out.end(), t.data.size(), 0.0);
    }
  }
  return out;
}

}  // namespace

CheckSuiteResult run_gradcheck_suite(std::uint64_t seed, double primitive_tol,
                                     double episode_tol, int points) {
  CheckSuiteResult suite;
  SimConfig cfg;
  cfg.clip_actions = false;

  const auto add_item = [&suite](CheckItem item) {
    suite.pass &= item.pass;
    suite.items.push_back(std::move(item));
  };

  // --- dynamics primitives ---
  {
    struct Primitive {
      const char* name;
      bool inverse;
    };
    for (const Primitive prim : {Primitive{"step_vjp", false}, Primitive{"inverse_step_vjp", true}}) {
      CheckItem item;
      item.name = prim.name;
      item.pass = true;
      Rng rng(derive_seed({seed, 0x1u, static_cast<std::uint64_t>(prim.inverse)}));
      for (int i = 0; i < points; ++i) {
        const VehicleState s = random_consistent_state(rng);
        const Action a = random_action(rng);
        const StateVec sv = to_vec(s);
        std::vector<double> x(sv.begin(), sv.end());
        x.push_back(a.accel);
        x.push_back(a.curvature);
        const auto report = gradcheck(
            [&](std::span<const double> p) {
              const VehicleState ss = state_from(p.data());
              const Action aa = action_from(p.data() + kStateDim);
              const VehicleState out = prim.inverse ? inverse_step(ss, aa, cfg) : step(ss, aa, cfg);
              const StateVec v = to_vec(out);
              return std::vector<double>(v.begin(), v.end());
            },
            [&](std::span<const double> p, std::span<const double> u) {
              const VehicleState ss = state_from(p.data());
              const Action aa = action_from(p.data() + kStateDim);
              StateVec up;
              std::memcpy(up.data(), u.data(), sizeof(up));
              const StepVjp vjp =
                  prim.inverse ? inverse_step_vjp(ss, aa, cfg, up) : step_vjp(ss, aa, cfg, up);
              std::vector<double> g(vjp.ds.begin(), vjp.ds.end());
              g.insert(g.end(), vjp.da.begin(), vjp.da.end());
              return g;
            },
            x, 1e-6, primitive_tol);
        item.pass &= report.pass;
        item.max_rel_err = std::max(item.max_rel_err, report.max_rel_err);
        ++item.points;
      }
      add_item(item);
    }
  }
  {
    CheckItem item;
    item.name = "inv_kin_vjp";
    item.pass = true;
    Rng rng(derive_seed({seed, 0x2u}));
    while (item.points < points) {
      const VehicleState s = random_consistent_state(rng);
      const Action a = random_action(rng);
      const double v = signed_speed(s);
      const double arc = v * cfg.dt + 0.5 * a.accel * cfg.dt * cfg.dt;
      if (std::abs(arc) <= 1e-3) continue;
      const VehicleState target = step(s, a, cfg);
      const StateVec sv = to_vec(s);
      const StateVec tv = to_vec(target);
      std::vector<double> x(sv.begin(), sv.end());
      x.insert(x.end(), tv.begin(), tv.end());
      const auto report = gradcheck(
          [&](std::span<const double> p) {
            const Action out = inv_kin(state_from(p.data()), state_from(p.data() + kStateDim), cfg);
            return std::vector<double>{out.accel, out.curvature};
          },
          [&](std::span<const double> p, std::span<const double> u) {
            const InvKinVjp vjp = inv_kin_vjp(state_from(p.data()),
                                              state_from(p.data() + kStateDim), cfg, {u[0], u[1]});
            std::vector<double> g(vjp.ds.begin(), vjp.ds.end());
            g.insert(g.end(), vjp.dtarget.begin(), vjp.dtarget.end());
            return g;
          },
          x, 1e-6, primitive_tol);
      item.pass &= report.pass;
      item.max_rel_err = std::max(item.max_rel_err, report.max_rel_err);
      ++item.points;
    }
    add_item(item);
  }

  // --- feature encoder ---
  {
    CheckItem item;
    item.name = "encode_vjp";
    item.pass = true;
    Rng rng(derive_seed({seed, 0x3u}));
    const Scenario sc = generate_scenario(ScenarioKind::kArc, seed);
    for (int i = 0; i < points; ++i) {
      const int t = rng.uniform_int(static_cast<int>(sc.expert.states.size()));
      VehicleState ego = sc.expert.states[static_cast<std::size_t>(t)];
      ego.x += rng.uniform(-0.5, 0.5);
      ego.y += rng.uniform(-0.5, 0.5);
      const auto mode = static_cast<RouteConditioning>(i % 3);
      const EncodeContext ctx = build_encode_context(sc, t, ego, mode, 0.1);
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
          point, 1e-6, primitive_tol);
      item.pass &= report.pass;
      item.max_rel_err = std::max(item.max_rel_err, report.max_rel_err);
      ++item.points;
    }
    add_item(item);
  }

  // --- episode losses: directional derivative checks over the parameters ---
  GeneratorParams gp;
  gp.horizon = 4;

  const auto episode_check = [&](const char* name, const TrainablePred& pred,
                                 const std::function<double(const ModelParams&)>& loss,
                                 const std::function<GradientAccumulator(const ModelParams&)>&
                                     grad) {
    CheckItem item;
    item.name = name;
    item.pass = true;
    for (int i = 0; i < points; ++i) {
      const ModelParams base = random_model(derive_seed({seed, 0x10u, static_cast<std::uint64_t>(i)}));
      const std::vector<double> point = flatten(base, pred);
      const auto report = gradcheck_directional(
          [&](std::span<const double> flat) {
            ModelParams p = base;
            unflatten(&p, pred, flat);
            return loss(p);
          },
          [&](std::span<const double> flat) {
            ModelParams p = base;
            unflatten(&p, pred, flat);
            return flatten_grads(p, pred, grad(p));
          },
          point, 1e-6, episode_tol, 4, derive_seed({seed, 0x11u, static_cast<std::uint64_t>(i)}));
      item.pass &= report.pass;
      item.max_rel_err = std::max(item.max_rel_err, report.max_rel_err);
      ++item.points;
    }
    add_item(item);
  };

  {
    const Scenario sc = generate_scenario(ScenarioKind::kArc, seed + 1, gp);
    ApgOptions ao;
    ao.stream_seed = derive_seed({seed, 0xabcu});
    // the winner cross-entropy trains through detached activations (a stop
    // gradient), which no finite-difference probe can represent; check the
    // differentiable objective
    ao.ce_weight = 0.0;
    episode_check(
        "apg_episode_grad", trainable_policy_param,
        [&](const ModelParams& p) {
          ApgOptions probe = ao;
          probe.want_grads = false;
          return apg_episode(p, sc, probe).loss;
        },
        [&](const ModelParams& p) { return apg_episode(p, sc, ao).grads; });
  }
  {
    const Scenario sc = generate_scenario(ScenarioKind::kSCurve, seed + 2, gp);
    PlannerOptions po;
    po.training = true;
    const TrainablePred pred = [](const std::string& n) { return n.starts_with("plan."); };
    episode_check(
        "planner_episode_grad", pred,
        [&](const ModelParams& p) {
          PlannerOptions probe = po;
          probe.want_grads = false;
          return planner_episode(p, sc, probe).loss;
        },
        [&](const ModelParams& p) { return planner_episode(p, sc, po).grads; });
  }
  {
    const Scenario sc = generate_scenario(ScenarioKind::kStraight, seed + 3, gp);
    SimConfig env;
    Rng rng(derive_seed({seed, 0x20u}));
    std::vector<Transition> transitions;
    const ModelConfig mc = check_config();
    for (int i = 0; i < 5; ++i) {
      Transition tr;
      const VehicleState s = random_consistent_state(rng);
      tr.s = s;
      tr.a = random_action(rng);
      tr.s_next = step(tr.s, tr.a, env);
      VehicleState drift = s;
      drift.x += rng.uniform(-0.3, 0.3);
      drift.y += rng.uniform(-0.3, 0.3);
      tr.expert_next = step(drift, tr.a, env);
      tr.hidden.assign(static_cast<std::size_t>(mc.hidden), 0.0);
      for (double& h : tr.hidden) h = rng.uniform(-1, 1);
      transitions.push_back(std::move(tr));
    }
    for (const OdometryKind kind :
         {OdometryKind::kSimLoop, OdometryKind::kInverseSim, OdometryKind::kDirect}) {
      AwmOptions ao;
      ao.odometry = kind;
      ao.w_plan = 0.0;
      const TrainablePred pred = [](const std::string& n) {
        return n.starts_with("odo.") || n.starts_with("inv.");
      };
      episode_check(
          (std::string("awm_losses_grad[") + odometry_kind_name(kind) + "]").c_str(), pred,
          [&](const ModelParams& p) {
            AwmOptions probe = ao;
            probe.want_grads = false;
            const AwmLosses al = awm_losses(p, sc, transitions, probe);
            return al.odo * ao.w_odo + al.inv * ao.w_inv;
          },
          [&](const ModelParams& p) { return awm_losses(p, sc, transitions, ao).grads; });
    }
  }

  return suite;
}

}  // namespace awm
