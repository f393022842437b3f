#include "awm/rollout.hpp"

#include <cmath>
#include <memory>

#include "awm/metrics.hpp"
#include "awm/parallel.hpp"

namespace awm {

RolloutRecord run_rollout(const ModelParams& params, const Scenario& scenario,
                          const RolloutOptions& options, const ActionFn& action_fn) {
  const ModelConfig& cfg = params.config();
  const int expert_steps = static_cast<int>(scenario.expert.states.size()) - 1;
  const int horizon = options.horizon > 0 ? options.horizon : expert_steps;

  Tape tape;
  const BoundParams bound = bind_params(tape, params, [](const std::string&) { return false; });
  const int env_id = tape.register_sim_config(options.env);

  RolloutRecord rec;
  rec.states.reserve(static_cast<std::size_t>(horizon) + 1);
  rec.actions.reserve(static_cast<std::size_t>(horizon));

  VehicleState s = scenario.expert.states.front();
  rec.states.push_back(s);

  const std::vector<double> h0(static_cast<std::size_t>(cfg.hidden), 0.0);
  ValueId hidden = tape.constant(h0);

  for (int t = 0; t < horizon; ++t) {
    const EncodeContext ctx =
        build_encode_context(scenario, t, s, options.route, options.env.dt);
    const int ctx_id = tape.register_encode_context(ctx);
    const StateVec sv = to_vec(s);
    ValueId s_node = tape.constant(sv);
    ValueId features = tape.encode(s_node, ctx_id, cfg.feature_dim);
    ValueId enc = encoder_forward(tape, bound, cfg, features);
    hidden = core_step(tape, bound, cfg, enc, hidden);

    StepContext step_ctx;
    step_ctx.t = t;
    step_ctx.state = s;
    step_ctx.mixture = read_mixture(tape, policy_forward(tape, bound, cfg, hidden), cfg);
    step_ctx.hidden = tape.value(hidden);
    if (options.eval_planner_head) {
      const auto d = tape.value(planner_forward(tape, bound, cfg, hidden));
      for (int i = 0; i < kStateDim; ++i) step_ctx.plan_delta[static_cast<std::size_t>(i)] = d[i];
    }
    if (options.record_hiddens) {
      rec.hiddens.emplace_back(step_ctx.hidden.begin(), step_ctx.hidden.end());
    }

    const Action a = clip_action(action_fn(step_ctx), options.env);
    s = step(s, a, options.env);
    rec.actions.push_back(a);
    rec.states.push_back(s);
    (void)env_id;
  }
  return rec;
}

namespace {

int argmax_component(const MixtureValues& mix) {
  int comp = 0;
  for (int i = 1; i < mix.components; ++i) {
    if (mix.logits[static_cast<std::size_t>(i)] > mix.logits[static_cast<std::size_t>(comp)])
      comp = i;
  }
  return comp;
}

}  // namespace

Action sample_policy_action(const MixtureValues& mix, Rng& rng, double noise_scale,
                            ComponentRule rule) {
  const int comp =
      rule == ComponentRule::kMode ? argmax_component(mix) : sample_component(mix, rng);
  return component_action(mix, comp, rng, noise_scale);
}

ActionFn sampled_policy(std::uint64_t run_seed, int scenario_index, int rollout_index,
                        double noise_scale, ComponentRule rule) {
  auto committed = std::make_shared<int>(-1);
  return [=](const StepContext& ctx) {
    Rng rng(action_stream_seed(run_seed, scenario_index, rollout_index, ctx.t, 0));
    if (rule == ComponentRule::kCommit) {
      if (*committed < 0) *committed = sample_component(ctx.mixture, rng);
      return component_action(ctx.mixture, *committed, rng, noise_scale);
    }
    return sample_policy_action(ctx.mixture, rng, noise_scale, rule);
  };
}

ActionFn oracle_expert_policy(const Scenario& scenario, const SimConfig& env) {
  return [&scenario, env](const StepContext& ctx) {
    const auto& expert = scenario.expert.states;
    const int next = std::min<int>(ctx.t + 1, static_cast<int>(expert.size()) - 1);
    return inv_kin(ctx.state, expert[static_cast<std::size_t>(next)], env);
  };
}

ActionFn planner_policy(const SimConfig& env) {
  return [env](const StepContext& ctx) {
    VehicleState target = ctx.state;
    target.x += ctx.plan_delta[0];
    target.y += ctx.plan_delta[1];
    target.vx += ctx.plan_delta[2];
    target.vy += ctx.plan_delta[3];
    target.yaw += ctx.plan_delta[4];
    return inv_kin(ctx.state, target, env);
  };
}

const char* eval_policy_name(EvalPolicy p) {
  switch (p) {
    case EvalPolicy::kPolicy: return "policy";
    case EvalPolicy::kPlanner: return "planner";
    case EvalPolicy::kOracle: return "oracle";
  }
  return "policy";
}

bool eval_policy_from_name(const std::string& name, EvalPolicy* out) {
  if (name == "policy") { *out = EvalPolicy::kPolicy; return true; }
  if (name == "planner") { *out = EvalPolicy::kPlanner; return true; }
  if (name == "oracle") { *out = EvalPolicy::kOracle; return true; }
  return false;
}

std::vector<EvalRow> evaluate(const ModelParams& params, const std::vector<Scenario>& scenarios,
                              const EvalOptions& options) {
  const int n = static_cast<int>(scenarios.size());
  return parallel_map<EvalRow>(n, options.workers, [&](int i) {
    const Scenario& sc = scenarios[static_cast<std::size_t>(i)];
    RolloutOptions ro;
    ro.env = options.env;
    ro.route = options.route;
    ro.eval_planner_head = options.policy == EvalPolicy::kPlanner;

    // planner and oracle rollouts are deterministic; one realization
    const int rollouts = options.policy == EvalPolicy::kPolicy ? options.rollouts : 1;
    std::vector<std::vector<VehicleState>> trajectories;
    trajectories.reserve(static_cast<std::size_t>(rollouts));
    for (int r = 0; r < rollouts; ++r) {
      ActionFn fn;
      switch (options.policy) {
        case EvalPolicy::kPolicy:
          // a single realization follows the most likely component; each of
          // multiple realizations commits to one sampled mode
          fn = sampled_policy(options.seed, i, r, options.noise_scale,
                              rollouts == 1 ? ComponentRule::kMode : ComponentRule::kCommit);
          break;
        case EvalPolicy::kPlanner:
          fn = planner_policy(options.env);
          break;
        case EvalPolicy::kOracle:
          fn = oracle_expert_policy(sc, options.env);
          break;
      }
      trajectories.push_back(run_rollout(params, sc, ro, fn).states);
    }

    const MinAde best = min_ade(trajectories, sc.expert.states);
    EvalRow row;
    row.scenario = scenario_label(sc);
    row.scenario_index = i;
    row.rollouts = rollouts;
    row.ade = best.value;
    row.best_index = best.index;
    const auto& chosen = trajectories[static_cast<std::size_t>(best.index)];
    row.overlap = overlap_flag(chosen, sc.others, options.ego_radius);
    row.offroad = offroad_flag(chosen, sc.roadgraph);
    return row;
  });
}

double mean_ade(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += r.ade;
  return acc / static_cast<double>(rows.size());
}

double overlap_rate(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += r.overlap ? 1.0 : 0.0;
  return acc / static_cast<double>(rows.size());
}

double offroad_rate(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += r.offroad ? 1.0 : 0.0;
  return acc / static_cast<double>(rows.size());
}

}  // namespace awm
