#include "awm/losses.hpp"

#include <cmath>
#include <limits>

#include "awm/features.hpp"

namespace awm {

const char* odometry_kind_name(OdometryKind k) {
  switch (k) {
    case OdometryKind::kSimLoop: return "sim-loop";
    case OdometryKind::kInverseSim: return "inverse-sim";
    case OdometryKind::kDirect: return "direct";
  }
  return "sim-loop";
}

bool odometry_kind_from_name(const std::string& name, OdometryKind* out) {
  if (name == "sim-loop") { *out = OdometryKind::kSimLoop; return true; }
  if (name == "inverse-sim") { *out = OdometryKind::kInverseSim; return true; }
  if (name == "direct") { *out = OdometryKind::kDirect; return true; }
  return false;
}

ValueId odometry_loss_graph(Tape& tape, ValueId delta, const Transition& tr, int env_cfg_id) {
  const StateVec next = to_vec(tr.s_next);
  const ActionVec a = to_vec(tr.a);
  ValueId rewound = tape.rsub_const(delta, next);  // s_next - d
  ValueId replayed = tape.sim_step(rewound, tape.constant(a), env_cfg_id);
  return tape.sq_dist_const(replayed, next);
}

ValueId odometry_inverse_loss_graph(Tape& tape, ValueId delta, const Transition& tr,
                                    int env_cfg_id) {
  const StateVec cur = to_vec(tr.s);
  const ActionVec a = to_vec(tr.a);
  ValueId estimated_next = tape.add_const(delta, cur);  // absolute next-state estimate
  ValueId rewound = tape.sim_inverse_step(estimated_next, tape.constant(a), env_cfg_id);
  return tape.sq_dist_const(rewound, cur);
}

ValueId odometry_direct_loss_graph(Tape& tape, ValueId delta, const Transition& tr) {
  const StateVec target = {tr.s_next.x - tr.s.x, tr.s_next.y - tr.s.y, tr.s_next.vx - tr.s.vx,
                           tr.s_next.vy - tr.s.vy, tr.s_next.yaw - tr.s.yaw};
  return tape.sq_dist_const(delta, target);
}

ValueId inverse_state_loss_graph(Tape& tape, ValueId delta, const Transition& tr, int env_cfg_id) {
  const StateVec cur = to_vec(tr.s);
  const StateVec expert_next = to_vec(tr.expert_next);
  const ActionVec a = to_vec(tr.a);
  ValueId shifted = tape.add_const(delta, cur);  // counterfactual current state
  ValueId reached = tape.sim_step(shifted, tape.constant(a), env_cfg_id);
  return tape.sq_dist_const(reached, expert_next);
}

std::vector<double> wta_distances(const MixtureValues& mix, const VehicleState& s,
                                  const VehicleState& expert_next, const SimConfig& env) {
  std::vector<double> dists(static_cast<std::size_t>(mix.components));
  for (int i = 0; i < mix.components; ++i) {
    const Action mean = action_from(mix.means.data() + 2 * i);
    const VehicleState reached = step(s, mean, env);
    dists[static_cast<std::size_t>(i)] =
        std::hypot(reached.x - expert_next.x, reached.y - expert_next.y);
  }
  return dists;
}

int wta_winner(const MixtureValues& mix, const VehicleState& s, const VehicleState& expert_next,
               const SimConfig& env) {
  const std::vector<double> dists = wta_distances(mix, s, expert_next, env);
  int winner = 0;
  for (int i = 1; i < mix.components; ++i) {
    if (dists[static_cast<std::size_t>(i)] < dists[static_cast<std::size_t>(winner)]) winner = i;
  }
  return winner;
}

const char* policy_sampling_name(PolicySampling s) {
  switch (s) {
    case PolicySampling::kWinnerTakeAll: return "wta";
    case PolicySampling::kFullMixture: return "mixture";
  }
  return "wta";
}

bool policy_sampling_from_name(const std::string& name, PolicySampling* out) {
  if (name == "wta") { *out = PolicySampling::kWinnerTakeAll; return true; }
  if (name == "mixture") { *out = PolicySampling::kFullMixture; return true; }
  return false;
}

bool trainable_policy_param(const std::string& name) {
  return name.starts_with("enc.") || name.starts_with("gru.") || name.starts_with("policy.");
}

EpisodeResult apg_episode(const ModelParams& params, const Scenario& scenario,
                          const ApgOptions& options) {
  const ModelConfig& cfg = params.config();
  const auto& expert = scenario.expert.states;
  const int steps = static_cast<int>(expert.size()) - 1;

  EpisodeResult result;
  Tape tape;
  const BoundParams bound =
      bind_params(tape, params, options.want_grads
                                    ? TrainablePred(trainable_policy_param)
                                    : TrainablePred([](const std::string&) { return false; }));
  const int env_id = tape.register_sim_config(options.env);

  Rng rng(options.stream_seed);
  const std::vector<double> h0(static_cast<std::size_t>(cfg.hidden), 0.0);
  ValueId hidden = tape.constant(h0);
  ValueId s_node = tape.constant(to_vec(expert.front()));
  ValueId state_sum = kNoValue;
  ValueId nll_sum = kNoValue;
  ValueId ce_sum = kNoValue;

  for (int t = 0; t < steps; ++t) {
    const VehicleState s_val = state_from(tape.value(s_node).data());
    const EncodeContext ctx =
        build_encode_context(scenario, t, s_val, options.route, options.env.dt);
    ValueId features = tape.encode(s_node, tape.register_encode_context(ctx), cfg.feature_dim);
    hidden = core_step(tape, bound, cfg, encoder_forward(tape, bound, cfg, features), hidden);
    const MixtureIds mix_ids = policy_forward(tape, bound, cfg, hidden);
    const MixtureValues mix = read_mixture(tape, mix_ids, cfg);

    const VehicleState& expert_next = expert[static_cast<std::size_t>(t) + 1];
    const std::vector<double> dists = wta_distances(mix, s_val, expert_next, options.env);
    int winner = 0;
    if (options.sampling == PolicySampling::kWinnerTakeAll) {
      for (int i = 1; i < mix.components; ++i) {
        if (dists[static_cast<std::size_t>(i)] < dists[static_cast<std::size_t>(winner)]) winner = i;
      }
    } else {
      winner = sample_component(mix, rng);  // gradients reach the drawn component
    }

    // reparametrized sample from the winning component only
    ValueId mean_w = tape.slice(mix_ids.means, 2 * winner, 2);
    ValueId raw_w = tape.slice(mix_ids.raw_logstd, 2 * winner, 2);
    const std::array<double, 2> offsets = cfg.logstd_offset;
    ValueId logstd_w = tape.add_const(raw_w, offsets);
    ValueId sigma_w = tape.add_const(tape.exp(logstd_w), cfg.sigma_min);
    const std::array<double, 2> eps = {options.noise_scale * rng.normal(),
                                       options.noise_scale * rng.normal()};
    ValueId action = tape.add(mean_w, tape.mul_const(sigma_w, eps));

    ValueId s_next = tape.sim_step(s_node, action, env_id);
    ValueId step_loss = tape.sq_dist_const(s_next, to_vec(expert_next));
    state_sum = state_sum == kNoValue ? step_loss : tape.add(state_sum, step_loss);

    // winning-component likelihood, fully on the tape so the objective stays
    // a pure function of the parameters; the sigma floor keeps it bounded
    const std::array<double, 2> zero2{};
    ValueId log_sigma = tape.log(sigma_w);
    ValueId z = tape.mul(tape.sub(action, mean_w), tape.exp(tape.scale(log_sigma, -1.0)));
    ValueId gauss = tape.add(tape.sum(log_sigma), tape.scale(tape.sq_dist_const(z, zero2), 0.5));
    const double norm_const = std::log(2.0 * 3.141592653589793238462643383279502884);
    ValueId nll = tape.add_const(gauss, std::span<const double>(&norm_const, 1));
    nll_sum = nll_sum == kNoValue ? nll : tape.add(nll_sum, nll);
    // logit ranking loss through detached head activations: soft labels from
    // the per-component outcome distances teach the logits to order the
    // components, without competing for trunk capacity
    std::vector<double> soft(dists.size());
    {
      double mx = -dists[0];
      for (double d : dists) mx = std::max(mx, -d);
      double se = 0.0;
      for (std::size_t i = 0; i < dists.size(); ++i) {
        soft[i] = std::exp((-dists[i] - mx) / options.wta_label_temp);
        se += soft[i];
      }
      for (double& q : soft) q /= se;
    }
    ValueId pre_detached = tape.constant(tape.value(mix_ids.pre_out));
    ValueId out_detached = tape.affine(pre_detached, bound.at("policy.out.w"),
                                       bound.at("policy.out.b"), cfg.policy_out_dim(),
                                       cfg.head_hidden);
    ValueId logits_detached = tape.slice(out_detached, 2 * cfg.mixture_dim(), cfg.mixture);
    ValueId ce = tape.soft_cross_entropy(logits_detached, soft);
    ce_sum = ce_sum == kNoValue ? ce : tape.add(ce_sum, ce);

    if (!std::isfinite(tape.value(s_next)[0]) || !std::isfinite(tape.value(step_loss)[0])) {
      result.finite = false;
      result.bad_step = t;
      return result;
    }
    s_node = s_next;
  }

  const double inv_steps = 1.0 / static_cast<double>(steps);
  ValueId total = tape.add(tape.scale(state_sum, inv_steps),
                           tape.add(tape.scale(nll_sum, options.nll_weight * inv_steps),
                                    tape.scale(ce_sum, options.ce_weight * inv_steps)));
  result.loss = tape.value(total)[0];
  result.state_loss = tape.value(state_sum)[0] * inv_steps;
  if (!std::isfinite(result.loss)) {
    result.finite = false;
    result.bad_step = steps - 1;
    return result;
  }

  if (options.want_grads) {
    const double seed = 1.0;
    tape.backward(total, std::span<const double>(&seed, 1));
    collect_param_grads(tape, bound, params, trainable_policy_param, &result.grads);
  }
  return result;
}

EpisodeResult planner_episode(const ModelParams& params, const Scenario& scenario,
                              const PlannerOptions& options) {
  const ModelConfig& cfg = params.config();
  const auto& expert = scenario.expert.states;
  const int steps = static_cast<int>(expert.size()) - 1;

  const TrainablePred plan_only = [](const std::string& name) {
    return name.starts_with("plan.");
  };

  EpisodeResult result;
  Tape tape;
  const BoundParams bound = bind_params(
      tape, params,
      options.want_grads ? plan_only : TrainablePred([](const std::string&) { return false; }));

  SimConfig rollout_cfg = options.env;
  if (options.training) rollout_cfg.clip_actions = false;
  const int cfg_id = tape.register_sim_config(rollout_cfg);

  const std::vector<double> h0(static_cast<std::size_t>(cfg.hidden), 0.0);
  ValueId hidden = tape.constant(h0);
  ValueId s_node = tape.constant(to_vec(expert.front()));
  ValueId loss_sum = kNoValue;

  for (int t = 0; t < steps; ++t) {
    const VehicleState s_val = state_from(tape.value(s_node).data());
    const EncodeContext ctx =
        build_encode_context(scenario, t, s_val, options.route, options.env.dt);
    ValueId features = tape.encode(s_node, tape.register_encode_context(ctx), cfg.feature_dim);
    hidden = core_step(tape, bound, cfg, encoder_forward(tape, bound, cfg, features), hidden);

    ValueId delta = planner_forward(tape, bound, cfg, hidden);
    ValueId target = tape.add(s_node, delta);
    ValueId action = tape.sim_inv_kin(s_node, target, cfg_id);
    ValueId s_next = tape.sim_step(s_node, action, cfg_id);
    ValueId step_loss =
        tape.sq_dist_const(s_next, to_vec(expert[static_cast<std::size_t>(t) + 1]));
    loss_sum = loss_sum == kNoValue ? step_loss : tape.add(loss_sum, step_loss);

    if (!std::isfinite(tape.value(s_next)[0]) || !std::isfinite(tape.value(step_loss)[0])) {
      result.finite = false;
      result.bad_step = t;
      return result;
    }
    s_node = s_next;
  }

  ValueId total = tape.scale(loss_sum, 1.0 / static_cast<double>(steps));
  result.loss = tape.value(total)[0];
  result.state_loss = result.loss;
  if (!std::isfinite(result.loss)) {
    result.finite = false;
    return result;
  }

  if (options.want_grads) {
    const double seed = 1.0;
    tape.backward(total, std::span<const double>(&seed, 1));
    collect_param_grads(tape, bound, params, plan_only, &result.grads);
  }
  return result;
}

std::vector<Transition> collect_transitions(const ModelParams& params, const Scenario& scenario,
                                            const CollectOptions& options) {
  RolloutOptions ro;
  ro.env = options.env;
  ro.route = options.route;
  ro.record_hiddens = true;
  const RolloutRecord rec =
      run_rollout(params, scenario, ro,
                  sampled_policy(options.run_seed, options.scenario_index, 0,
                                 options.noise_scale));

  std::vector<Transition> out;
  const int steps = static_cast<int>(rec.actions.size());
  out.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.s = rec.states[static_cast<std::size_t>(t)];
    tr.s_next = rec.states[static_cast<std::size_t>(t) + 1];
    tr.expert_next = scenario.expert.states[static_cast<std::size_t>(t) + 1];
    tr.a = rec.actions[static_cast<std::size_t>(t)];
    tr.hidden = rec.hiddens[static_cast<std::size_t>(t)];
    out.push_back(std::move(tr));
  }
  return out;
}

AwmLosses awm_losses(const ModelParams& params, const Scenario& scenario,
                     std::span<const Transition> transitions, const AwmOptions& options) {
  const ModelConfig& cfg = params.config();
  AwmLosses result;

  const bool want_odo = options.w_odo > 0.0 && !transitions.empty();
  const bool want_inv = options.w_inv > 0.0 && !transitions.empty();
  const bool want_plan = options.w_plan > 0.0;

  const TrainablePred trainable = [&](const std::string& name) {
    if (!options.want_grads) return false;
    return (want_odo && name.starts_with("odo.")) || (want_inv && name.starts_with("inv."));
  };

  Tape tape;
  const BoundParams bound = bind_params(tape, params, trainable);
  const int env_id = tape.register_sim_config(options.env);

  ValueId odo_sum = kNoValue;
  ValueId inv_sum = kNoValue;
  for (const Transition& tr : transitions) {
    if (!want_odo && !want_inv) break;
    ValueId hidden = tape.constant(tr.hidden);
    ValueId action = tape.constant(to_vec(tr.a));
    if (want_odo) {
      ValueId d = odometry_forward(tape, bound, cfg, hidden, action);
      ValueId l = kNoValue;
      switch (options.odometry) {
        case OdometryKind::kSimLoop: l = odometry_loss_graph(tape, d, tr, env_id); break;
        case OdometryKind::kInverseSim:
          l = odometry_inverse_loss_graph(tape, d, tr, env_id);
          break;
        case OdometryKind::kDirect: l = odometry_direct_loss_graph(tape, d, tr); break;
      }
      odo_sum = odo_sum == kNoValue ? l : tape.add(odo_sum, l);
    }
    if (want_inv) {
      ValueId d = inverse_forward(tape, bound, cfg, hidden, action);
      ValueId l = inverse_state_loss_graph(tape, d, tr, env_id);
      inv_sum = inv_sum == kNoValue ? l : tape.add(inv_sum, l);
    }
  }

  ValueId total = kNoValue;
  const auto add_weighted = [&](ValueId term, double weight) {
    ValueId scaled = tape.scale(term, weight);
    total = total == kNoValue ? scaled : tape.add(total, scaled);
  };

  const double inv_n =
      transitions.empty() ? 0.0 : 1.0 / static_cast<double>(transitions.size());
  if (odo_sum != kNoValue) {
    result.odo = tape.value(odo_sum)[0] * inv_n;
    add_weighted(odo_sum, options.w_odo * inv_n);
  }
  if (inv_sum != kNoValue) {
    result.inv = tape.value(inv_sum)[0] * inv_n;
    add_weighted(inv_sum, options.w_inv * inv_n);
  }

  if (want_plan) {
    PlannerOptions po;
    po.env = options.env;
    po.route = options.route;
    po.training = true;
    po.want_grads = options.want_grads;
    EpisodeResult plan = planner_episode(params, scenario, po);
    if (!plan.finite) {
      result.finite = false;
      return result;
    }
    result.plan = plan.loss;
    if (options.want_grads) {
      plan.grads.scale_all(options.w_plan);
      result.grads.merge(plan.grads);
    }
  }

  if (total != kNoValue) {
    if (!std::isfinite(tape.value(total)[0])) {
      result.finite = false;
      return result;
    }
    if (options.want_grads) {
      const double seed = 1.0;
      tape.backward(total, std::span<const double>(&seed, 1));
      collect_param_grads(tape, bound, params, trainable, &result.grads);
    }
  }
  return result;
}

}  // namespace awm
