#include "awm/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "awm/metrics.hpp"
#include "awm/parallel.hpp"

namespace awm {

const char* reward_kind_name(RewardKind k) {
  switch (k) {
    case RewardKind::kNegDistToLog: return "neg-dist-to-log";
    case RewardKind::kPosDistToLog: return "pos-dist-to-log";
    case RewardKind::kNegInverseNorm: return "neg-inverse-norm";
  }
  return "neg-inverse-norm";
}

bool reward_kind_from_name(const std::string& name, RewardKind* out) {
  if (name == "neg-dist-to-log") { *out = RewardKind::kNegDistToLog; return true; }
  if (name == "pos-dist-to-log") { *out = RewardKind::kPosDistToLog; return true; }
  if (name == "neg-inverse-norm") { *out = RewardKind::kNegInverseNorm; return true; }
  return false;
}

ImaginedRollout imagine(const ModelParams& params, const Scenario& scenario, int t0,
                        const VehicleState& s0, std::span<const double> hidden,
                        const ImagineSampler& sampler, const ImagineOptions& options) {
  const ModelConfig& cfg = params.config();
  ImaginedRollout out;
  out.states.reserve(static_cast<std::size_t>(options.horizon) + 1);
  out.states.push_back(s0);

  Tape tape;
  const BoundParams bound = bind_params(tape, params, [](const std::string&) { return false; });

  ValueId h_node = tape.constant(hidden);
  VehicleState s = s0;

  for (int tau = 0; tau < options.horizon; ++tau) {
    if (tau > 0) {
      // advance the recurrent state on imagined features
      const EncodeContext ctx =
          build_encode_context(scenario, t0 + tau, s, options.route, options.env.dt);
      ValueId s_node = tape.constant(to_vec(s));
      ValueId features =
          tape.encode(s_node, tape.register_encode_context(ctx), cfg.feature_dim);
      h_node = core_step(tape, bound, cfg, encoder_forward(tape, bound, cfg, features), h_node);
    }
    const MixtureValues mix = read_mixture(tape, policy_forward(tape, bound, cfg, h_node), cfg);
    const Action a = clip_action(sampler(tau, mix), options.env);

    const auto h_val = tape.value(h_node);
    out.hiddens.emplace_back(h_val.begin(), h_val.end());
    out.actions.push_back(a);

    std::array<double, 5> delta;
    if (options.odometry_override) {
      delta = options.odometry_override(s, a);
    } else {
      ValueId d = odometry_forward(tape, bound, cfg, h_node, tape.constant(to_vec(a)));
      const auto dv = tape.value(d);
      delta = {dv[0], dv[1], dv[2], dv[3], dv[4]};
    }
    s.x += delta[0];
    s.y += delta[1];
    s.vx += delta[2];
    s.vy += delta[3];
    s.yaw += delta[4];
    out.states.push_back(s);
  }
  return out;
}

ImagineSampler policy_imagine_sampler(std::uint64_t run_seed, int scenario_index,
                                      int rollout_index, int t0, double noise_scale) {
  return [=](int tau, const MixtureValues& mix) {
    Rng rng(action_stream_seed(run_seed, scenario_index, rollout_index, t0, tau));
    // imagination commits to the most likely component; candidate diversity
    // comes from the Gaussian noise, matching single-rollout evaluation
    return sample_policy_action(mix, rng, noise_scale, ComponentRule::kMode);
  };
}

ImagineSampler fixed_action_sampler(std::vector<Action> actions) {
  return [actions = std::move(actions)](int tau, const MixtureValues&) {
    return actions[static_cast<std::size_t>(tau)];
  };
}

double score_rollout(const ModelParams& params, const ImaginedRollout& rollout,
                     const Scenario& scenario, int t0, RewardKind reward) {
  const auto& expert = scenario.expert.states;
  const int last = static_cast<int>(expert.size()) - 1;
  switch (reward) {
    case RewardKind::kNegDistToLog:
    case RewardKind::kPosDistToLog: {
      double acc = 0.0;
      for (int tau = 1; tau < static_cast<int>(rollout.states.size()); ++tau) {
        const VehicleState& s = rollout.states[static_cast<std::size_t>(tau)];
        const VehicleState& e = expert[static_cast<std::size_t>(std::min(t0 + tau, last))];
        acc += std::hypot(s.x - e.x, s.y - e.y);
      }
      return reward == RewardKind::kNegDistToLog ? -acc : acc;
    }
    case RewardKind::kNegInverseNorm: {
      double acc = 0.0;
      for (std::size_t tau = 0; tau < rollout.actions.size(); ++tau) {
        const auto d =
            eval_inverse_head(params, rollout.hiddens[tau], rollout.actions[tau]);
        double norm2 = 0.0;
        for (double v : d) norm2 += v * v;
        acc += std::sqrt(norm2);
      }
      return -acc;
    }
  }
  return 0.0;
}

Action aggregate_top_k(std::span<const double> scores, std::span<const Action> first_actions,
                       int top_k) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  const int k = std::min(top_k, n);
  Action mean{0.0, 0.0};
  for (int i = 0; i < k; ++i) {
    const Action& a = first_actions[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    mean.accel += a.accel;
    mean.curvature += a.curvature;
  }
  mean.accel /= k;
  mean.curvature /= k;
  return mean;
}

Action mpc_step_sampled(const ModelParams& params, const Scenario& scenario, int t,
                        const VehicleState& s, std::span<const double> hidden,
                        const MpcConfig& cfg, const ImagineOptions& imagine_opts,
                        const SamplerFactory& samplers) {
  std::vector<double> scores(static_cast<std::size_t>(cfg.rollouts));
  std::vector<Action> first(static_cast<std::size_t>(cfg.rollouts));
  ImagineOptions io = imagine_opts;
  io.horizon = cfg.horizon;
  for (int i = 0; i < cfg.rollouts; ++i) {
    const ImaginedRollout rollout = imagine(params, scenario, t, s, hidden, samplers(i), io);
    scores[static_cast<std::size_t>(i)] = score_rollout(params, rollout, scenario, t, cfg.reward);
    first[static_cast<std::size_t>(i)] = rollout.actions.front();
  }
  return clip_action(aggregate_top_k(scores, first, cfg.top_k), imagine_opts.env);
}

Action mpc_step(const ModelParams& params, const Scenario& scenario, int scenario_index, int t,
                const VehicleState& s, std::span<const double> hidden, const MpcConfig& cfg,
                const ImagineOptions& imagine_opts) {
  return mpc_step_sampled(params, scenario, t, s, hidden, cfg, imagine_opts, [&](int i) {
    return policy_imagine_sampler(cfg.seed, scenario_index, i, t);
  });
}

std::vector<MpcEvalRow> mpc_eval(const ModelParams& params,
                                 const std::vector<Scenario>& scenarios, const MpcConfig& cfg,
                                 const MpcEvalOptions& options) {
  const int n = static_cast<int>(scenarios.size());
  return parallel_map<MpcEvalRow>(n, options.workers, [&](int i) {
    const Scenario& sc = scenarios[static_cast<std::size_t>(i)];
    RolloutOptions ro;
    ro.env = options.env;
    ro.route = options.route;
    ImagineOptions io;
    io.route = options.route;
    io.env = options.env;
    const RolloutRecord rec =
        run_rollout(params, sc, ro, [&](const StepContext& ctx) {
          return mpc_step(params, sc, i, ctx.t, ctx.state, ctx.hidden, cfg, io);
        });
    const TrajectoryEval ev = evaluate_trajectory(rec.states, sc, options.ego_radius);
    MpcEvalRow row;
    row.scenario = scenario_label(sc);
    row.rollouts = cfg.rollouts;
    row.top_k = cfg.top_k;
    row.horizon = cfg.horizon;
    row.reward = cfg.reward;
    row.ade = ev.ade;
    row.overlap = ev.overlap;
    row.offroad = ev.offroad;
    return row;
  });
}

std::vector<MpcConfig> parse_mpc_grid(const std::string& text, const MpcConfig& base) {
  std::vector<MpcConfig> out;
  std::stringstream cells(text);
  std::string cell;
  while (std::getline(cells, cell, ';')) {
    if (cell.empty()) continue;
    MpcConfig cfg = base;
    int n = 0, k = 0, h = 0;
    char c1 = 0, c2 = 0;
    std::stringstream ss(cell);
    if (!(ss >> n >> c1 >> k >> c2 >> h) || c1 != ',' || c2 != ',' || n < 1 || k < 1 || k > n ||
        h < 1) {
      throw std::invalid_argument("bad MPC grid cell '" + cell + "' (want N,k,H with 1<=k<=N)");
    }
    cfg.rollouts = n;
    cfg.top_k = k;
    cfg.horizon = h;
    out.push_back(cfg);
  }
  if (out.empty()) throw std::invalid_argument("empty MPC grid");
  return out;
}

double imagination_ade(const ModelParams& params, const std::vector<Scenario>& scenarios,
                       const ImaginationAdeOptions& options) {
  const int n = static_cast<int>(scenarios.size());
  const auto per_scenario = parallel_map<std::pair<double, int>>(n, options.workers, [&](int i) {
    const Scenario& sc = scenarios[static_cast<std::size_t>(i)];
    RolloutOptions ro;
    ro.env = options.env;
    ro.route = options.route;
    ro.record_hiddens = true;
    const RolloutRecord rec =
        run_rollout(params, sc, ro, sampled_policy(options.seed, i, 0, 1.0));

    ImagineOptions io;
    io.horizon = options.horizon;
    io.route = options.route;
    io.env = options.env;

    double acc = 0.0;
    int anchors = 0;
    const int steps = static_cast<int>(rec.actions.size());
    for (int t0 = 0; t0 + options.horizon <= steps; t0 += options.anchor_stride) {
      std::vector<Action> acts(rec.actions.begin() + t0,
                               rec.actions.begin() + t0 + options.horizon);
      const ImaginedRollout imag =
          imagine(params, sc, t0, rec.states[static_cast<std::size_t>(t0)],
                  rec.hiddens[static_cast<std::size_t>(t0)],
                  fixed_action_sampler(std::move(acts)), io);
      double dist = 0.0;
      for (int tau = 1; tau <= options.horizon; ++tau) {
        const VehicleState& a = imag.states[static_cast<std::size_t>(tau)];
        const VehicleState& b = rec.states[static_cast<std::size_t>(t0 + tau)];
        dist += std::hypot(a.x - b.x, a.y - b.y);
      }
      acc += dist / options.horizon;
      ++anchors;
    }
    return std::make_pair(acc, anchors);
  });

  double total = 0.0;
  int count = 0;
  for (const auto& [acc, anchors] : per_scenario) {
    total += acc;
    count += anchors;
  }
  return count > 0 ? total / count : 0.0;
}

}  // namespace awm
