#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "awm/model.hpp"
#include "awm/rollout.hpp"
#include "awm/scenario.hpp"

namespace awm {

enum class RewardKind { kNegDistToLog, kPosDistToLog, kNegInverseNorm };

const char* reward_kind_name(RewardKind k);
bool reward_kind_from_name(const std::string& name, RewardKind* out);

struct MpcConfig {
  int rollouts = 8;  // N
  int top_k = 3;
  int horizon = 10;  // imagined future steps
  RewardKind reward = RewardKind::kNegInverseNorm;
  std::uint64_t seed = 0;
};

struct ImaginedRollout {
  std::vector<VehicleState> states;          // horizon+1, [0] is the start state
  std::vector<Action> actions;               // horizon (clipped)
  std::vector<std::vector<double>> hiddens;  // horizon, hidden that chose actions[tau]
};

using ImagineSampler = std::function<Action(int tau, const MixtureValues& mix)>;
// Test/debug hook replacing the learned odometry with a closed form.
using OdometryOverride =
    std::function<std::array<double, 5>(const VehicleState&, const Action&)>;

struct ImagineOptions {
  int horizon = 10;
  RouteConditioning route = RouteConditioning::kHeading;
  SimConfig env;
  OdometryOverride odometry_override;
};

// Autoregressive imagination with the odometry head: the hidden state given
// here has already consumed the observation at time t0, later steps
// re-encode features from the imagined ego state while replayed agents
// follow their logs. The environment step() is never called.
ImaginedRollout imagine(const ModelParams& params, const Scenario& scenario, int t0,
                        const VehicleState& s0, std::span<const double> hidden,
                        const ImagineSampler& sampler, const ImagineOptions& options);

ImagineSampler policy_imagine_sampler(std::uint64_t run_seed, int scenario_index,
                                      int rollout_index, int t0, double noise_scale = 1.0);
ImagineSampler fixed_action_sampler(std::vector<Action> actions);

double score_rollout(const ModelParams& params, const ImaginedRollout& rollout,
                     const Scenario& scenario, int t0, RewardKind reward);

// Mean of the first actions of the k best-scored rollouts (ties keep the
// lower rollout index first).
Action aggregate_top_k(std::span<const double> scores, std::span<const Action> first_actions,
                       int top_k);

using SamplerFactory = std::function<ImagineSampler(int rollout_index)>;

Action mpc_step_sampled(const ModelParams& params, const Scenario& scenario, int t,
                        const VehicleState& s, std::span<const double> hidden,
                        const MpcConfig& cfg, const ImagineOptions& imagine_opts,
                        const SamplerFactory& samplers);

Action mpc_step(const ModelParams& params, const Scenario& scenario, int scenario_index, int t,
                const VehicleState& s, std::span<const double> hidden, const MpcConfig& cfg,
                const ImagineOptions& imagine_opts);

struct MpcEvalRow {
  std::string scenario;
  int rollouts = 0;
  int top_k = 0;
  int horizon = 0;
  RewardKind reward = RewardKind::kNegInverseNorm;
  double ade = 0.0;
  bool overlap = false;
  bool offroad = false;
};

struct MpcEvalOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  int workers = 1;
  double ego_radius = 1.0;
};

std::vector<MpcEvalRow> mpc_eval(const ModelParams& params,
                                 const std::vector<Scenario>& scenarios, const MpcConfig& cfg,
                                 const MpcEvalOptions& options);

// "N,k,H;N,k,H;..." -> configs (reward/seed untouched)
std::vector<MpcConfig> parse_mpc_grid(const std::string& text, const MpcConfig& base);

// Mean ADE between the odometry head's imagination and the realized
// trajectory under the same in-distribution action sequences.
struct ImaginationAdeOptions {
  int horizon = 10;
  int anchor_stride = 10;
  RouteConditioning route = RouteConditioning::kHeading;
  SimConfig env;
  std::uint64_t seed = 0;
  int workers = 1;
};

double imagination_ade(const ModelParams& params, const std::vector<Scenario>& scenarios,
                       const ImaginationAdeOptions& options);

}  // namespace awm
