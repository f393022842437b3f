#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "awm/model.hpp"
#include "awm/scenario.hpp"

namespace awm {

// What an action source sees at each closed-loop step. `hidden` is the
// recurrent state after consuming the observation at time t; actions are
// conditioned on it.
struct StepContext {
  int t = 0;
  VehicleState state;
  MixtureValues mixture;
  std::span<const double> hidden;
  std::array<double, 5> plan_delta{};  // filled when eval_planner_head is set
};

using ActionFn = std::function<Action(const StepContext&)>;

struct RolloutOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  bool eval_planner_head = false;
  bool record_hiddens = false;
  int horizon = -1;  // action steps; default: expert length - 1
};

struct RolloutRecord {
  std::vector<VehicleState> states;             // length horizon+1
  std::vector<Action> actions;                  // executed (clipped), length horizon
  std::vector<std::vector<double>> hiddens;     // per action step, when recorded
};

// Closed-loop episode from the expert's start state; forward passes only.
RolloutRecord run_rollout(const ModelParams& params, const Scenario& scenario,
                          const RolloutOptions& options, const ActionFn& action_fn);

// How the component is chosen when acting: kSample redraws it from the
// logits at every step (data collection); kMode follows the most likely
// component per step (single-rollout conditioned evaluation, imagination);
// kCommit draws one component at the first step and keeps it for the whole
// rollout, so each realization is one mode of the mixture (multi-rollout
// minADE evaluation).
enum class ComponentRule { kSample, kMode, kCommit };

// One seeded draw from the mixture under the given component rule.
Action sample_policy_action(const MixtureValues& mix, Rng& rng, double noise_scale,
                            ComponentRule rule = ComponentRule::kSample);

// Stream seed layout shared by reactive evaluation and MPC imagination so
// a degenerate MPC (N=1, k=1, H=1) replays reactive evaluation exactly.
inline std::uint64_t action_stream_seed(std::uint64_t run_seed, int scenario_index,
                                        int rollout_index, int step, int depth) {
  return derive_seed({run_seed, 0x5a3f11u, static_cast<std::uint64_t>(scenario_index),
                      static_cast<std::uint64_t>(rollout_index), static_cast<std::uint64_t>(step),
                      static_cast<std::uint64_t>(depth)});
}

ActionFn sampled_policy(std::uint64_t run_seed, int scenario_index, int rollout_index,
                        double noise_scale, ComponentRule rule = ComponentRule::kSample);
// Replays the expert through inverse kinematics (a debugging oracle).
ActionFn oracle_expert_policy(const Scenario& scenario, const SimConfig& env);
// Deterministic planner head + inverse kinematics (clipping on).
ActionFn planner_policy(const SimConfig& env);

enum class EvalPolicy { kPolicy, kPlanner, kOracle };

const char* eval_policy_name(EvalPolicy p);
bool eval_policy_from_name(const std::string& name, EvalPolicy* out);

struct EvalOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  EvalPolicy policy = EvalPolicy::kPolicy;
  int rollouts = 1;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;
  double ego_radius = 1.0;
};

struct EvalRow {
  std::string scenario;
  int scenario_index = 0;
  int rollouts = 1;
  double ade = 0.0;  // min over rollouts
  int best_index = 0;
  bool overlap = false;  // of the min-ADE rollout
  bool offroad = false;
};

std::vector<EvalRow> evaluate(const ModelParams& params, const std::vector<Scenario>& scenarios,
                              const EvalOptions& options);

double mean_ade(const std::vector<EvalRow>& rows);
double overlap_rate(const std::vector<EvalRow>& rows);
double offroad_rate(const std::vector<EvalRow>& rows);

}  // namespace awm
