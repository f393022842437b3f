#pragma once

#include <span>
#include <vector>

#include "awm/model.hpp"
#include "awm/rollout.hpp"
#include "awm/scenario.hpp"
#include "awm/tape.hpp"

namespace awm {

// How the odometry head is supervised.
//   kSimLoop:    ||step(s' - d, a) - s'||^2        (simulator in the loop)
//   kInverseSim: ||inverse_step(s + d, a) - s||^2  (inverse simulator form)
//   kDirect:     ||d - (s' - s)||^2                (plain regression ablation)
enum class OdometryKind { kSimLoop, kInverseSim, kDirect };

const char* odometry_kind_name(OdometryKind k);
bool odometry_kind_from_name(const std::string& name, OdometryKind* out);

// One step of policy-collected experience plus the matching expert state.
struct Transition {
  VehicleState s;
  VehicleState s_next;
  VehicleState expert_next;
  Action a;                    // executed (clipped)
  std::vector<double> hidden;  // recurrent features that produced `a`
};

// Loss graph builders. `delta` is any 5-vector node (a head output in
// training; an injected constant in tests).
ValueId odometry_loss_graph(Tape& tape, ValueId delta, const Transition& tr, int env_cfg_id);
ValueId odometry_inverse_loss_graph(Tape& tape, ValueId delta, const Transition& tr,
                                    int env_cfg_id);
ValueId odometry_direct_loss_graph(Tape& tape, ValueId delta, const Transition& tr);
ValueId inverse_state_loss_graph(Tape& tape, ValueId delta, const Transition& tr, int env_cfg_id);

// Distance (in x, y) between each component mean's one-step outcome and the
// next expert state.
std::vector<double> wta_distances(const MixtureValues& mix, const VehicleState& s,
                                  const VehicleState& expert_next, const SimConfig& env);
// Winner-take-all: the component whose mean action lands closest. Ties break
// to the lowest index.
int wta_winner(const MixtureValues& mix, const VehicleState& s, const VehicleState& expert_next,
               const SimConfig& env);

bool trainable_policy_param(const std::string& name);  // encoder + core + policy head

struct EpisodeResult {
  double loss = 0.0;        // optimized objective (per-step mean)
  double state_loss = 0.0;  // per-step mean ||s - expert||^2 part
  bool finite = true;
  int bad_step = -1;  // first non-finite step, if any
  GradientAccumulator grads;
};

// Training-time action source. Winner-take-all specializes components and
// preserves multimodality (fork suites); full-mixture sampling lets the
// components coalesce, which keeps conditioned single-rollout evaluation
// faithful to training.
enum class PolicySampling { kWinnerTakeAll, kFullMixture };

const char* policy_sampling_name(PolicySampling s);
bool policy_sampling_from_name(const std::string& name, PolicySampling* out);

struct ApgOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  PolicySampling sampling = PolicySampling::kWinnerTakeAll;
  double nll_weight = 0.01;  // Gaussian part: weak stddev pressure
  double ce_weight = 1.0;    // logit ranking loss: makes the most likely
                             // component track the winner
  double wta_label_temp = 0.05;  // [m] softness of the ranking labels
  double noise_scale = 1.0;  // 0 -> deterministic winner-mean probe
  std::uint64_t stream_seed = 0;
  bool want_grads = true;
};

// Autoregressive policy rollout supervised in state space; gradients flow
// through the dynamics and the recurrent core back to the start.
EpisodeResult apg_episode(const ModelParams& params, const Scenario& scenario,
                          const ApgOptions& options);

struct PlannerOptions {
  SimConfig env;  // evaluation-time config (clipping on)
  RouteConditioning route = RouteConditioning::kHeading;
  // Training disables action clipping inside inv_kin and the rollout step
  // so early large-magnitude plans still pass gradients.
  bool training = true;
  bool want_grads = true;
};

EpisodeResult planner_episode(const ModelParams& params, const Scenario& scenario,
                              const PlannerOptions& options);

struct CollectOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  double noise_scale = 3.0;  // widened exploration for world-model coverage
  std::uint64_t run_seed = 0;
  int scenario_index = 0;
};

// Frozen-policy rollout recorded as world-model training data.
std::vector<Transition> collect_transitions(const ModelParams& params, const Scenario& scenario,
                                            const CollectOptions& options);

struct AwmOptions {
  SimConfig env;
  RouteConditioning route = RouteConditioning::kHeading;
  OdometryKind odometry = OdometryKind::kSimLoop;
  double w_odo = 1.0;
  double w_plan = 1.0;
  double w_inv = 1.0;
  bool want_grads = true;
};

struct AwmLosses {
  double odo = 0.0;
  double plan = 0.0;
  double inv = 0.0;
  bool finite = true;
  GradientAccumulator grads;  // head parameters only
};

// Joint world-model objective on one scenario: odometry + inverse-state on
// collected transitions, planner on its own closed-loop episode. Heads with
// weight zero are skipped entirely.
AwmLosses awm_losses(const ModelParams& params, const Scenario& scenario,
                     std::span<const Transition> transitions, const AwmOptions& options);

}  // namespace awm
