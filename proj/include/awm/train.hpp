#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "awm/losses.hpp"
#include "awm/model.hpp"

namespace awm {

class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void apply(ModelParams* params, const GradientAccumulator& grads);
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

struct TrainConfig {
  ModelConfig model;
  SimConfig env;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  int batch_size = 16;
  int apg_epochs = 60;
  int awm_epochs = 40;
  double w_policy = 1.0;
  double w_odo = 1.0;
  double w_plan = 1.0;
  double w_inv = 1.0;
  double nll_weight = 0.01;
  double ce_weight = 1.0;
  double wta_label_temp = 0.05;
  PolicySampling policy_sampling = PolicySampling::kWinnerTakeAll;
  double lr_floor = 0.1;  // cosine decay floor as a fraction of lr
  double collect_noise_scale = 3.0;
  OdometryKind odometry = OdometryKind::kSimLoop;
  RouteConditioning route = RouteConditioning::kHeading;
  std::uint64_t seed = 0;
  int workers = 1;
  int holdout = 0;          // scenarios reserved from the end for eval
  int eval_scenarios = 8;   // per-epoch eval budget
};

struct TrainLogRow {
  int epoch = 0;
  double policy_loss = 0.0;
  double odo_loss = 0.0;
  double plan_loss = 0.0;
  double inv_loss = 0.0;
  double eval_ade = 0.0;
};

struct TrainResult {
  ModelParams params;
  ModelParams after_policy_phase;  // snapshot before world-model training
  std::vector<TrainLogRow> log;
  bool diverged = false;
  std::string note;
};

// Two phases: (1) policy via analytic policy gradients, (2) the three
// world-model heads on data collected from the frozen policy, planner
// episodes included. On divergence the last finite-epoch parameters are
// kept.
TrainResult train(const std::vector<Scenario>& dataset, const TrainConfig& cfg,
                  const ModelParams* initial = nullptr, std::ostream* progress = nullptr);

// Phase 2 alone, for a pre-trained trunk and pre-collected transitions.
TrainResult train_awm_heads(const ModelParams& trunk,
                            const std::vector<Scenario>& scenarios,
                            const std::vector<std::vector<Transition>>& transitions,
                            const TrainConfig& cfg, std::ostream* progress = nullptr);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace awm
