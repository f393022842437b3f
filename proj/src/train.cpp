#include "awm/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "awm/parallel.hpp"
#include "awm/report.hpp"

namespace awm {

void AdamOptimizer::apply(ModelParams* params, const GradientAccumulator& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const auto& [name, g] : grads.buffers()) {
    Tensor& tensor = params->tensor(name);
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      tensor.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

namespace {

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

std::vector<int> shuffled_indices(int n, Rng* rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = rng->uniform_int(i + 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

double holdout_ade(const ModelParams& params, const std::vector<Scenario>& eval_set,
                   const TrainConfig& cfg, EvalPolicy policy) {
  if (eval_set.empty()) return nan_value();
  EvalOptions eo;
  eo.env = cfg.env;
  eo.route = cfg.route;
  eo.policy = policy;
  eo.rollouts = 1;
  eo.seed = derive_seed({cfg.seed, 0xe7a1u});
  eo.workers = cfg.workers;
  return mean_ade(evaluate(params, eval_set, eo));
}

}  // namespace

TrainResult train(const std::vector<Scenario>& dataset, const TrainConfig& cfg,
                  const ModelParams* initial, std::ostream* progress) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  const int holdout = std::min<int>(cfg.holdout, static_cast<int>(dataset.size()) - 1);
  std::vector<Scenario> train_set(dataset.begin(), dataset.end() - holdout);
  std::vector<Scenario> eval_set(dataset.end() - holdout, dataset.end());
  if (eval_set.empty()) {
    const int n = std::min<int>(cfg.eval_scenarios, static_cast<int>(train_set.size()));
    eval_set.assign(train_set.begin(), train_set.begin() + n);
  } else if (static_cast<int>(eval_set.size()) > cfg.eval_scenarios) {
    eval_set.resize(static_cast<std::size_t>(cfg.eval_scenarios));
  }

  TrainResult result;
  result.params = initial ? *initial : ModelParams::init(cfg.model, cfg.seed);

  const int n_train = static_cast<int>(train_set.size());
  const int batch = std::max(1, std::min(cfg.batch_size, n_train));
  AdamOptimizer adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Rng order_rng(derive_seed({cfg.seed, 0x0bdeau}));
  int epoch = 0;

  // phase 1: analytic policy gradients
  for (int e = 0; e < cfg.apg_epochs; ++e, ++epoch) {
    // cosine decay toward lr_floor * lr
    const double phase = cfg.apg_epochs > 1 ? static_cast<double>(e) / (cfg.apg_epochs - 1) : 0.0;
    const double decayed =
        cfg.lr * (cfg.lr_floor + (1.0 - cfg.lr_floor) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * phase)));
    adam.set_lr(decayed);
    ModelParams snapshot = result.params;
    const std::vector<int> order = shuffled_indices(n_train, &order_rng);
    double epoch_loss = 0.0;
    int episodes = 0;
    bool finite = true;
    int bad_scenario = -1, bad_step = -1;

    for (int start = 0; start < n_train && finite; start += batch) {
      const int count = std::min(batch, n_train - start);
      const auto results = parallel_map<EpisodeResult>(count, cfg.workers, [&](int k) {
        const int sidx = order[static_cast<std::size_t>(start + k)];
        ApgOptions ao;
        ao.env = cfg.env;
        ao.route = cfg.route;
        ao.nll_weight = cfg.nll_weight;
        ao.ce_weight = cfg.ce_weight;
        ao.wta_label_temp = cfg.wta_label_temp;
        ao.sampling = cfg.policy_sampling;
        ao.stream_seed = derive_seed({cfg.seed, 0xa9e0u, static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(sidx)});
        return apg_episode(result.params, train_set[static_cast<std::size_t>(sidx)], ao);
      });
      GradientAccumulator grads;
      for (int k = 0; k < count; ++k) {
        const EpisodeResult& er = results[static_cast<std::size_t>(k)];
        if (!er.finite) {
          finite = false;
          bad_scenario = order[static_cast<std::size_t>(start + k)];
          bad_step = er.bad_step;
          break;
        }
        epoch_loss += er.loss;
        ++episodes;
        grads.merge(er.grads);
      }
      if (!finite) break;
      grads.scale_all(cfg.w_policy / static_cast<double>(count));
      grads.clip_global_norm(cfg.grad_clip);
      adam.apply(&result.params, grads);
    }

    if (!finite) {
      result.params = snapshot;
      result.diverged = true;
      result.note = "non-finite policy loss in scenario " + std::to_string(bad_scenario) +
                    " at step " + std::to_string(bad_step);
      break;
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.policy_loss = episodes > 0 ? epoch_loss / episodes : nan_value();
    row.odo_loss = nan_value();
    row.plan_loss = nan_value();
    row.inv_loss = nan_value();
    row.eval_ade = holdout_ade(result.params, eval_set, cfg, EvalPolicy::kPolicy);
    result.log.push_back(row);
    if (progress) {
      *progress << "epoch " << row.epoch << " policy_loss " << row.policy_loss << " eval_ade "
                << row.eval_ade << "\n";
    }
  }

  result.after_policy_phase = result.params;
  if (result.diverged || cfg.awm_epochs == 0) return result;

  // data collection from the frozen policy
  std::vector<std::vector<Transition>> transitions(static_cast<std::size_t>(n_train));
  const auto collected = parallel_map<std::vector<Transition>>(n_train, cfg.workers, [&](int i) {
    CollectOptions co;
    co.env = cfg.env;
    co.route = cfg.route;
    co.noise_scale = cfg.collect_noise_scale;
    co.run_seed = derive_seed({cfg.seed, 0xc011ec7u});
    co.scenario_index = i;
    return collect_transitions(result.params, train_set[static_cast<std::size_t>(i)], co);
  });
  transitions = collected;

  TrainConfig phase2 = cfg;
  phase2.apg_epochs = 0;
  TrainResult heads = train_awm_heads(result.params, train_set, transitions, phase2, progress);
  for (TrainLogRow row : heads.log) {
    row.epoch = epoch++;
    result.log.push_back(row);
  }
  result.params = heads.params;
  result.diverged = heads.diverged;
  if (!heads.note.empty()) result.note = heads.note;
  return result;
}

TrainResult train_awm_heads(const ModelParams& trunk, const std::vector<Scenario>& scenarios,
                            const std::vector<std::vector<Transition>>& transitions,
                            const TrainConfig& cfg, std::ostream* progress) {
  TrainResult result;
  result.params = trunk;
  const int n = static_cast<int>(scenarios.size());
  if (n == 0) return result;
  const int batch = std::max(1, std::min(cfg.batch_size, n));

  std::vector<Scenario> eval_set;
  {
    const int count = std::min<int>(cfg.eval_scenarios, n);
    eval_set.assign(scenarios.begin(), scenarios.begin() + count);
  }

  AdamOptimizer adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Rng order_rng(derive_seed({cfg.seed, 0x0bdea2u}));

  for (int e = 0; e < cfg.awm_epochs; ++e) {
    ModelParams snapshot = result.params;
    const std::vector<int> order = shuffled_indices(n, &order_rng);
    double odo = 0.0, plan = 0.0, inv = 0.0;
    int episodes = 0;
    bool finite = true;

    for (int start = 0; start < n && finite; start += batch) {
      const int count = std::min(batch, n - start);
      const auto results = parallel_map<AwmLosses>(count, cfg.workers, [&](int k) {
        const int sidx = order[static_cast<std::size_t>(start + k)];
        AwmOptions ao;
        ao.env = cfg.env;
        ao.route = cfg.route;
        ao.odometry = cfg.odometry;
        ao.w_odo = cfg.w_odo;
        ao.w_plan = cfg.w_plan;
        ao.w_inv = cfg.w_inv;
        return awm_losses(result.params, scenarios[static_cast<std::size_t>(sidx)],
                          transitions[static_cast<std::size_t>(sidx)], ao);
      });
      GradientAccumulator grads;
      for (int k = 0; k < count; ++k) {
        const AwmLosses& al = results[static_cast<std::size_t>(k)];
        if (!al.finite) {
          finite = false;
          break;
        }
        odo += al.odo;
        plan += al.plan;
        inv += al.inv;
        ++episodes;
        grads.merge(al.grads);
      }
      if (!finite) break;
      grads.scale_all(1.0 / static_cast<double>(count));
      grads.clip_global_norm(cfg.grad_clip);
      adam.apply(&result.params, grads);
    }

    if (!finite) {
      result.params = snapshot;
      result.diverged = true;
      result.note = "non-finite world-model loss in epoch " + std::to_string(e);
      break;
    }

    TrainLogRow row;
    row.epoch = e;
    row.policy_loss = nan_value();
    row.odo_loss = episodes > 0 && cfg.w_odo > 0 ? odo / episodes : nan_value();
    row.plan_loss = episodes > 0 && cfg.w_plan > 0 ? plan / episodes : nan_value();
    row.inv_loss = episodes > 0 && cfg.w_inv > 0 ? inv / episodes : nan_value();
    row.eval_ade = cfg.w_plan > 0 ? holdout_ade(result.params, eval_set, cfg, EvalPolicy::kPlanner)
                                  : nan_value();
    result.log.push_back(row);
    if (progress) {
      *progress << "awm epoch " << e << " odo " << row.odo_loss << " plan " << row.plan_loss
                << " inv " << row.inv_loss << " eval_ade " << row.eval_ade << "\n";
    }
  }
  return result;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& r : rows) {
    cells.push_back({std::to_string(r.epoch), format_double(r.policy_loss),
                     format_double(r.odo_loss), format_double(r.plan_loss),
                     format_double(r.inv_loss), format_double(r.eval_ade)});
  }
  write_csv(path, {"epoch", "policy_loss", "odo_loss", "plan_loss", "inv_loss", "eval_ade"},
            cells);
}

}  // namespace awm
