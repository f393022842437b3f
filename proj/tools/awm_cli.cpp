// awm: synthetic driving data, differentiable training, evaluation, MPC
// grids, gradient checking, and trajectory export.
//
// Exit codes: 0 success, 1 internal failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "awm/checks.hpp"
#include "awm/losses.hpp"
#include "awm/metrics.hpp"
#include "awm/model.hpp"
#include "awm/mpc.hpp"
#include "awm/report.hpp"
#include "awm/rollout.hpp"
#include "awm/scenario.hpp"
#include "awm/train.hpp"

namespace fs = std::filesystem;
using namespace awm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunDir {
  fs::path root;
  fs::path checkpoints;
  fs::path logs;
  fs::path reports;
};

RunDir make_run_dir(const std::string& out) {
  RunDir dir;
  dir.root = out;
  dir.checkpoints = dir.root / "checkpoints";
  dir.logs = dir.root / "logs";
  dir.reports = dir.root / "reports";
  std::error_code ec;
  fs::create_directories(dir.checkpoints, ec);
  fs::create_directories(dir.logs, ec);
  fs::create_directories(dir.reports, ec);
  if (ec) throw UsageError("cannot create run directory: " + out);
  return dir;
}

void echo_config(const CLI::App& app, const RunDir& dir) {
  std::ofstream out(dir.root / "config.toml", std::ios::binary);
  out << app.config_to_str(true, true);
}

std::vector<Scenario> load_data(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("dataset not found: " + path);
  return load_dataset(path);
}

ModelParams load_ckpt(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

RouteConditioning parse_route(const std::string& name) {
  RouteConditioning mode;
  if (!route_conditioning_from_name(name, &mode))
    throw UsageError("unknown route conditioning: " + name);
  return mode;
}

struct GenArgs {
  std::string kinds = "straight,arc,s-curve,stop-go";
  int count = 64;
  std::uint64_t seed = 0;
  std::string out;
  int horizon = 80;
  double half_width = 3.0;
};

int cmd_gen(const GenArgs& args) {
  const std::vector<ScenarioKind> kinds = parse_kind_list(args.kinds);
  GeneratorParams gp;
  gp.horizon = args.horizon;
  gp.half_width = args.half_width;
  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(args.count));
  for (int i = 0; i < args.count; ++i) {
    const ScenarioKind kind = kinds[static_cast<std::size_t>(i) % kinds.size()];
    scenarios.push_back(generate_scenario(kind, args.seed + static_cast<std::uint64_t>(i), gp));
  }
  save_dataset(scenarios, args.out);
  std::cout << "wrote " << scenarios.size() << " scenarios to " << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string init_ckpt;
  TrainConfig cfg;
  std::string route = "heading";
  std::string odometry = "sim-loop";
  std::string sampling = "wta";
};

int cmd_train(const CLI::App& app, const TrainArgs& args) {
  const std::vector<Scenario> dataset = load_data(args.data);
  const RunDir dir = make_run_dir(args.out);
  echo_config(app, dir);

  TrainConfig cfg = args.cfg;
  cfg.route = parse_route(args.route);
  if (!odometry_kind_from_name(args.odometry, &cfg.odometry))
    throw UsageError("unknown odometry kind: " + args.odometry);
  if (!policy_sampling_from_name(args.sampling, &cfg.policy_sampling))
    throw UsageError("unknown policy sampling mode: " + args.sampling);

  ModelParams initial;
  const bool warm = !args.init_ckpt.empty();
  if (warm) initial = load_ckpt(args.init_ckpt);
  const TrainResult result = train(dataset, cfg, warm ? &initial : nullptr, &std::cout);
  write_train_log_csv((dir.logs / "train.csv").string(), result.log);
  save_checkpoint(result.after_policy_phase, (dir.checkpoints / "policy.awmc").string());
  save_checkpoint(result.params, (dir.checkpoints / "final.awmc").string());
  if (result.diverged) {
    std::cerr << "training stopped early: " << result.note << "\n";
    return 1;
  }
  std::cout << "checkpoint: " << (dir.checkpoints / "final.awmc").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string out;
  int rollouts = 1;
  std::string route = "heading";
  std::string policy = "policy";
  std::uint64_t seed = 0;
  int workers = 1;
  double noise_scale = 1.0;
};

int cmd_eval(const CLI::App& app, const EvalArgs& args) {
  const std::vector<Scenario> dataset = load_data(args.data);
  const ModelParams params = load_ckpt(args.ckpt);
  const RunDir dir = make_run_dir(args.out);
  echo_config(app, dir);

  EvalOptions eo;
  eo.route = parse_route(args.route);
  if (!eval_policy_from_name(args.policy, &eo.policy))
    throw UsageError("unknown policy source: " + args.policy);
  eo.rollouts = args.rollouts;
  eo.seed = args.seed;
  eo.workers = args.workers;
  eo.noise_scale = args.noise_scale;

  const std::vector<EvalRow> rows = evaluate(params, dataset, eo);
  write_eval_report((dir.reports / "eval.csv").string(), rows);
  std::cout << "scenarios " << rows.size() << (args.rollouts > 1 ? " minADE " : " ADE ")
            << format_double(mean_ade(rows)) << " overlap " << format_double(overlap_rate(rows))
            << " offroad " << format_double(offroad_rate(rows)) << "\n";
  std::cout << "report: " << (dir.reports / "eval.csv").string() << "\n";
  return 0;
}

struct MpcArgs {
  std::string data;
  std::string ckpt;
  std::string out;
  std::string grid = "1,1,1;8,3,10";
  std::string reward = "neg-inverse-norm";
  std::string route = "heading";
  std::uint64_t seed = 0;
  int workers = 1;
};

int cmd_mpc(const CLI::App& app, const MpcArgs& args) {
  const std::vector<Scenario> dataset = load_data(args.data);
  const ModelParams params = load_ckpt(args.ckpt);
  const RunDir dir = make_run_dir(args.out);
  echo_config(app, dir);

  MpcConfig base;
  if (!reward_kind_from_name(args.reward, &base.reward))
    throw UsageError("unknown reward kind: " + args.reward);
  base.seed = args.seed;
  std::vector<MpcConfig> grid;
  try {
    grid = parse_mpc_grid(args.grid, base);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  MpcEvalOptions mo;
  mo.route = parse_route(args.route);
  mo.workers = args.workers;

  std::vector<MpcEvalRow> all;
  for (const MpcConfig& cell : grid) {
    const std::vector<MpcEvalRow> rows = mpc_eval(params, dataset, cell, mo);
    double ade_sum = 0.0;
    for (const auto& r : rows) ade_sum += r.ade;
    std::cout << "N=" << cell.rollouts << " k=" << cell.top_k << " H=" << cell.horizon
              << " reward=" << reward_kind_name(cell.reward) << " ADE "
              << format_double(ade_sum / static_cast<double>(rows.size())) << "\n";
    all.insert(all.end(), rows.begin(), rows.end());
  }
  write_mpc_report((dir.reports / "mpc.csv").string(), all);
  std::cout << "report: " << (dir.reports / "mpc.csv").string() << "\n";
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tol = 1e-5;
  double episode_tol = 1e-4;
  int points = 10;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  const CheckSuiteResult suite =
      run_gradcheck_suite(args.seed, args.tol, args.episode_tol, args.points);
  for (const CheckItem& item : suite.items) {
    std::cout << (item.pass ? "[PASS] " : "[FAIL] ") << item.name << " (" << item.points
              << " points, max rel err " << format_double(item.max_rel_err) << ")\n";
  }
  std::cout << (suite.pass ? "gradcheck suite passed" : "gradcheck suite FAILED") << "\n";
  return suite.pass ? 0 : 1;
}

struct RenderArgs {
  std::string data;
  std::string ckpt;
  std::string out;
  int scenario_id = 0;
  std::string route = "heading";
  std::uint64_t seed = 0;
  int imagine_horizon = 10;
  int imagine_stride = 10;
};

int cmd_render(const CLI::App& app, const RenderArgs& args) {
  const std::vector<Scenario> dataset = load_data(args.data);
  if (args.scenario_id < 0 || args.scenario_id >= static_cast<int>(dataset.size()))
    throw UsageError("scenario id out of range");
  const ModelParams params = load_ckpt(args.ckpt);
  const RunDir dir = make_run_dir(args.out);
  echo_config(app, dir);

  const Scenario& sc = dataset[static_cast<std::size_t>(args.scenario_id)];
  RolloutOptions ro;
  ro.route = parse_route(args.route);
  ro.record_hiddens = true;
  const RolloutRecord rec =
      run_rollout(params, sc, ro, sampled_policy(args.seed, args.scenario_id, 0, 1.0));

  // imagined futures anchored along the realized trajectory
  std::vector<ImaginedRollout> imagined;
  ImagineOptions io;
  io.horizon = args.imagine_horizon;
  io.route = ro.route;
  const int steps = static_cast<int>(rec.actions.size());
  for (int t0 = 0; t0 + args.imagine_horizon <= steps; t0 += args.imagine_stride) {
    std::vector<Action> acts(rec.actions.begin() + t0,
                             rec.actions.begin() + t0 + args.imagine_horizon);
    imagined.push_back(imagine(params, sc, t0, rec.states[static_cast<std::size_t>(t0)],
                               rec.hiddens[static_cast<std::size_t>(t0)],
                               fixed_action_sampler(std::move(acts)), io));
  }

  write_trajectory_csv((dir.reports / "expert.csv").string(), "expert", sc.expert.states);
  write_trajectory_csv((dir.reports / "realized.csv").string(), "realized", rec.states);
  {
    std::vector<std::vector<std::string>> cells;
    for (std::size_t r = 0; r < imagined.size(); ++r) {
      for (std::size_t t = 1; t < imagined[r].states.size(); ++t) {
        const VehicleState& s = imagined[r].states[t];
        cells.push_back({std::to_string(r), std::to_string(t), format_double(s.x),
                         format_double(s.y), format_double(s.yaw)});
      }
    }
    write_csv((dir.reports / "imagined.csv").string(), {"rollout", "tau", "x", "y", "yaw"},
              cells);
  }
  {
    std::ofstream svg(dir.reports / "overlay.svg", std::ios::binary);
    svg << render_scenario_svg(sc, rec.states, imagined);
  }
  std::cout << "rendered scenario " << scenario_label(sc) << " to " << dir.reports.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"analytic world models on a differentiable driving micro-simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML-style config file");

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic scenario dataset");
  gen_cmd->add_option("--kinds", gen.kinds, "comma-separated scenario kinds");
  gen_cmd->add_option("--count", gen.count, "number of scenarios");
  gen_cmd->add_option("--seed", gen.seed, "base seed")->envname("AWM_SEED");
  gen_cmd->add_option("--out", gen.out, "output dataset file")->required();
  gen_cmd->add_option("--horizon", gen.horizon, "states per episode");
  gen_cmd->add_option("--half-width", gen.half_width, "road half width [m]");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train the policy and world-model heads");
  train_cmd->add_option("--data", tr.data, "dataset file")->required();
  train_cmd->add_option("--out", tr.out, "run directory")->required();
  train_cmd->add_option("--init-ckpt", tr.init_ckpt, "warm-start checkpoint");
  train_cmd->add_option("--seed", tr.cfg.seed, "training seed")->envname("AWM_SEED");
  train_cmd->add_option("--apg-epochs", tr.cfg.apg_epochs, "policy training epochs");
  train_cmd->add_option("--awm-epochs", tr.cfg.awm_epochs, "world-model training epochs");
  train_cmd->add_option("--batch", tr.cfg.batch_size, "scenarios per update");
  train_cmd->add_option("--lr", tr.cfg.lr, "Adam learning rate");
  train_cmd->add_option("--grad-clip", tr.cfg.grad_clip, "global gradient norm clip");
  train_cmd->add_option("--nll-weight", tr.cfg.nll_weight, "mixture likelihood weight");
  train_cmd->add_option("--ce-weight", tr.cfg.ce_weight, "winner cross-entropy weight");
  train_cmd->add_option("--lr-floor", tr.cfg.lr_floor, "cosine decay floor (fraction of lr)");
  train_cmd->add_option("--w-odo", tr.cfg.w_odo, "odometry loss weight");
  train_cmd->add_option("--w-plan", tr.cfg.w_plan, "planner loss weight");
  train_cmd->add_option("--w-inv", tr.cfg.w_inv, "inverse-state loss weight");
  train_cmd->add_option("--collect-noise", tr.cfg.collect_noise_scale,
                        "sampling noise boost for world-model data collection");
  train_cmd->add_option("--odometry-kind", tr.odometry, "sim-loop | inverse-sim | direct");
  train_cmd->add_option("--route-conditioning", tr.route, "heading | waypoint | none");
  train_cmd->add_option("--holdout", tr.cfg.holdout, "scenarios held out for evaluation");
  train_cmd->add_option("--workers", tr.cfg.workers, "parallel workers (1 = bit-reproducible)");
  train_cmd->add_option("--mixture", tr.cfg.model.mixture, "policy mixture components");
  train_cmd->add_option("--policy-sampling", tr.sampling,
                        "wta (winner-take-all) | mixture (full-mixture sampling)");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "closed-loop evaluation of a checkpoint");
  eval_cmd->add_option("--data", ev.data, "dataset file")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--out", ev.out, "run directory")->required();
  eval_cmd->add_option("--rollouts", ev.rollouts, "sampled rollouts per scenario (minADE if >1)");
  eval_cmd->add_option("--route-conditioning", ev.route, "heading | waypoint | none");
  eval_cmd->add_option("--policy", ev.policy, "policy | planner | oracle");
  eval_cmd->add_option("--seed", ev.seed, "evaluation seed")->envname("AWM_SEED");
  eval_cmd->add_option("--noise-scale", ev.noise_scale, "action sampling noise scale");
  eval_cmd->add_option("--workers", ev.workers, "parallel workers (1 = bit-reproducible)");

  MpcArgs mp;
  CLI::App* mpc_cmd = app.add_subcommand("mpc", "model-predictive control grids");
  mpc_cmd->add_option("--data", mp.data, "dataset file")->required();
  mpc_cmd->add_option("--ckpt", mp.ckpt, "checkpoint file")->required();
  mpc_cmd->add_option("--out", mp.out, "run directory")->required();
  mpc_cmd->add_option("--grid", mp.grid, "semicolon list of N,k,H cells");
  mpc_cmd->add_option("--reward", mp.reward,
                      "neg-dist-to-log | pos-dist-to-log | neg-inverse-norm");
  mpc_cmd->add_option("--route-conditioning", mp.route, "heading | waypoint | none");
  mpc_cmd->add_option("--seed", mp.seed, "imagination seed")->envname("AWM_SEED");
  mpc_cmd->add_option("--workers", mp.workers, "parallel workers (1 = bit-reproducible)");

  GradcheckArgs gc;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "verify every derivative in the stack");
  gc_cmd->add_option("--seed", gc.seed, "suite seed")->envname("AWM_SEED");
  gc_cmd->add_option("--tol", gc.tol, "relative tolerance for primitive VJPs");
  gc_cmd->add_option("--episode-tol", gc.episode_tol, "relative tolerance for episode losses");
  gc_cmd->add_option("--points", gc.points, "random points per check");

  RenderArgs rd;
  CLI::App* render_cmd =
      app.add_subcommand("render", "export expert/realized/imagined trajectories + SVG");
  render_cmd->add_option("--data", rd.data, "dataset file")->required();
  render_cmd->add_option("--ckpt", rd.ckpt, "checkpoint file")->required();
  render_cmd->add_option("--out", rd.out, "run directory")->required();
  render_cmd->add_option("--scenario-id", rd.scenario_id, "row index into the dataset");
  render_cmd->add_option("--route-conditioning", rd.route, "heading | waypoint | none");
  render_cmd->add_option("--seed", rd.seed, "rollout seed")->envname("AWM_SEED");
  render_cmd->add_option("--imagine-horizon", rd.imagine_horizon, "imagination depth");
  render_cmd->add_option("--imagine-stride", rd.imagine_stride, "steps between anchors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (train_cmd->parsed()) return cmd_train(app, tr);
    if (eval_cmd->parsed()) return cmd_eval(app, ev);
    if (mpc_cmd->parsed()) return cmd_mpc(app, mp);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc);
    if (render_cmd->parsed()) return cmd_render(app, rd);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
