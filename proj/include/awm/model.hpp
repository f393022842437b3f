#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "awm/features.hpp"
#include "awm/rng.hpp"
#include "awm/tape.hpp"

namespace awm {

struct ModelConfig {
  int feature_dim = kFeatureDim;
  int enc_hidden = 32;
  int enc_out = 32;
  int hidden = 64;       // recurrent state size
  int head_hidden = 32;
  int mixture = 6;       // policy mixture components
  // added to the raw log-std outputs so a zero-initialized head samples
  // with moderate noise per channel (accel, curvature)
  std::array<double, 2> logstd_offset = {-1.2039728043259360, -3.5065578973199818};
  // smooth sampling floor per channel: sigma = sigma_min + exp(raw + offset),
  // so exploration never collapses entirely
  std::array<double, 2> sigma_min = {0.02, 0.002};

  int policy_out_dim() const { return 5 * mixture; }
  int mixture_dim() const { return 2 * mixture; }
};

struct Tensor {
  std::vector<int> dims;
  std::vector<double> data;
  int size() const {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
  }
};

// All learnable weights: encoder, recurrent core, and the four parallel
// heads (policy, odometry, planner, inverse state). Heads share nothing.
class ModelParams {
 public:
  ModelParams() = default;
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  Tensor& tensor(const std::string& name);
  const Tensor& tensor(const std::string& name) const;
  std::size_t parameter_count() const;

 private:
  ModelConfig cfg_;
  std::map<std::string, Tensor> tensors_;  // sorted: deterministic iteration
  friend ModelParams load_checkpoint(const std::string&);
};

// Expected tensor shapes for a config, keyed by name.
std::map<std::string, std::vector<int>> tensor_shapes(const ModelConfig& cfg);

// --- checkpoint file ---

struct CheckpointError : std::runtime_error {
  enum class Kind { kIo, kBadMagic, kVersion, kTruncated, kShapeMismatch, kMetadata };
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// --- tape-side forward passes ---

using TrainablePred = std::function<bool(const std::string&)>;

struct BoundParams {
  std::map<std::string, ValueId> ids;
  ValueId at(const std::string& name) const;
};

BoundParams bind_params(Tape& tape, const ModelParams& params,
                        const TrainablePred& trainable = nullptr);

struct MixtureIds {
  ValueId means = kNoValue;       // 2*mixture
  ValueId raw_logstd = kNoValue;  // 2*mixture
  ValueId logits = kNoValue;      // mixture
  ValueId pre_out = kNoValue;     // head activations feeding the output layer
};

// Builders append to the tape and return node ids.
ValueId encoder_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId features);
ValueId core_step(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId enc_out,
                  ValueId hidden);
MixtureIds policy_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden);
ValueId odometry_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden,
                         ValueId action);
ValueId planner_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden);
ValueId inverse_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden,
                        ValueId action);

// Mixture parameters with the log-std offsets applied.
struct MixtureValues {
  int components = 0;
  std::vector<double> means;   // 2 per component
  std::vector<double> stds;    // 2 per component, strictly positive
  std::vector<double> logits;  // 1 per component
};

MixtureValues read_mixture(const Tape& tape, const MixtureIds& ids, const ModelConfig& cfg);
int sample_component(const MixtureValues& mix, Rng& rng);
Action component_action(const MixtureValues& mix, int component, Rng& rng, double noise_scale);

// One-off head evaluations on plain values (fresh scratch tape inside).
std::array<double, 5> eval_odometry_head(const ModelParams& params, std::span<const double> hidden,
                                         const Action& a);
std::array<double, 5> eval_inverse_head(const ModelParams& params, std::span<const double> hidden,
                                        const Action& a);

// Adds every trainable bound parameter's adjoint to the accumulator.
void collect_param_grads(const Tape& tape, const BoundParams& bound, const ModelParams& params,
                         const TrainablePred& trainable, GradientAccumulator* acc);

}  // namespace awm
