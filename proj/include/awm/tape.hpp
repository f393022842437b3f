#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "awm/dynamics.hpp"

namespace awm {

// Reverse-mode engine over a fixed primitive vocabulary. Every primitive
// has a hand-written VJP; backward() walks the append-only DAG once in
// reverse creation order and accumulates adjoints additively.
enum class Op : std::uint8_t {
  kLeaf,
  kAffine,          // y = W x + b            parents: x, W(row-major), b
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kAdd,             // y = a + b
  kSub,             // y = a - b
  kMul,             // y = a ⊙ b
  kScale,           // y = c * x              aux_d[0] = c
  kAddConst,        // y = x + c              aux_d = c
  kRSubConst,       // y = c - x              aux_d = c
  kMulConst,        // y = c ⊙ x              aux_d = c
  kConcat,          // y = [a; b]
  kSlice,           // y = x[off .. off+len)  aux_i = {off, len}
  kSqDistConst,     // y = Σ (x_i - c_i)^2    aux_d = c, scalar output
  kSum,             // y = Σ x_i              scalar output
  kCrossEntropyPick,// y = logsumexp(logits) - logits[i]   aux_i = {i}
  kSoftCrossEntropy,// y = logsumexp(logits) - Σ q_i logits_i   aux_d = q
  kSimStep,         // parents: state(5), action(2); aux_i[0] = sim config id
  kSimInverseStep,
  kInvKin,          // parents: state(5), target(5); output(2)
  kEncode,          // parents: state(5); aux_i[0] = encode context id; output = feature dim
};

using ValueId = std::int32_t;
inline constexpr ValueId kNoValue = -1;

// World-frame inputs captured at encode time so the VJP can replay the
// selection made in the forward pass.
struct EncodeContext {
  struct RoadPoint { double x, y; bool valid; };
  struct AgentSlot { double x, y, vx, vy; bool valid; };
  std::array<RoadPoint, 8> road{};
  std::array<AgentSlot, 4> agents{};
  double goal_x = 0.0, goal_y = 0.0, goal_heading = 0.0;
  int route_mode = 0;  // RouteConditioning
};

class Tape {
 public:
  struct Node {
    Op op;
    bool requires_grad;
    std::array<ValueId, 3> parents{kNoValue, kNoValue, kNoValue};
    std::uint32_t size = 0;
    std::uint32_t voff = 0;       // offset into the value arena (grads share it)
    std::uint32_t aux_off = 0;    // offset into the aux arena
    std::uint32_t aux_len = 0;
    std::array<std::int32_t, 2> aux_i{0, 0};
  };

  Tape();

  // Clears nodes and arenas but keeps capacity; config/context registries reset too.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

  ValueId leaf(std::span<const double> v, bool requires_grad = true);
  ValueId constant(std::span<const double> v) { return leaf(v, false); }
  ValueId scalar_constant(double v) { return leaf(std::span<const double>(&v, 1), false); }

  ValueId affine(ValueId x, ValueId w, ValueId b, int rows, int cols);
  ValueId tanh(ValueId x);
  ValueId sigmoid(ValueId x);
  ValueId exp(ValueId x);
  ValueId log(ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId x, double c);
  ValueId add_const(ValueId x, std::span<const double> c);
  ValueId rsub_const(ValueId x, std::span<const double> c);  // c - x
  ValueId mul_const(ValueId x, std::span<const double> c);
  ValueId concat(ValueId a, ValueId b);
  ValueId slice(ValueId x, int offset, int len);
  ValueId sq_dist_const(ValueId x, std::span<const double> c);
  ValueId sum(ValueId x);
  ValueId cross_entropy_pick(ValueId logits, int index);
  ValueId soft_cross_entropy(ValueId logits, std::span<const double> target);

  int register_sim_config(const SimConfig& cfg);
  ValueId sim_step(ValueId state, ValueId action, int cfg_id);
  ValueId sim_inverse_step(ValueId next_state, ValueId action, int cfg_id);
  ValueId sim_inv_kin(ValueId state, ValueId target, int cfg_id);

  int register_encode_context(const EncodeContext& ctx);
  ValueId encode(ValueId state, int ctx_id, int feature_dim);

  std::span<const double> value(ValueId id) const;
  std::span<const double> grad(ValueId id) const;

  // Seeds the root adjoint and propagates to every reachable node.
  // Adjoints accumulate across calls; zero_grads() resets them.
  void backward(ValueId root, std::span<const double> seed);
  void zero_grads();

  const Node& node(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  ValueId push(Op op, std::uint32_t size, ValueId p0, ValueId p1 = kNoValue, ValueId p2 = kNoValue);
  double* val_ptr(ValueId id) { return values_.data() + nodes_[static_cast<std::size_t>(id)].voff; }
  const double* val_ptr(ValueId id) const {
    return values_.data() + nodes_[static_cast<std::size_t>(id)].voff;
  }
  double* grad_ptr(ValueId id) { return grads_.data() + nodes_[static_cast<std::size_t>(id)].voff; }
  const double* aux_ptr(const Node& n) const { return aux_.data() + n.aux_off; }
  std::uint32_t store_aux(std::span<const double> data);
  void ensure_grads();
  void backward_node(ValueId id);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<double> aux_;
  std::vector<SimConfig> sim_configs_;
  std::vector<EncodeContext> encode_contexts_;
  bool grads_ready_ = false;
};

// Per-parameter gradient buffers keyed by name; accumulation is additive
// and merge order is the caller's responsibility (keep it deterministic).
class GradientAccumulator {
 public:
  void add(const std::string& name, std::span<const double> g);
  void merge(const GradientAccumulator& other);
  void scale_all(double c);
  const std::vector<double>* find(const std::string& name) const;
  const std::map<std::string, std::vector<double>>& buffers() const { return buffers_; }
  double global_norm() const;
  void clip_global_norm(double max_norm);

 private:
  std::map<std::string, std::vector<double>> buffers_;
};

}  // namespace awm
