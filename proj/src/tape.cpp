#include "awm/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "awm/features.hpp"

namespace awm {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tape::Tape() {
  nodes_.reserve(1024);
  values_.reserve(1 << 16);
  aux_.reserve(1 << 12);
}

void Tape::reset() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  aux_.clear();
  sim_configs_.clear();
  encode_contexts_.clear();
  grads_ready_ = false;
}

ValueId Tape::push(Op op, std::uint32_t size, ValueId p0, ValueId p1, ValueId p2) {
  Node n;
  n.op = op;
  n.size = size;
  n.parents = {p0, p1, p2};
  n.voff = static_cast<std::uint32_t>(values_.size());
  n.requires_grad = false;
  for (ValueId p : n.parents) {
    if (p != kNoValue) n.requires_grad |= nodes_[static_cast<std::size_t>(p)].requires_grad;
  }
  values_.resize(values_.size() + size, 0.0);
  nodes_.push_back(n);
  grads_ready_ = false;
  return static_cast<ValueId>(nodes_.size() - 1);
}

std::uint32_t Tape::store_aux(std::span<const double> data) {
  const auto off = static_cast<std::uint32_t>(aux_.size());
  aux_.insert(aux_.end(), data.begin(), data.end());
  return off;
}

ValueId Tape::leaf(std::span<const double> v, bool requires_grad) {
  ValueId id = push(Op::kLeaf, static_cast<std::uint32_t>(v.size()), kNoValue);
  nodes_.back().requires_grad = requires_grad;
  std::memcpy(val_ptr(id), v.data(), v.size() * sizeof(double));
  return id;
}

ValueId Tape::affine(ValueId x, ValueId w, ValueId b, int rows, int cols) {
  require(node(x).size == static_cast<std::uint32_t>(cols), "affine: input size != cols");
  require(node(w).size == static_cast<std::uint32_t>(rows * cols), "affine: weight size");
  require(node(b).size == static_cast<std::uint32_t>(rows), "affine: bias size");
  ValueId id = push(Op::kAffine, static_cast<std::uint32_t>(rows), x, w, b);
  nodes_.back().aux_i = {rows, cols};
  const double* xp = val_ptr(x);
  const double* wp = val_ptr(w);
  const double* bp = val_ptr(b);
  double* yp = val_ptr(id);
  for (int r = 0; r < rows; ++r) {
    double acc = bp[r];
    const double* wr = wp + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * xp[c];
    yp[r] = acc;
  }
  return id;
}

ValueId Tape::tanh(ValueId x) {
  ValueId id = push(Op::kTanh, node(x).size, x);
  const double* xp = val_ptr(x);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = std::tanh(xp[i]);
  return id;
}

ValueId Tape::sigmoid(ValueId x) {
  ValueId id = push(Op::kSigmoid, node(x).size, x);
  const double* xp = val_ptr(x);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = 1.0 / (1.0 + std::exp(-xp[i]));
  return id;
}

ValueId Tape::exp(ValueId x) {
  ValueId id = push(Op::kExp, node(x).size, x);
  const double* xp = val_ptr(x);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = std::exp(xp[i]);
  return id;
}

ValueId Tape::log(ValueId x) {
  ValueId id = push(Op::kLog, node(x).size, x);
  const double* xp = val_ptr(x);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = std::log(xp[i]);
  return id;
}

ValueId Tape::add(ValueId a, ValueId b) {
  require(node(a).size == node(b).size, "add: size mismatch");
  ValueId id = push(Op::kAdd, node(a).size, a, b);
  const double* ap = val_ptr(a);
  const double* bp = val_ptr(b);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = ap[i] + bp[i];
  return id;
}

ValueId Tape::sub(ValueId a, ValueId b) {
  require(node(a).size == node(b).size, "sub: size mismatch");
  ValueId id = push(Op::kSub, node(a).size, a, b);
  const double* ap = val_ptr(a);
  const double* bp = val_ptr(b);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = ap[i] - bp[i];
  return id;
}

ValueId Tape::mul(ValueId a, ValueId b) {
  require(node(a).size == node(b).size, "mul: size mismatch");
  ValueId id = push(Op::kMul, node(a).size, a, b);
  const double* ap = val_ptr(a);
  const double* bp = val_ptr(b);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = ap[i] * bp[i];
  return id;
}

ValueId Tape::scale(ValueId x, double c) {
  ValueId id = push(Op::kScale, node(x).size, x);
  nodes_.back().aux_off = store_aux(std::span<const double>(&c, 1));
  nodes_.back().aux_len = 1;
  const double* xp = val_ptr(x);
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = c * xp[i];
  return id;
}

ValueId Tape::add_const(ValueId x, std::span<const double> c) {
  require(node(x).size == c.size(), "add_const: size mismatch");
  ValueId id = push(Op::kAddConst, node(x).size, x);
  nodes_.back().aux_off = store_aux(c);
  nodes_.back().aux_len = static_cast<std::uint32_t>(c.size());
  const double* xp = val_ptr(x);
  const double* cp = aux_ptr(nodes_.back());
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = xp[i] + cp[i];
  return id;
}

ValueId Tape::rsub_const(ValueId x, std::span<const double> c) {
  require(node(x).size == c.size(), "rsub_const: size mismatch");
  ValueId id = push(Op::kRSubConst, node(x).size, x);
  nodes_.back().aux_off = store_aux(c);
  nodes_.back().aux_len = static_cast<std::uint32_t>(c.size());
  const double* xp = val_ptr(x);
  const double* cp = aux_ptr(nodes_.back());
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = cp[i] - xp[i];
  return id;
}

ValueId Tape::mul_const(ValueId x, std::span<const double> c) {
  require(node(x).size == c.size(), "mul_const: size mismatch");
  ValueId id = push(Op::kMulConst, node(x).size, x);
  nodes_.back().aux_off = store_aux(c);
  nodes_.back().aux_len = static_cast<std::uint32_t>(c.size());
  const double* xp = val_ptr(x);
  const double* cp = aux_ptr(nodes_.back());
  double* yp = val_ptr(id);
  for (std::uint32_t i = 0; i < node(id).size; ++i) yp[i] = cp[i] * xp[i];
  return id;
}

ValueId Tape::concat(ValueId a, ValueId b) {
  ValueId id = push(Op::kConcat, node(a).size + node(b).size, a, b);
  std::memcpy(val_ptr(id), val_ptr(a), node(a).size * sizeof(double));
  std::memcpy(val_ptr(id) + node(a).size, val_ptr(b), node(b).size * sizeof(double));
  return id;
}

ValueId Tape::slice(ValueId x, int offset, int len) {
  require(offset >= 0 && len >= 0 &&
              static_cast<std::uint32_t>(offset + len) <= node(x).size,
          "slice: out of range");
  ValueId id = push(Op::kSlice, static_cast<std::uint32_t>(len), x);
  nodes_.back().aux_i = {offset, len};
  std::memcpy(val_ptr(id), val_ptr(x) + offset, static_cast<std::size_t>(len) * sizeof(double));
  return id;
}

ValueId Tape::sq_dist_const(ValueId x, std::span<const double> c) {
  require(node(x).size == c.size(), "sq_dist_const: size mismatch");
  ValueId id = push(Op::kSqDistConst, 1, x);
  nodes_.back().aux_off = store_aux(c);
  nodes_.back().aux_len = static_cast<std::uint32_t>(c.size());
  const double* xp = val_ptr(x);
  const double* cp = aux_ptr(nodes_.back());
  double acc = 0.0;
  for (std::uint32_t i = 0; i < node(x).size; ++i) {
    const double d = xp[i] - cp[i];
    acc += d * d;
  }
  *val_ptr(id) = acc;
  return id;
}

ValueId Tape::sum(ValueId x) {
  ValueId id = push(Op::kSum, 1, x);
  const double* xp = val_ptr(x);
  double acc = 0.0;
  for (std::uint32_t i = 0; i < node(x).size; ++i) acc += xp[i];
  *val_ptr(id) = acc;
  return id;
}

ValueId Tape::cross_entropy_pick(ValueId logits, int index) {
  const std::uint32_t n = node(logits).size;
  require(index >= 0 && static_cast<std::uint32_t>(index) < n, "cross_entropy_pick: index");
  ValueId id = push(Op::kCrossEntropyPick, 1, logits);
  nodes_.back().aux_i = {index, 0};
  const double* lp = val_ptr(logits);
  double mx = lp[0];
  for (std::uint32_t i = 1; i < n; ++i) mx = std::max(mx, lp[i]);
  double se = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) se += std::exp(lp[i] - mx);
  *val_ptr(id) = mx + std::log(se) - lp[index];
  return id;
}

ValueId Tape::soft_cross_entropy(ValueId logits, std::span<const double> target) {
  const std::uint32_t n = node(logits).size;
  require(target.size() == n, "soft_cross_entropy: size mismatch");
  ValueId id = push(Op::kSoftCrossEntropy, 1, logits);
  auto& nd = nodes_.back();
  nd.aux_off = store_aux(target);
  nd.aux_len = n;
  const double* lp = val_ptr(logits);
  const double* q = aux_ptr(nd);
  double mx = lp[0];
  for (std::uint32_t i = 1; i < n; ++i) mx = std::max(mx, lp[i]);
  double se = 0.0;
  double dot = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    se += std::exp(lp[i] - mx);
    dot += q[i] * lp[i];
  }
  *val_ptr(id) = mx + std::log(se) - dot;
  return id;
}

int Tape::register_sim_config(const SimConfig& cfg) {
  sim_configs_.push_back(cfg);
  return static_cast<int>(sim_configs_.size() - 1);
}

ValueId Tape::sim_step(ValueId state, ValueId action, int cfg_id) {
  require(node(state).size == kStateDim && node(action).size == kActionDim, "sim_step: sizes");
  ValueId id = push(Op::kSimStep, kStateDim, state, action);
  nodes_.back().aux_i = {cfg_id, 0};
  const VehicleState s = state_from(val_ptr(state));
  const Action a = action_from(val_ptr(action));
  const VehicleState out = step(s, a, sim_configs_[static_cast<std::size_t>(cfg_id)]);
  const StateVec v = to_vec(out);
  std::memcpy(val_ptr(id), v.data(), sizeof(v));
  return id;
}

ValueId Tape::sim_inverse_step(ValueId next_state, ValueId action, int cfg_id) {
  require(node(next_state).size == kStateDim && node(action).size == kActionDim,
          "sim_inverse_step: sizes");
  ValueId id = push(Op::kSimInverseStep, kStateDim, next_state, action);
  nodes_.back().aux_i = {cfg_id, 0};
  const VehicleState s = state_from(val_ptr(next_state));
  const Action a = action_from(val_ptr(action));
  const VehicleState out = inverse_step(s, a, sim_configs_[static_cast<std::size_t>(cfg_id)]);
  const StateVec v = to_vec(out);
  std::memcpy(val_ptr(id), v.data(), sizeof(v));
  return id;
}

ValueId Tape::sim_inv_kin(ValueId state, ValueId target, int cfg_id) {
  require(node(state).size == kStateDim && node(target).size == kStateDim, "sim_inv_kin: sizes");
  ValueId id = push(Op::kInvKin, kActionDim, state, target);
  nodes_.back().aux_i = {cfg_id, 0};
  const VehicleState s = state_from(val_ptr(state));
  const VehicleState t = state_from(val_ptr(target));
  const Action out = inv_kin(s, t, sim_configs_[static_cast<std::size_t>(cfg_id)]);
  val_ptr(id)[0] = out.accel;
  val_ptr(id)[1] = out.curvature;
  return id;
}

int Tape::register_encode_context(const EncodeContext& ctx) {
  encode_contexts_.push_back(ctx);
  return static_cast<int>(encode_contexts_.size() - 1);
}

ValueId Tape::encode(ValueId state, int ctx_id, int feature_dim) {
  require(node(state).size == kStateDim, "encode: state size");
  ValueId id = push(Op::kEncode, static_cast<std::uint32_t>(feature_dim), state);
  nodes_.back().aux_i = {ctx_id, feature_dim};
  const VehicleState s = state_from(val_ptr(state));
  const FeatureVector f =
      compute_features(encode_contexts_[static_cast<std::size_t>(ctx_id)], s);
  std::memcpy(val_ptr(id), f.values.data(), f.values.size() * sizeof(double));
  return id;
}

std::span<const double> Tape::value(ValueId id) const {
  const Node& n = node(id);
  return {values_.data() + n.voff, n.size};
}

std::span<const double> Tape::grad(ValueId id) const {
  const Node& n = node(id);
  if (!grads_ready_) throw std::logic_error("grad: backward has not run");
  return {grads_.data() + n.voff, n.size};
}

void Tape::ensure_grads() {
  if (grads_.size() != values_.size()) grads_.assign(values_.size(), 0.0);
  grads_ready_ = true;
}

void Tape::zero_grads() {
  grads_.assign(values_.size(), 0.0);
}

void Tape::backward(ValueId root, std::span<const double> seed) {
  const Node& rn = node(root);
  require(seed.size() == rn.size, "backward: seed shape mismatch");
  ensure_grads();

  // Fresh adjoint pass into a scratch arena so repeated backward calls
  // accumulate without double-propagating earlier seeds.
  std::vector<double> scratch(values_.size(), 0.0);
  std::swap(scratch, grads_);
  double* root_g = grads_.data() + rn.voff;
  for (std::size_t i = 0; i < seed.size(); ++i) root_g[i] += seed[i];

  for (ValueId id = root; id >= 0; --id) {
    if (nodes_[static_cast<std::size_t>(id)].requires_grad) backward_node(id);
  }

  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += scratch[i];
}

void Tape::backward_node(ValueId id) {
  const Node& n = node(id);
  const double* u = grads_.data() + n.voff;  // this node's adjoint
  const auto parent_grad = [&](int k) {
    return grads_.data() + node(n.parents[static_cast<std::size_t>(k)]).voff;
  };
  const auto parent_val = [&](int k) { return val_ptr(n.parents[static_cast<std::size_t>(k)]); };
  const auto parent_needs = [&](int k) {
    ValueId p = n.parents[static_cast<std::size_t>(k)];
    return p != kNoValue && node(p).requires_grad;
  };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAffine: {
      const int rows = n.aux_i[0];
      const int cols = n.aux_i[1];
      const double* xp = parent_val(0);
      const double* wp = parent_val(1);
      if (parent_needs(0)) {
        double* gx = parent_grad(0);
        for (int r = 0; r < rows; ++r) {
          const double ur = u[r];
          if (ur == 0.0) continue;
          const double* wr = wp + static_cast<std::size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) gx[c] += ur * wr[c];
        }
      }
      if (parent_needs(1)) {
        double* gw = parent_grad(1);
        for (int r = 0; r < rows; ++r) {
          const double ur = u[r];
          if (ur == 0.0) continue;
          double* gwr = gw + static_cast<std::size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) gwr[c] += ur * xp[c];
        }
      }
      if (parent_needs(2)) {
        double* gb = parent_grad(2);
        for (int r = 0; r < rows; ++r) gb[r] += u[r];
      }
      break;
    }
    case Op::kTanh: {
      if (!parent_needs(0)) break;
      const double* yp = values_.data() + n.voff;
      double* gx = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) gx[i] += u[i] * (1.0 - yp[i] * yp[i]);
      break;
    }
    case Op::kSigmoid: {
      if (!parent_needs(0)) break;
      const double* yp = values_.data() + n.voff;
      double* gx = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) gx[i] += u[i] * yp[i] * (1.0 - yp[i]);
      break;
    }
    case Op::kExp: {
      if (!parent_needs(0)) break;
      const double* yp = values_.data() + n.voff;
      double* gx = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) gx[i] += u[i] * yp[i];
      break;
    }
    case Op::kLog: {
      if (!parent_needs(0)) break;
      const double* xp = parent_val(0);
      double* gx = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) gx[i] += u[i] / xp[i];
      break;
    }
    case Op::kAdd: {
      for (int k = 0; k < 2; ++k) {
        if (!parent_needs(k)) continue;
        double* g = parent_grad(k);
        for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i];
      }
      break;
    }
    case Op::kSub: {
      if (parent_needs(0)) {
        double* g = parent_grad(0);
        for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i];
      }
      if (parent_needs(1)) {
        double* g = parent_grad(1);
        for (std::uint32_t i = 0; i < n.size; ++i) g[i] -= u[i];
      }
      break;
    }
    case Op::kMul: {
      if (parent_needs(0)) {
        double* g = parent_grad(0);
        const double* bp = parent_val(1);
        for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i] * bp[i];
      }
      if (parent_needs(1)) {
        double* g = parent_grad(1);
        const double* ap = parent_val(0);
        for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i] * ap[i];
      }
      break;
    }
    case Op::kScale: {
      if (!parent_needs(0)) break;
      const double c = aux_ptr(n)[0];
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) g[i] += c * u[i];
      break;
    }
    case Op::kAddConst: {
      if (!parent_needs(0)) break;
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i];
      break;
    }
    case Op::kRSubConst: {
      if (!parent_needs(0)) break;
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) g[i] -= u[i];
      break;
    }
    case Op::kMulConst: {
      if (!parent_needs(0)) break;
      const double* cp = aux_ptr(n);
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < n.size; ++i) g[i] += cp[i] * u[i];
      break;
    }
    case Op::kConcat: {
      const std::uint32_t na = node(n.parents[0]).size;
      if (parent_needs(0)) {
        double* g = parent_grad(0);
        for (std::uint32_t i = 0; i < na; ++i) g[i] += u[i];
      }
      if (parent_needs(1)) {
        double* g = parent_grad(1);
        const std::uint32_t nb = node(n.parents[1]).size;
        for (std::uint32_t i = 0; i < nb; ++i) g[i] += u[na + i];
      }
      break;
    }
    case Op::kSlice: {
      if (!parent_needs(0)) break;
      double* g = parent_grad(0) + n.aux_i[0];
      for (std::uint32_t i = 0; i < n.size; ++i) g[i] += u[i];
      break;
    }
    case Op::kSqDistConst: {
      if (!parent_needs(0)) break;
      const double* xp = parent_val(0);
      const double* cp = aux_ptr(n);
      double* g = parent_grad(0);
      const std::uint32_t m = node(n.parents[0]).size;
      for (std::uint32_t i = 0; i < m; ++i) g[i] += 2.0 * (xp[i] - cp[i]) * u[0];
      break;
    }
    case Op::kSum: {
      if (!parent_needs(0)) break;
      double* g = parent_grad(0);
      const std::uint32_t m = node(n.parents[0]).size;
      for (std::uint32_t i = 0; i < m; ++i) g[i] += u[0];
      break;
    }
    case Op::kCrossEntropyPick: {
      if (!parent_needs(0)) break;
      const std::uint32_t m = node(n.parents[0]).size;
      const double* lp = parent_val(0);
      double mx = lp[0];
      for (std::uint32_t i = 1; i < m; ++i) mx = std::max(mx, lp[i]);
      double se = 0.0;
      for (std::uint32_t i = 0; i < m; ++i) se += std::exp(lp[i] - mx);
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < m; ++i) {
        const double soft = std::exp(lp[i] - mx) / se;
        g[i] += u[0] * (soft - (static_cast<int>(i) == n.aux_i[0] ? 1.0 : 0.0));
      }
      break;
    }
    case Op::kSoftCrossEntropy: {
      if (!parent_needs(0)) break;
      const std::uint32_t m = node(n.parents[0]).size;
      const double* lp = parent_val(0);
      const double* q = aux_ptr(n);
      double mx = lp[0];
      for (std::uint32_t i = 1; i < m; ++i) mx = std::max(mx, lp[i]);
      double se = 0.0;
      for (std::uint32_t i = 0; i < m; ++i) se += std::exp(lp[i] - mx);
      double* g = parent_grad(0);
      for (std::uint32_t i = 0; i < m; ++i) {
        g[i] += u[0] * (std::exp(lp[i] - mx) / se - q[i]);
      }
      break;
    }
    case Op::kSimStep:
    case Op::kSimInverseStep: {
      const SimConfig& cfg = sim_configs_[static_cast<std::size_t>(n.aux_i[0])];
      const VehicleState s = state_from(parent_val(0));
      const Action a = action_from(parent_val(1));
      StateVec up;
      std::memcpy(up.data(), u, sizeof(up));
      const StepVjp vjp =
          n.op == Op::kSimStep ? step_vjp(s, a, cfg, up) : inverse_step_vjp(s, a, cfg, up);
      if (parent_needs(0)) {
        double* g = parent_grad(0);
        for (int i = 0; i < kStateDim; ++i) g[i] += vjp.ds[static_cast<std::size_t>(i)];
      }
      if (parent_needs(1)) {
        double* g = parent_grad(1);
        for (int i = 0; i < kActionDim; ++i) g[i] += vjp.da[static_cast<std::size_t>(i)];
      }
      break;
    }
    case Op::kInvKin: {
      const SimConfig& cfg = sim_configs_[static_cast<std::size_t>(n.aux_i[0])];
      const VehicleState s = state_from(parent_val(0));
      const VehicleState t = state_from(parent_val(1));
      ActionVec up{u[0], u[1]};
      const InvKinVjp vjp = inv_kin_vjp(s, t, cfg, up);
      if (parent_needs(0)) {
        double* g = parent_grad(0);
        for (int i = 0; i < kStateDim; ++i) g[i] += vjp.ds[static_cast<std::size_t>(i)];
      }
      if (parent_needs(1)) {
        double* g = parent_grad(1);
        for (int i = 0; i < kStateDim; ++i) g[i] += vjp.dtarget[static_cast<std::size_t>(i)];
      }
      break;
    }
    case Op::kEncode: {
      if (!parent_needs(0)) break;
      const EncodeContext& ctx = encode_contexts_[static_cast<std::size_t>(n.aux_i[0])];
      const VehicleState s = state_from(parent_val(0));
      const StateVec ds = features_vjp(ctx, s, {u, n.size});
      double* g = parent_grad(0);
      for (int i = 0; i < kStateDim; ++i) g[i] += ds[static_cast<std::size_t>(i)];
      break;
    }
  }
}

void GradientAccumulator::add(const std::string& name, std::span<const double> g) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) {
    buffers_.emplace(name, std::vector<double>(g.begin(), g.end()));
    return;
  }
  if (it->second.size() != g.size())
    throw std::invalid_argument("GradientAccumulator: shape mismatch for " + name);
  for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
}

void GradientAccumulator::merge(const GradientAccumulator& other) {
  for (const auto& [name, buf] : other.buffers_) add(name, buf);
}

void GradientAccumulator::scale_all(double c) {
  for (auto& [name, buf] : buffers_) {
    (void)name;
    for (double& v : buf) v *= c;
  }
}

const std::vector<double>* GradientAccumulator::find(const std::string& name) const {
  auto it = buffers_.find(name);
  return it == buffers_.end() ? nullptr : &it->second;
}

double GradientAccumulator::global_norm() const {
  double acc = 0.0;
  for (const auto& [name, buf] : buffers_) {
    (void)name;
    for (double v : buf) acc += v * v;
  }
  return std::sqrt(acc);
}

void GradientAccumulator::clip_global_norm(double max_norm) {
  const double norm = global_norm();
  if (norm > max_norm && norm > 0.0) scale_all(max_norm / norm);
}

}  // namespace awm
