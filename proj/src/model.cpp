#include "awm/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace awm {

namespace {

bool is_zero_init(const std::string& name) {
  // final layers of all heads start at zero: initial head predictions are
  // the zero delta and initial policy means are the zero action
  return name.find(".out.") != std::string::npos;
}

std::string hex_from_double(double v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double double_from_hex(const std::string& s) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(std::stoull(s, nullptr, 16)));
}

}  // namespace

std::map<std::string, std::vector<int>> tensor_shapes(const ModelConfig& cfg) {
  std::map<std::string, std::vector<int>> shapes;
  const int gru_in = cfg.enc_out + cfg.hidden;
  shapes["enc.l1.w"] = {cfg.enc_hidden, cfg.feature_dim};
  shapes["enc.l1.b"] = {cfg.enc_hidden};
  shapes["enc.l2.w"] = {cfg.enc_out, cfg.enc_hidden};
  shapes["enc.l2.b"] = {cfg.enc_out};
  for (const char* gate : {"z", "r", "h"}) {
    shapes[std::string("gru.") + gate + ".w"] = {cfg.hidden, gru_in};
    shapes[std::string("gru.") + gate + ".b"] = {cfg.hidden};
  }
  shapes["policy.l1.w"] = {cfg.head_hidden, cfg.hidden};
  shapes["policy.l1.b"] = {cfg.head_hidden};
  shapes["policy.out.w"] = {cfg.policy_out_dim(), cfg.head_hidden};
  shapes["policy.out.b"] = {cfg.policy_out_dim()};
  for (const char* head : {"odo", "inv"}) {
    shapes[std::string(head) + ".l1.w"] = {cfg.head_hidden, cfg.hidden + kActionDim};
    shapes[std::string(head) + ".l1.b"] = {cfg.head_hidden};
    shapes[std::string(head) + ".out.w"] = {kStateDim, cfg.head_hidden};
    shapes[std::string(head) + ".out.b"] = {kStateDim};
  }
  shapes["plan.l1.w"] = {cfg.head_hidden, cfg.hidden};
  shapes["plan.l1.b"] = {cfg.head_hidden};
  shapes["plan.out.w"] = {kStateDim, cfg.head_hidden};
  shapes["plan.out.b"] = {kStateDim};
  return shapes;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p;
  p.cfg_ = cfg;
  Rng rng(derive_seed({0x90de1u, seed}));
  for (const auto& [name, dims] : tensor_shapes(cfg)) {
    Tensor t;
    t.dims = dims;
    t.data.assign(static_cast<std::size_t>(Tensor{dims, {}}.size()), 0.0);
    if (!is_zero_init(name) && name.ends_with(".w")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims.back()));
      for (double& v : t.data) v = rng.uniform(-bound, bound);
    }
    p.tensors_.emplace(name, std::move(t));
  }
  return p;
}

Tensor& ModelParams::tensor(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no tensor " + name);
  return it->second;
}

const Tensor& ModelParams::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no tensor " + name);
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) {
    (void)name;
    n += t.data.size();
  }
  return n;
}

// --- checkpoint io ---

namespace {

constexpr char kMagic[4] = {'A', 'W', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64(std::string& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > buf.size())
      throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  const ModelConfig& cfg = params.config();
  nlohmann::json meta;
  meta["feature_dim"] = cfg.feature_dim;
  meta["enc_hidden"] = cfg.enc_hidden;
  meta["enc_out"] = cfg.enc_out;
  meta["hidden"] = cfg.hidden;
  meta["head_hidden"] = cfg.head_hidden;
  meta["mixture"] = cfg.mixture;
  meta["logstd_offset"] = {hex_from_double(cfg.logstd_offset[0]),
                           hex_from_double(cfg.logstd_offset[1])};
  meta["sigma_min"] = {hex_from_double(cfg.sigma_min[0]), hex_from_double(cfg.sigma_min[1])};
  const std::string meta_str = meta.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(meta_str.size()));
  out += meta_str;
  put_u32(out, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [name, t] : params.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data) put_f64(out, v);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "not a checkpoint file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError(CheckpointError::Kind::kVersion,
                          "unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t meta_len = r.u32();
  const std::string meta_str = r.bytes(meta_len);
  ModelConfig cfg;
  try {
    const nlohmann::json meta = nlohmann::json::parse(meta_str);
    cfg.feature_dim = meta.at("feature_dim").get<int>();
    cfg.enc_hidden = meta.at("enc_hidden").get<int>();
    cfg.enc_out = meta.at("enc_out").get<int>();
    cfg.hidden = meta.at("hidden").get<int>();
    cfg.head_hidden = meta.at("head_hidden").get<int>();
    cfg.mixture = meta.at("mixture").get<int>();
    cfg.logstd_offset = {double_from_hex(meta.at("logstd_offset").at(0).get<std::string>()),
                         double_from_hex(meta.at("logstd_offset").at(1).get<std::string>())};
    cfg.sigma_min = {double_from_hex(meta.at("sigma_min").at(0).get<std::string>()),
                     double_from_hex(meta.at("sigma_min").at(1).get<std::string>())};
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kMetadata,
                          std::string("bad checkpoint metadata: ") + e.what());
  }

  const auto expected = tensor_shapes(cfg);
  ModelParams params;
  params.cfg_ = cfg;

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    Tensor t;
    for (std::uint32_t d = 0; d < rank; ++d) t.dims.push_back(static_cast<int>(r.u32()));
    const auto it = expected.find(name);
    if (it == expected.end())
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "unexpected tensor " + name);
    if (it->second != t.dims)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "shape mismatch for tensor " + name);
    const int n = t.size();
    t.data.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) t.data.push_back(r.f64());
    params.tensors_.emplace(name, std::move(t));
  }
  if (params.tensors_.size() != expected.size())
    throw CheckpointError(CheckpointError::Kind::kTruncated, "missing tensors in checkpoint");
  return params;
}

// --- forward builders ---

ValueId BoundParams::at(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw std::out_of_range("unbound parameter " + name);
  return it->second;
}

BoundParams bind_params(Tape& tape, const ModelParams& params, const TrainablePred& trainable) {
  BoundParams bound;
  for (const auto& [name, t] : params.tensors()) {
    const bool req = trainable ? trainable(name) : true;
    bound.ids.emplace(name, tape.leaf(t.data, req));
  }
  return bound;
}

namespace {

ValueId dense(Tape& tape, const BoundParams& p, const std::string& prefix, ValueId x, int rows,
              int cols) {
  return tape.affine(x, p.at(prefix + ".w"), p.at(prefix + ".b"), rows, cols);
}

}  // namespace

ValueId encoder_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg,
                        ValueId features) {
  ValueId h1 = tape.tanh(dense(tape, p, "enc.l1", features, cfg.enc_hidden, cfg.feature_dim));
  return tape.tanh(dense(tape, p, "enc.l2", h1, cfg.enc_out, cfg.enc_hidden));
}

ValueId core_step(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId enc_out,
                  ValueId hidden) {
  const int in = cfg.enc_out + cfg.hidden;
  ValueId xh = tape.concat(enc_out, hidden);
  ValueId z = tape.sigmoid(dense(tape, p, "gru.z", xh, cfg.hidden, in));
  ValueId r = tape.sigmoid(dense(tape, p, "gru.r", xh, cfg.hidden, in));
  ValueId xrh = tape.concat(enc_out, tape.mul(r, hidden));
  ValueId cand = tape.tanh(dense(tape, p, "gru.h", xrh, cfg.hidden, in));
  // h' = h + z * (cand - h)
  return tape.add(hidden, tape.mul(z, tape.sub(cand, hidden)));
}

MixtureIds policy_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg,
                          ValueId hidden) {
  ValueId h1 = tape.tanh(dense(tape, p, "policy.l1", hidden, cfg.head_hidden, cfg.hidden));
  ValueId out = dense(tape, p, "policy.out", h1, cfg.policy_out_dim(), cfg.head_hidden);
  MixtureIds ids;
  ids.means = tape.slice(out, 0, cfg.mixture_dim());
  ids.raw_logstd = tape.slice(out, cfg.mixture_dim(), cfg.mixture_dim());
  ids.logits = tape.slice(out, 2 * cfg.mixture_dim(), cfg.mixture);
  ids.pre_out = h1;
  return ids;
}

namespace {

ValueId delta_head(Tape& tape, const BoundParams& p, const ModelConfig& cfg,
                   const std::string& head, ValueId input, int in_dim) {
  ValueId h1 = tape.tanh(dense(tape, p, head + ".l1", input, cfg.head_hidden, in_dim));
  return dense(tape, p, head + ".out", h1, kStateDim, cfg.head_hidden);
}

}  // namespace

ValueId odometry_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden,
                         ValueId action) {
  return delta_head(tape, p, cfg, "odo", tape.concat(hidden, action), cfg.hidden + kActionDim);
}

ValueId planner_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden) {
  ValueId raw = delta_head(tape, p, cfg, "plan", hidden, cfg.hidden);
  // velocity channels are amplified by 1/dt inside the inverse kinematics;
  // pre-scaling balances the loss curvature across output channels
  const std::array<double, 5> scale = {1.0, 1.0, 0.1, 0.1, 1.0};
  return tape.mul_const(raw, scale);
}

ValueId inverse_forward(Tape& tape, const BoundParams& p, const ModelConfig& cfg, ValueId hidden,
                        ValueId action) {
  return delta_head(tape, p, cfg, "inv", tape.concat(hidden, action), cfg.hidden + kActionDim);
}

MixtureValues read_mixture(const Tape& tape, const MixtureIds& ids, const ModelConfig& cfg) {
  MixtureValues mix;
  mix.components = cfg.mixture;
  const auto means = tape.value(ids.means);
  const auto raw = tape.value(ids.raw_logstd);
  const auto logits = tape.value(ids.logits);
  mix.means.assign(means.begin(), means.end());
  mix.logits.assign(logits.begin(), logits.end());
  mix.stds.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    mix.stds[i] = cfg.sigma_min[i % 2] + std::exp(raw[i] + cfg.logstd_offset[i % 2]);
  }
  return mix;
}

int sample_component(const MixtureValues& mix, Rng& rng) {
  double mx = mix.logits[0];
  for (double l : mix.logits) mx = std::max(mx, l);
  double total = 0.0;
  std::vector<double> probs(mix.logits.size());
  for (std::size_t i = 0; i < mix.logits.size(); ++i) {
    probs[i] = std::exp(mix.logits[i] - mx);
    total += probs[i];
  }
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return mix.components - 1;
}

Action component_action(const MixtureValues& mix, int component, Rng& rng, double noise_scale) {
  const std::size_t base = static_cast<std::size_t>(2 * component);
  Action a;
  a.accel = mix.means[base] + noise_scale * mix.stds[base] * rng.normal();
  a.curvature = mix.means[base + 1] + noise_scale * mix.stds[base + 1] * rng.normal();
  return a;
}

namespace {

std::array<double, 5> eval_delta_head(const ModelParams& params, const char* head,
                                      std::span<const double> hidden, const Action& a) {
  Tape tape;
  const std::string prefix = head;
  BoundParams bound;
  for (const char* suffix : {".l1.w", ".l1.b", ".out.w", ".out.b"}) {
    const std::string name = prefix + suffix;
    bound.ids.emplace(name, tape.leaf(params.tensor(name).data, false));
  }
  ValueId h = tape.constant(hidden);
  const ActionVec av = to_vec(a);
  ValueId act = tape.constant(av);
  const ModelConfig& cfg = params.config();
  ValueId out = delta_head(tape, bound, cfg, prefix, tape.concat(h, act),
                           cfg.hidden + kActionDim);
  const auto v = tape.value(out);
  return {v[0], v[1], v[2], v[3], v[4]};
}

}  // namespace

std::array<double, 5> eval_odometry_head(const ModelParams& params, std::span<const double> hidden,
                                         const Action& a) {
  return eval_delta_head(params, "odo", hidden, a);
}

std::array<double, 5> eval_inverse_head(const ModelParams& params, std::span<const double> hidden,
                                        const Action& a) {
  return eval_delta_head(params, "inv", hidden, a);
}

void collect_param_grads(const Tape& tape, const BoundParams& bound, const ModelParams& params,
                         const TrainablePred& trainable, GradientAccumulator* acc) {
  for (const auto& [name, id] : bound.ids) {
    if (trainable && !trainable(name)) continue;
    (void)params;
    acc->add(name, tape.grad(id));
  }
}

}  // namespace awm
