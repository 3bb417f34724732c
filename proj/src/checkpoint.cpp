#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "linf/errors.hpp"
#include "linf/training.hpp"

namespace linf {
namespace {

constexpr char kMagic[4] = {'L', 'I', 'N', 'F'};
const std::string kAdamM = "adam.m:";
const std::string kAdamV = "adam.v:";

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void tensor(const std::string& name, const Tensor& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) u64(e);
    for (double v : t.data()) f64(v);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) {
    if (b_.size() - pos_ < n) throw ParseError("checkpoint truncated", pos_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

void read_model_config(ConfigReader& r, ModelConfig& cfg) {
  r.read("model.patch_n", cfg.patch_n);
  r.read("model.frequencies", cfg.frequencies);
  r.read("model.flow_layers", cfg.flow_layers);
  r.read("model.conditioner_width", cfg.conditioner_width);
  r.read("model.phase_hidden", cfg.phase_hidden);
  r.read("model.channels", cfg.encoder.channels);
  r.read("model.residual_blocks", cfg.encoder.residual_blocks);
  r.read("model.kernel", cfg.encoder.kernel);
  std::string weighting = to_string(cfg.weighting);
  r.read("model.weighting", weighting);
  cfg.weighting = parse_weighting(weighting);
  std::string order = kFlowLayerOrder;
  r.read("model.layer_order", order);
  if (order != kFlowLayerOrder) throw FormatError("unsupported flow layer order '" + order + "'");
}

void read_train_config(ConfigReader& r, TrainConfig& cfg) {
  r.read("train.lr_crop", cfg.lr_crop);
  r.read("train.scale_min", cfg.scale_min);
  r.read("train.scale_max", cfg.scale_max);
  r.read("train.pairs_per_image", cfg.pairs_per_image);
  r.read("train.batch", cfg.batch);
  r.read("train.lambda_nll", cfg.lambda_nll);
  r.read("train.lambda_l1", cfg.lambda_l1);
  r.read("train.stage", cfg.stage);
  r.read("train.learning_rate", cfg.learning_rate);
  r.read("train.steps", cfg.steps);
  r.read("train.steps_per_epoch", cfg.steps_per_epoch);
  r.read("train.halve_at_epochs", cfg.halve_at_epochs);
  r.read("train.adam_beta1", cfg.adam_beta1);
  r.read("train.adam_beta2", cfg.adam_beta2);
  r.read("train.adam_eps", cfg.adam_eps);
  r.read("train.seed", cfg.seed);
  r.read("train.dequant_amplitude", cfg.dequant_amplitude);
  r.read("train.hflip", cfg.hflip);
}

void write_model_config(KeyValueConfig& kv, const ModelConfig& cfg) {
  kv.set("model.patch_n", std::to_string(cfg.patch_n));
  kv.set("model.frequencies", std::to_string(cfg.frequencies));
  kv.set("model.flow_layers", std::to_string(cfg.flow_layers));
  kv.set("model.conditioner_width", std::to_string(cfg.conditioner_width));
  kv.set("model.phase_hidden", std::to_string(cfg.phase_hidden));
  kv.set("model.channels", std::to_string(cfg.encoder.channels));
  kv.set("model.residual_blocks", std::to_string(cfg.encoder.residual_blocks));
  kv.set("model.kernel", std::to_string(cfg.encoder.kernel));
  kv.set("model.weighting", to_string(cfg.weighting));
  kv.set("model.layer_order", kFlowLayerOrder);
}

void write_train_config(KeyValueConfig& kv, const TrainConfig& cfg) {
  kv.set("train.lr_crop", std::to_string(cfg.lr_crop));
  kv.set("train.scale_min", format_double(cfg.scale_min));
  kv.set("train.scale_max", format_double(cfg.scale_max));
  kv.set("train.pairs_per_image", std::to_string(cfg.pairs_per_image));
  kv.set("train.batch", std::to_string(cfg.batch));
  kv.set("train.lambda_nll", format_double(cfg.lambda_nll));
  kv.set("train.lambda_l1", format_double(cfg.lambda_l1));
  kv.set("train.stage", std::to_string(cfg.stage));
  kv.set("train.learning_rate", format_double(cfg.learning_rate));
  kv.set("train.steps", std::to_string(cfg.steps));
  kv.set("train.steps_per_epoch", std::to_string(cfg.steps_per_epoch));
  kv.set("train.halve_at_epochs", join(cfg.halve_at_epochs));
  kv.set("train.adam_beta1", format_double(cfg.adam_beta1));
  kv.set("train.adam_beta2", format_double(cfg.adam_beta2));
  kv.set("train.adam_eps", format_double(cfg.adam_eps));
  kv.set("train.seed", std::to_string(cfg.seed));
  kv.set("train.dequant_amplitude", format_double(cfg.dequant_amplitude));
  kv.set("train.hflip", cfg.hflip ? "true" : "false");
}

KeyValueConfig config_echo(const Checkpoint& ckpt) {
  KeyValueConfig kv;
  write_model_config(kv, ckpt.model);
  write_train_config(kv, ckpt.train);
  kv.set("state.step", std::to_string(ckpt.step));
  kv.set("state.epoch", std::to_string(ckpt.epoch));
  kv.set("state.adam_steps", std::to_string(ckpt.adam_steps));
  // Batch and jitter streams are derived from (train.seed, step); this is the whole RNG state.
  kv.set("state.rng_stream", std::to_string(ckpt.train.seed) + ":" + std::to_string(ckpt.step));
  return kv;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
  w.u32(Checkpoint::kVersion);
  w.str(config_echo(ckpt).to_text());
  w.u32(static_cast<std::uint32_t>(ckpt.params.count() + ckpt.adam_m.count() + ckpt.adam_v.count()));
  for (const auto& [name, t] : ckpt.params) w.tensor(name, t);
  for (const auto& [name, t] : ckpt.adam_m) w.tensor(kAdamM + name, t);
  for (const auto& [name, t] : ckpt.adam_v) w.tensor(kAdamV + name, t);
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader body(bytes);
  body.need(4);
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw ParseError("not a checkpoint (bad magic)", 0);
  body.skip(4);
  const std::uint32_t version = body.u32();
  if (version != Checkpoint::kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const KeyValueConfig kv = KeyValueConfig::parse(body.str(), "checkpoint header");

  Checkpoint c;
  ConfigReader cr(kv);
  read_model_config(cr, c.model);
  read_train_config(cr, c.train);
  cr.read("state.step", c.step);
  cr.read("state.epoch", c.epoch);
  cr.read("state.adam_steps", c.adam_steps);
  std::string stream;
  cr.read("state.rng_stream", stream);
  cr.reject_unknown({"model.", "train.", "state."});

  const std::uint32_t count = body.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = body.str();
    const std::uint32_t rank = body.u32();
    Shape shape(rank);
    for (auto& e : shape) e = body.u64();
    const std::size_t n = shape_size(shape);
    body.need(n * 8);
    std::vector<double> data(n);
    for (double& v : data) v = body.f64();
    Tensor t(shape, std::move(data));
    if (name.rfind(kAdamM, 0) == 0) {
      c.adam_m.set(name.substr(kAdamM.size()), std::move(t));
    } else if (name.rfind(kAdamV, 0) == 0) {
      c.adam_v.set(name.substr(kAdamV.size()), std::move(t));
    } else {
      c.params.set(name, std::move(t));
    }
  }
  if (!body.done()) throw ParseError("trailing bytes after checkpoint records", body.pos());
  c.model.validate();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read model file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace linf
