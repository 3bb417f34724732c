#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linf/config.hpp"
#include "linf/image.hpp"
#include "linf/implicit.hpp"
#include "linf/model.hpp"

namespace linf {

using Logger = std::function<void(std::string_view)>;

struct TrainConfig {
  std::size_t lr_crop = 16;
  double scale_min = 1.0;
  double scale_max = 4.0;
  std::size_t pairs_per_image = 0;  // 0 means lr_crop²
  std::size_t batch = 8;
  double lambda_nll = 5e-4;
  double lambda_l1 = 1.0;
  int stage = 1;
  double learning_rate = 1e-4;
  std::size_t steps = 2000;
  std::size_t steps_per_epoch = 100;
  std::vector<std::size_t> halve_at_epochs = {10, 15};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double dequant_amplitude = 1.0 / 255.0;
  bool hflip = true;

  std::size_t pairs() const { return pairs_per_image == 0 ? lr_crop * lr_crop : pairs_per_image; }
  /// Smallest corpus image side a crop can be drawn from.
  std::size_t min_image_side() const;
  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

/// Crops, degradations, and chosen (coordinate, target patch) pairs for one step.
struct TrainingBatch {
  Tensor lr;  // [N × lr_crop × lr_crop × 3]
  QueryBatch queries;
  Tensor targets;  // [B × D]
  std::vector<double> scales;  // drawn s per image
};

/// Draws `cfg.batch` crops from the images large enough for the widest scale;
/// smaller images are skipped with a warning through `log`.
TrainingBatch make_batch(std::span<const Image> corpus, const TrainConfig& cfg, std::size_t patch_n, std::mt19937_64& rng,
                         const Logger& log = {});

struct LossTerms {
  Var total;
  double nll = 0.0;    // mean −log p per patch
  double l1 = 0.0;     // mean |flow_mean − target| per element
  double value = 0.0;  // weighted total
};

/// Stage 1: λ₁·NLL. Stage 2 adds λ₂·L1 of the τ=0 patch. The L1 value is reported
/// in both stages. Throws TrainingError on a non-finite per-sample loss.
LossTerms compute_loss(const BoundParams& params, const ModelConfig& model, const TrainingBatch& batch,
                       const TrainConfig& cfg);

class Adam {
 public:
  Adam() = default;
  Adam(const ParamSet& like, double beta1, double beta2, double eps);

  void step(ParamSet& params, const ParamSet& grads, double lr);

  std::uint64_t steps() const { return steps_; }
  const ParamSet& first_moment() const { return m_; }
  const ParamSet& second_moment() const { return v_; }
  static Adam restore(ParamSet m, ParamSet v, std::uint64_t steps, double beta1, double beta2, double eps);

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t steps_ = 0;
  ParamSet m_, v_;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  TrainConfig train;
  std::size_t step = 0;  // completed optimizer steps
  std::size_t epoch = 0;
  ParamSet params;
  ParamSet adam_m, adam_v;
  std::uint64_t adam_steps = 0;

  LinfModel linf_model() const { return {model, params}; }
};

/// Sections [model], [train], [state]; inverse of apply_config below.
KeyValueConfig config_echo(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads [model] and [train] keys into the structs; unknown keys in those
/// sections throw ConfigError naming the key.
void read_model_config(ConfigReader& reader, ModelConfig& cfg);
void read_train_config(ConfigReader& reader, TrainConfig& cfg);
void write_model_config(KeyValueConfig& kv, const ModelConfig& cfg);
void write_train_config(KeyValueConfig& kv, const TrainConfig& cfg);

struct LogRow {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;
  double nll = 0.0, l1 = 0.0, total = 0.0, lr = 0.0;
  bool rejected = false;

  static std::string csv_header() { return "step,epoch,nll,l1,total,lr"; }
  std::string csv_row() const;
};

/// Single-context optimizer loop. Batch seeds derive from (seed, step), so a
/// checkpoint fully determines every later step.
class Trainer {
 public:
  Trainer(LinfModel model, TrainConfig cfg, std::vector<Image> corpus, Logger log = {});
  static Trainer resume(const Checkpoint& ckpt, std::vector<Image> corpus, Logger log = {});

  /// One optimizer step. A singular flow weight rejects the step and re-jitters it.
  LogRow step();
  std::size_t steps_done() const { return step_; }
  bool finished() const { return step_ >= cfg_.steps; }
  std::size_t epoch() const { return step_ / cfg_.steps_per_epoch; }

  Checkpoint checkpoint() const;
  const LinfModel& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  LinfModel model_;
  TrainConfig cfg_;
  std::vector<Image> corpus_;
  Logger log_;
  Adam adam_;
  std::size_t step_ = 0;
};

struct TrainOutputs {
  std::filesystem::path checkpoint_dir;  // empty: no per-epoch files
  std::filesystem::path log_csv;         // empty: no log file
  std::function<void(const LogRow&)> on_step;
};

/// Runs every remaining step, writing `epoch-<k>.linf` after each epoch and the log CSV.
Checkpoint train(Trainer& trainer, const TrainOutputs& outputs = {});

}  // namespace linf
