#include "linf/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "linf/errors.hpp"
#include "linf/flow.hpp"
#include "linf/lu.hpp"
#include "linf/ops.hpp"
#include "linf/pipeline.hpp"
#include "linf/resample.hpp"

namespace linf {

std::size_t TrainConfig::min_image_side() const {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(lr_crop) * scale_max));
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  double lr = learning_rate;
  for (std::size_t e : halve_at_epochs) {
    if (epoch >= e) lr *= 0.5;
  }
  return lr;
}

void TrainConfig::validate() const {
  if (lr_crop < 1) throw ConfigError("train.lr_crop must be >= 1");
  if (!(scale_min > 0.0) || !std::isfinite(scale_max) || scale_min > scale_max) {
    throw ConfigError("train.scale_min/scale_max must satisfy 0 < low <= high < inf");
  }
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(lambda_nll >= 0.0) || !(lambda_l1 >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (stage != 1 && stage != 2) throw ConfigError("train.stage must be 1 or 2");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (!(dequant_amplitude >= 0.0)) throw ConfigError("train.dequant_amplitude must be >= 0");
}

TrainingBatch make_batch(std::span<const Image> corpus, const TrainConfig& cfg, std::size_t patch_n, std::mt19937_64& rng,
                         const Logger& log) {
  const std::size_t need = cfg.min_image_side();
  std::vector<const Image*> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Image& img = corpus[i];
    if (img.height() < need || img.width() < need) {
      if (log) {
        log("warning: skipping corpus image " + std::to_string(i) + " (" + std::to_string(img.height()) + "x" +
            std::to_string(img.width()) + "), smaller than " + std::to_string(need) + " px");
      }
      continue;
    }
    eligible.push_back(&img);
  }
  if (eligible.empty()) throw TrainingError("no corpus image is at least " + std::to_string(need) + " px on each side");

  const std::size_t c = cfg.lr_crop;
  TrainingBatch b;
  b.lr = Tensor({cfg.batch, c, c, 3});
  std::vector<double> targets;
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::uniform_real_distribution<double> draw_scale(cfg.scale_min, cfg.scale_max);
  std::bernoulli_distribution flip(0.5);

  for (std::size_t k = 0; k < cfg.batch; ++k) {
    const Image& src = *eligible[pick(rng)];
    const double s = cfg.scale_min == cfg.scale_max ? cfg.scale_min : draw_scale(rng);
    b.scales.push_back(s);
    const ScaleSpec spec = ScaleSpec::make(s, c, c);
    const std::size_t hs = spec.dst_h;
    std::uniform_int_distribution<std::size_t> oy(0, src.height() - hs), ox(0, src.width() - hs);
    const std::size_t y0 = oy(rng), x0 = ox(rng);
    Image hr = src.crop(y0, x0, hs, hs);
    if (cfg.hflip && flip(rng)) hr = hr.flipped_horizontally();
    const Image lr = bicubic_resample(hr, c, c);
    std::copy(lr.data().begin(), lr.data().end(), b.lr.raw() + k * c * c * 3);

    const PatchGrid grid = build_grid(spec, patch_n);
    const Tensor t = extract_targets(hr, lr, grid, cfg.dequant_amplitude, &rng);
    const std::size_t total = grid.patch_count(), want = std::min(total, cfg.pairs());
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> swap_with(i, total - 1);
      std::swap(order[i], order[swap_with(rng)]);
    }
    const std::size_t d = grid.dim();
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t p = order[i];
      b.queries.add(k, c, c, grid.center(p / grid.cols, p % grid.cols), 2.0 / s);
      targets.insert(targets.end(), t.raw() + p * d, t.raw() + (p + 1) * d);
    }
  }
  const std::size_t d = 3 * patch_n * patch_n;
  b.targets = Tensor({b.queries.size(), d}, std::move(targets));
  return b;
}

LossTerms compute_loss(const BoundParams& params, const ModelConfig& model, const TrainingBatch& batch,
                       const TrainConfig& cfg) {
  Tape& tape = params.tape();
  const std::size_t n = batch.queries.size();
  if (batch.targets.rank() != 2 || batch.targets.extent(0) != n || batch.targets.extent(1) != model.dim()) {
    throw DimensionError("batch targets do not match the model patch size");
  }
  Var images = tape.constant(batch.lr);
  const HeadMaps heads = fourier_heads(params, model, encode(params, model.encoder, images));
  Var phases = phase_mlp(params, tape.constant(Tensor({n}, batch.queries.cells)));
  Var raw = conditioner_raw(params, fourier_ensemble(heads, phases, batch.queries, model));
  Var targets = tape.constant(batch.targets);

  Var logp = flow_log_prob(params, model.flow_layers, targets, raw);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(logp.value()[i])) {
      throw TrainingError("non-finite log-likelihood at batch index " + std::to_string(i));
    }
  }
  Var mu = flow_mean(params, model.flow_layers, raw);
  Var l1 = ad::mean(ad::abs(ad::sub(mu, targets)));
  Var nll = ad::neg(ad::mean(logp));

  LossTerms out;
  out.total = ad::scale(nll, cfg.lambda_nll);
  if (cfg.stage == 2) out.total = ad::add(out.total, ad::scale(l1, cfg.lambda_l1));
  out.nll = nll.value().item();
  out.l1 = l1.value().item();
  out.value = out.total.value().item();
  if (!std::isfinite(out.value)) {
    std::size_t bad = 0;
    const Tensor& m = mu.value();
    while (bad < n && std::all_of(m.raw() + bad * model.dim(), m.raw() + (bad + 1) * model.dim(),
                                  [](double v) { return std::isfinite(v); })) {
      ++bad;
    }
    throw TrainingError("non-finite loss at batch index " + std::to_string(bad));
  }
  return out;
}

Adam::Adam(const ParamSet& like, double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : like) {
    m_.set(name, Tensor(t.shape()));
    v_.set(name, Tensor(t.shape()));
  }
}

Adam Adam::restore(ParamSet m, ParamSet v, std::uint64_t steps, double beta1, double beta2, double eps) {
  Adam a;
  a.beta1_ = beta1;
  a.beta2_ = beta2;
  a.eps_ = eps;
  a.steps_ = steps;
  a.m_ = std::move(m);
  a.v_ = std::move(v);
  return a;
}

void Adam::step(ParamSet& params, const ParamSet& grads, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    Tensor& m = m_.get(name);
    Tensor& v = v_.get(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::string LogRow::csv_row() const {
  return std::to_string(step) + "," + std::to_string(epoch) + "," + format_double(nll) + "," + format_double(l1) + "," +
         format_double(total) + "," + format_double(lr);
}

Trainer::Trainer(LinfModel model, TrainConfig cfg, std::vector<Image> corpus, Logger log)
    : model_(std::move(model)), cfg_(std::move(cfg)), corpus_(std::move(corpus)), log_(std::move(log)) {
  cfg_.validate();
  model_.config.validate();
  adam_ = Adam(model_.params, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
  // Warn once here; batches only draw from eligible images afterwards.
  const std::size_t need = cfg_.min_image_side();
  std::vector<Image> kept;
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    if (corpus_[i].height() >= need && corpus_[i].width() >= need) {
      kept.push_back(std::move(corpus_[i]));
    } else if (log_) {
      log_("warning: skipping corpus image " + std::to_string(i) + ", smaller than " + std::to_string(need) + " px");
    }
  }
  corpus_ = std::move(kept);
  if (corpus_.empty()) throw TrainingError("no usable corpus images");
}

Trainer Trainer::resume(const Checkpoint& ckpt, std::vector<Image> corpus, Logger log) {
  Trainer t(ckpt.linf_model(), ckpt.train, std::move(corpus), std::move(log));
  t.adam_ = Adam::restore(ckpt.adam_m, ckpt.adam_v, ckpt.adam_steps, ckpt.train.adam_beta1, ckpt.train.adam_beta2,
                          ckpt.train.adam_eps);
  t.step_ = ckpt.step;
  return t;
}

LogRow Trainer::step() {
  LogRow row;
  row.step = step_ + 1;
  row.epoch = epoch();
  row.lr = cfg_.learning_rate_at(row.epoch);
  std::mt19937_64 rng = patch_rng(cfg_.seed, step_, 1);
  const TrainingBatch batch = make_batch(corpus_, cfg_, model_.config.patch_n, rng);
  try {
    Tape tape;
    BoundParams bound(tape, model_.params, true);
    const LossTerms loss = compute_loss(bound, model_.config, batch, cfg_);
    tape.backward(loss.total);
    adam_.step(model_.params, bound.gradients(), row.lr);
    row.nll = loss.nll;
    row.l1 = loss.l1;
    row.total = loss.value;
  } catch (const SingularMatrixError&) {
    std::mt19937_64 jitter = patch_rng(cfg_.seed, step_, 2);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (std::size_t k = 0; k < model_.config.flow_layers; ++k) {
      Tensor& w = model_.params.get("flow.W" + std::to_string(k));
      try {
        (void)lu_factor(w);
      } catch (const SingularMatrixError&) {
        for (double& v : w.data()) v += noise(jitter);
        if (log_) log_("step " + std::to_string(row.step) + ": singular flow.W" + std::to_string(k) + ", step rejected and weight re-jittered");
      }
    }
    row.rejected = true;
    row.nll = row.l1 = row.total = std::numeric_limits<double>::quiet_NaN();
  } catch (const TrainingError& e) {
    throw TrainingError("step " + std::to_string(row.step) + ": " + e.what());
  }
  ++step_;
  return row;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_.config;
  c.train = cfg_;
  c.step = step_;
  c.epoch = epoch();
  c.params = model_.params;
  c.adam_m = adam_.first_moment();
  c.adam_v = adam_.second_moment();
  c.adam_steps = adam_.steps();
  return c;
}

Checkpoint train(Trainer& trainer, const TrainOutputs& outputs) {
  std::ofstream log;
  if (!outputs.log_csv.empty()) {
    const bool append = trainer.steps_done() > 0 && std::filesystem::exists(outputs.log_csv);
    log.open(outputs.log_csv, append ? std::ios::app : std::ios::trunc);
    if (!log) throw Error("cannot write training log '" + outputs.log_csv.string() + "'");
    if (!append) log << LogRow::csv_header() << "\n";
  }
  if (!outputs.checkpoint_dir.empty()) std::filesystem::create_directories(outputs.checkpoint_dir);
  const std::size_t per_epoch = trainer.config().steps_per_epoch;
  while (!trainer.finished()) {
    const LogRow row = trainer.step();
    if (log) log << row.csv_row() << "\n";
    if (outputs.on_step) outputs.on_step(row);
    if (!outputs.checkpoint_dir.empty() && (trainer.steps_done() % per_epoch == 0 || trainer.finished())) {
      const std::size_t e = (trainer.steps_done() + per_epoch - 1) / per_epoch;
      save_checkpoint(trainer.checkpoint(), outputs.checkpoint_dir / ("epoch-" + std::to_string(e) + ".linf"));
    }
  }
  return trainer.checkpoint();
}

}  // namespace linf
