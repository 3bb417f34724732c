#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linf/config.hpp"
#include "linf/corpus.hpp"
#include "linf/errors.hpp"
#include "linf/flow.hpp"
#include "linf/image_io.hpp"
#include "linf/metrics.hpp"
#include "linf/pipeline.hpp"
#include "linf/training.hpp"
#include "linf/verify.hpp"

namespace fs = std::filesystem;
using namespace linf;

namespace {

constexpr int kOk = 0, kVerifyFailed = 1, kUsage = 2, kRuntime = 3;

struct Common {
  std::string config, model, out, ensemble, weighting, tau_text;
  double scale = 0.0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> patch_n;
  std::size_t samples = 5;
  std::string level = "fast", fault;
  std::vector<std::string> inputs;
};

double default_tau(double scale) {
  if (scale <= 4.0) return 0.5;
  if (scale <= 6.0) return 0.4;
  return 0.2;
}

std::vector<double> parse_taus(const Common& c) {
  if (c.tau_text.empty()) return {default_tau(c.scale)};
  std::vector<double> taus = parse_double_list(c.tau_text, "--tau");
  for (double t : taus) {
    if (!(t >= 0.0)) throw UsageError("--tau values must be non-negative");
  }
  return taus;
}

std::string tau_list(const std::vector<double>& taus) {
  std::string s;
  for (double t : taus) s += (s.empty() ? "" : ",") + format_double(t);
  return s;
}

void print_banner(std::ostream& os, const std::string& verb, const KeyValueConfig& kv) {
  os << "# linf " << verb << "\n";
  std::istringstream lines(kv.to_text());
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) os << "#   " << line << "\n";
  }
  os.flush();
}

/// Loads the checkpoint and applies --patch-n / --weighting / --ensemble.
LinfModel load_model(const Common& c, SrOptions& opts) {
  if (c.model.empty()) throw UsageError("--model is required");
  LinfModel m = load_checkpoint(c.model).linf_model();
  if (c.patch_n && *c.patch_n != m.config.patch_n) {
    throw UsageError("--patch-n " + std::to_string(*c.patch_n) + " does not match the model (n = " +
                     std::to_string(m.config.patch_n) + ")");
  }
  if (!c.weighting.empty()) m.config.weighting = parse_weighting(c.weighting);
  if (!c.ensemble.empty()) opts.mode = parse_ensemble_mode(c.ensemble);
  return m;
}

void echo_sr(KeyValueConfig& kv, const Common& c, const LinfModel* m, const SrOptions& opts, const std::string& taus) {
  kv.set("run.model", m ? c.model : "none (bilinear baseline)");
  kv.set("run.scale", format_double(c.scale));
  kv.set("run.tau", taus);
  kv.set("run.seed", std::to_string(opts.seed));
  kv.set("run.ensemble", to_string(opts.mode));
  if (m) {
    kv.set("run.weighting", to_string(m->config.weighting));
    kv.set("run.patch_n", std::to_string(m->config.patch_n));
  }
  kv.set("run.threads", std::to_string(default_thread_count()));
}

void check_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw UsageError("--scale must be positive, got " + format_double(s));
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& c) {
  KeyValueConfig file;
  if (!c.config.empty()) {
    file = KeyValueConfig::load(c.config);
  } else if (c.model.empty()) {
    throw UsageError("train needs --config (or --model to resume)");
  }

  KeyValueConfig kv;
  std::optional<Checkpoint> resume;
  if (!c.model.empty()) {
    resume = load_checkpoint(c.model);
    KeyValueConfig echo = config_echo(*resume);
    for (const auto& [k, v] : echo.entries()) {
      if (k.rfind("model.", 0) == 0 || k.rfind("train.", 0) == 0) kv.set(k, v);
    }
    for (const auto& [k, v] : file.entries()) {
      if (k.rfind("model.", 0) == 0 && kv.get(k) != v) {
        throw ConfigError("config key '" + k + "' differs from the checkpoint being resumed");
      }
    }
  }
  for (const auto& [k, v] : file.entries()) kv.set(k, v);
  if (c.seed) kv.set("train.seed", std::to_string(*c.seed));
  if (c.patch_n) kv.set("model.patch_n", std::to_string(*c.patch_n));
  if (!c.weighting.empty()) kv.set("model.weighting", c.weighting);
  if (!c.out.empty()) kv.set("output.dir", c.out);

  ConfigReader reader(kv);
  ModelConfig model;
  TrainConfig train;
  read_model_config(reader, model);
  read_train_config(reader, train);
  std::string corpus_dir, out_dir = "linf-run", log_name = "train_log.csv";
  std::size_t count = 32, size = 96, corpus_seed = 0;
  reader.read("corpus.dir", corpus_dir);
  reader.read("corpus.procedural_count", count);
  reader.read("corpus.procedural_size", size);
  reader.read("corpus.procedural_seed", corpus_seed);
  reader.read("output.dir", out_dir);
  reader.read("output.log", log_name);
  reader.reject_unknown({""});
  model.validate();
  train.validate();

  // Resolved values, including defaults, go into the banner.
  write_model_config(kv, model);
  write_train_config(kv, train);
  if (corpus_dir.empty()) {
    kv.set("corpus.procedural_count", std::to_string(count));
    kv.set("corpus.procedural_size", std::to_string(size));
    kv.set("corpus.procedural_seed", std::to_string(corpus_seed));
  }
  kv.set("output.dir", out_dir);
  kv.set("output.log", log_name);
  if (resume) kv.set("run.resume", c.model + " (step " + std::to_string(resume->step) + ")");
  print_banner(std::cout, "train", kv);
  std::cout << "# seed " << train.seed << "\n";

  std::vector<Image> corpus = corpus_dir.empty() ? procedural_corpus(count, size, corpus_seed) : load_image_dir(corpus_dir);
  if (corpus.empty()) throw UsageError("corpus is empty");
  auto log = [](std::string_view m) { std::cerr << m << "\n"; };

  Trainer trainer = [&] {
    if (!resume) return Trainer(LinfModel::create(model, train.seed), train, std::move(corpus), log);
    Checkpoint ck = *resume;
    ck.train = train;
    return Trainer::resume(ck, std::move(corpus), log);
  }();

  const fs::path dir = out_dir;
  TrainOutputs outputs;
  outputs.checkpoint_dir = dir;
  outputs.log_csv = dir / log_name;
  double nll_sum = 0.0;
  std::size_t nll_count = 0;
  const auto t0 = std::chrono::steady_clock::now();
  outputs.on_step = [&](const LogRow& row) {
    if (!row.rejected) {
      nll_sum += row.nll;
      ++nll_count;
    }
    if (row.step % train.steps_per_epoch == 0 || row.step == train.steps) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("step %zu epoch %zu mean_nll %.5f l1 %.5f lr %g (%.1f s)\n", row.step, row.epoch,
                  nll_count ? nll_sum / nll_count : 0.0, row.l1, row.lr, sec);
      std::fflush(stdout);
      nll_sum = 0.0;
      nll_count = 0;
    }
  };
  fs::create_directories(dir);
  const Checkpoint final_state = linf::train(trainer, outputs);
  save_checkpoint(final_state, dir / "final.linf");
  std::cout << "wrote " << (dir / "final.linf").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- sr

int cmd_sr(const Common& c) {
  check_scale(c.scale);
  if (c.inputs.size() != 1) throw UsageError("sr takes exactly one input image");
  if (c.out.empty()) throw UsageError("sr needs --out");
  SrOptions opts;
  const LinfModel m = load_model(c, opts);
  const std::vector<double> taus = parse_taus(c);
  if (taus.size() != 1) throw UsageError("sr takes a single --tau");
  opts.tau = taus[0];
  opts.seed = c.seed.value_or(0);
  PassCounters counters;
  opts.counters = &counters;

  KeyValueConfig kv;
  kv.set("run.input", c.inputs[0]);
  kv.set("run.out", c.out);
  echo_sr(kv, c, &m, opts, format_double(opts.tau));
  print_banner(std::cout, "sr", kv);

  const Image lr = read_image(c.inputs[0]);
  const auto t0 = std::chrono::steady_clock::now();
  const Image out = super_resolve(lr, c.scale, m, opts);
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_image(out, c.out);
  const PatchGrid g = build_grid(ScaleSpec::make(c.scale, lr.height(), lr.width()), m.config.patch_n);
  std::printf("output %zux%zu, patch grid %zux%zu = %zu patches\n", out.height(), out.width(), g.rows, g.cols,
              g.patch_count());
  std::printf("passes: conditioner %llu, flow %llu\n", static_cast<unsigned long long>(counters.conditioner.load()),
              static_cast<unsigned long long>(counters.flow.load()));
  std::printf("wall time %.3f s\n", sec);
  return kOk;
}

// ---------------------------------------------------------------- sweep / metrics

struct CsvSink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit CsvSink(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw UsageError("cannot write '" + path + "'");
    os = &file;
  }
  std::ostream& banner_stream() { return os == &std::cout ? std::cerr : std::cout; }
};

std::vector<NamedImage> load_eval_corpus(const Common& c) {
  if (c.inputs.size() != 1) throw UsageError("expected one corpus argument (directory or procedural:COUNT:SIZE:SEED)");
  auto corpus = load_corpus(c.inputs[0]);
  if (corpus.empty()) throw UsageError("corpus '" + c.inputs[0] + "' contains no images");
  return corpus;
}

int cmd_sweep(const Common& c) {
  check_scale(c.scale);
  if (c.tau_text.empty()) throw UsageError("sweep needs --tau, e.g. --tau 0,0.4,0.8");
  SrOptions opts;
  const LinfModel m = load_model(c, opts);
  const std::vector<double> taus = parse_taus(c);
  opts.seed = c.seed.value_or(0);
  const auto corpus = load_eval_corpus(c);
  CsvSink sink(c.out);
  KeyValueConfig kv;
  kv.set("run.corpus", c.inputs[0] + " (" + std::to_string(corpus.size()) + " images)");
  kv.set("run.samples", std::to_string(c.samples));
  echo_sr(kv, c, &m, opts, tau_list(taus));
  print_banner(sink.banner_stream(), "sweep", kv);

  std::vector<EvalPair> pairs;
  for (const auto& img : corpus) pairs.push_back(make_eval_pair(img.image, c.scale));
  *sink.os << "tau,psnr_y,ssim,diversity\n";
  for (double tau : taus) {
    double py = 0.0, ss = 0.0, dv = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      SrOptions o = opts;
      o.tau = tau;
      o.seed = opts.seed + i * c.samples;
      const MetricReport r = evaluate_pair(pairs[i], c.scale, &m, o, c.samples);
      py += r.psnr_y / pairs.size();
      ss += r.ssim / pairs.size();
      dv += r.diversity / pairs.size();
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f", format_double(tau).c_str(), format_db(py).c_str(), ss, dv);
    *sink.os << buf << "\n";
  }
  return kOk;
}

int cmd_metrics(const Common& c) {
  check_scale(c.scale);
  SrOptions opts;
  std::optional<LinfModel> m;
  if (!c.model.empty()) m = load_model(c, opts);
  const std::vector<double> taus = c.tau_text.empty() ? std::vector<double>{0.0} : parse_taus(c);
  opts.seed = c.seed.value_or(0);
  const auto corpus = load_eval_corpus(c);
  CsvSink sink(c.out);
  KeyValueConfig kv;
  kv.set("run.corpus", c.inputs[0] + " (" + std::to_string(corpus.size()) + " images)");
  kv.set("run.samples", std::to_string(c.samples));
  echo_sr(kv, c, m ? &*m : nullptr, opts, tau_list(taus));
  print_banner(sink.banner_stream(), "metrics", kv);

  *sink.os << MetricReport::csv_header() << "\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const EvalPair pair = make_eval_pair(corpus[i].image, c.scale);
    for (double tau : (m ? taus : std::vector<double>{0.0})) {
      SrOptions o = opts;
      o.tau = tau;
      o.seed = opts.seed + i * c.samples;
      MetricReport r = evaluate_pair(pair, c.scale, m ? &*m : nullptr, o, c.samples);
      r.image_id = corpus[i].id;
      *sink.os << r.csv_row() << "\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Common& c) {
  const verify::Level level = verify::parse_level(c.level);
  if (!c.fault.empty()) {
    if (c.fault != "transpose-inverse") throw UsageError("unknown fault '" + c.fault + "'");
    testing::set_transposed_inverse_fault(true);
  }
  const std::uint64_t seed = c.seed.value_or(0);
  std::printf("# linf verify\n#   level = %s\n#   seed = %llu\n", c.level.c_str(), static_cast<unsigned long long>(seed));
  if (!c.fault.empty()) std::printf("#   injected fault = %s\n", c.fault.c_str());
  std::fflush(stdout);
  const auto results = verify::run_suite(level, seed, [](const verify::OracleResult& r) {
    std::printf("%-4s  %-30s %7.2f s  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    std::fflush(stdout);
  });
  std::vector<std::string> failed;
  for (const auto& r : results) {
    if (!r.passed) failed.push_back(r.name);
  }
  std::printf("%zu/%zu oracles passed\n", results.size() - failed.size(), results.size());
  if (failed.empty()) return kOk;
  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "verification failed: %s\n", list.c_str());
  return kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LINF: local implicit normalizing flow super-resolution"};
  app.require_subcommand(1);
  Common c;

  auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--model", c.model, "checkpoint file");
    sub->add_option("--scale", c.scale, "upsampling factor s > 0")->required();
    sub->add_option("--seed", c.seed, "sampling seed");
    sub->add_option("--out", c.out, "output path");
    sub->add_option("--ensemble", c.ensemble, "fourier or local")->check(CLI::IsMember({"fourier", "local"}));
    sub->add_option("--weighting", c.weighting, "full or none")->check(CLI::IsMember({"full", "none"}));
    sub->add_option("--patch-n", c.patch_n, "patch side n (must match the model)");
  };

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", c.config, "config file");
  train->add_option("--model", c.model, "checkpoint to resume from");
  train->add_option("--seed", c.seed, "overrides train.seed");
  train->add_option("--out", c.out, "overrides output.dir");
  train->add_option("--weighting", c.weighting, "overrides model.weighting")->check(CLI::IsMember({"full", "none"}));
  train->add_option("--patch-n", c.patch_n, "overrides model.patch_n");

  auto* sr = app.add_subcommand("sr", "super-resolve one image");
  model_flags(sr);
  sr->add_option("--tau", c.tau_text, "temperature (default by scale: 0.5 / 0.4 / 0.2)");
  sr->add_option("input", c.inputs, "LR image (.ppm or .png)")->required();

  auto* sweep = app.add_subcommand("sweep", "temperature sweep over a corpus");
  model_flags(sweep);
  sweep->add_option("--tau", c.tau_text, "comma-separated temperatures");
  sweep->add_option("--samples", c.samples, "samples per image for tau > 0")->check(CLI::PositiveNumber);
  sweep->add_option("corpus", c.inputs, "image directory or procedural:COUNT:SIZE:SEED")->required();

  auto* metrics = app.add_subcommand("metrics", "per-image metrics over a corpus");
  model_flags(metrics);
  metrics->add_option("--tau", c.tau_text, "comma-separated temperatures (default 0)");
  metrics->add_option("--samples", c.samples, "samples per image for tau > 0")->check(CLI::PositiveNumber);
  metrics->add_option("corpus", c.inputs, "image directory or procedural:COUNT:SIZE:SEED")->required();

  auto* ver = app.add_subcommand("verify", "run the oracle suite");
  ver->add_option("--level", c.level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  ver->add_option("--seed", c.seed, "suite seed");
  ver->add_option("--inject-fault", c.fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(c);
    if (*sr) return cmd_sr(c);
    if (*sweep) return cmd_sweep(c);
    if (*metrics) return cmd_metrics(c);
    if (*ver) return cmd_verify(c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
