// End-to-end acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linf/config.hpp"
#include "linf/corpus.hpp"
#include "linf/metrics.hpp"
#include "linf/pipeline.hpp"
#include "linf/resample.hpp"
#include "linf/training.hpp"
#include "linf/verify.hpp"
#include "oracles.hpp"

using namespace linf;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome from_oracle(const verify::OracleResult& r, double limit) {
  const bool in_time = r.seconds < limit;
  return {r.passed && in_time, r.detail + (in_time ? "" : " [over time limit]")};
}

struct DeskSetup {
  ModelConfig model;
  TrainConfig train;
};

DeskSetup load_desk(const std::string& path) {
  const KeyValueConfig kv = KeyValueConfig::load(path);
  ConfigReader r(kv);
  DeskSetup d;
  read_model_config(r, d.model);
  read_train_config(r, d.train);
  r.reject_unknown({"model.", "train."});
  return d;
}

double mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = from; i < to && i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      s += v[i];
      ++n;
    }
  }
  return n ? s / n : std::nan("");
}

Outcome desk_training(const std::string& config, std::size_t runs, double limit) {
  const auto t0 = std::chrono::steady_clock::now();
  const DeskSetup desk = load_desk(config);
  const std::vector<Image> corpus = procedural_corpus(32, 96, 0);
  const std::vector<Image> held = procedural_corpus(8, 96, 1);
  const std::size_t epoch = desk.train.steps_per_epoch;

  std::vector<double> drops;
  double sr_y = 0.0, bil_y = 0.0, sr_rgb = 0.0, bil_rgb = 0.0;
  for (std::size_t run = 0; run < runs; ++run) {
    TrainConfig t = desk.train;
    t.seed = run;
    Trainer trainer(LinfModel::create(desk.model, t.seed), t, corpus);
    std::vector<double> nll;
    while (!trainer.finished()) nll.push_back(trainer.step().nll);
    const double first = mean(nll, 0, epoch), last = mean(nll, nll.size() - epoch, nll.size());
    drops.push_back((first - last) / std::abs(first));
    std::printf("    run %zu (seed %zu): mean NLL first epoch %.4f, last epoch %.4f, drop %.1f%%  [%.0f s]\n", run, run,
                first, last, 100.0 * drops.back(), elapsed(t0));
    std::fflush(stdout);
    if (run == 0) {
      SrOptions o;
      for (const Image& hr : held) {
        const EvalPair p = make_eval_pair(hr, 2.0);
        const MetricReport sr = evaluate_pair(p, 2.0, &trainer.model(), o, 1);
        const MetricReport bl = evaluate_pair(p, 2.0, nullptr, o, 1);
        sr_y += sr.psnr_y / held.size();
        bil_y += bl.psnr_y / held.size();
        sr_rgb += sr.psnr_rgb / held.size();
        bil_rgb += bl.psnr_rgb / held.size();
      }
      std::printf("    held-out s=2, tau=0: PSNR-Y %.3f vs bilinear %.3f (%+.3f dB); PSNR-RGB %.3f vs %.3f (%+.3f dB)\n",
                  sr_y, bil_y, sr_y - bil_y, sr_rgb, bil_rgb, sr_rgb - bil_rgb);
      std::fflush(stdout);
    }
  }
  std::vector<double> sorted = drops;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double secs = elapsed(t0);
  const bool ok = median >= 0.2 && sr_y - bil_y >= 0.2 && sr_rgb - bil_rgb >= 0.2 && secs < limit;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "median NLL drop %.1f%% (>= 20%%), PSNR-Y margin %+.3f dB, PSNR-RGB margin %+.3f dB (>= 0.2), %.0f s",
                100.0 * median, sr_y - bil_y, sr_rgb - bil_rgb, secs);
  return {ok, buf};
}

Outcome determinism(const std::string& config) {
  DeskSetup desk = load_desk(config);
  desk.train.steps = 6;
  desk.train.steps_per_epoch = 3;
  desk.train.halve_at_epochs = {1};
  const std::vector<Image> corpus = procedural_corpus(32, 96, 0);

  auto run = [&](std::size_t steps, Trainer& tr) {
    std::vector<std::string> trace;
    for (std::size_t i = 0; i < steps; ++i) trace.push_back(tr.step().csv_row());
    return trace;
  };
  Trainer a(LinfModel::create(desk.model, 0), desk.train, corpus);
  Trainer b(LinfModel::create(desk.model, 0), desk.train, corpus);
  const auto ta = run(6, a), tb = run(6, b);
  const bool traces = ta == tb;
  const bool ckpts = serialize_checkpoint(a.checkpoint()) == serialize_checkpoint(b.checkpoint());

  const auto path = std::filesystem::temp_directory_path() / "linf-acceptance-mid.linf";
  Trainer c(LinfModel::create(desk.model, 0), desk.train, corpus);
  auto tc = run(3, c);
  save_checkpoint(c.checkpoint(), path);
  Trainer d = Trainer::resume(load_checkpoint(path), corpus);
  const auto td = run(3, d);
  tc.insert(tc.end(), td.begin(), td.end());
  std::filesystem::remove(path);
  const bool resumed = tc == ta && serialize_checkpoint(d.checkpoint()) == serialize_checkpoint(a.checkpoint());

  const Image lr = bicubic_resample(procedural_corpus(1, 48, 9)[0], 24, 24);
  SrOptions o;
  o.tau = 0.8;
  o.seed = 17;
  const Image sa = super_resolve(lr, 2.5, a.model(), o);
  const Image sb = super_resolve(lr, 2.5, b.model(), o);
  o.threads = 3;
  const Image sc = super_resolve(lr, 2.5, a.model(), o);
  const bool samples = sa == sb && sa == sc;

  const bool ok = traces && ckpts && resumed && samples;
  std::string detail = std::string("loss traces ") + (traces ? "identical" : "DIFFER") + ", checkpoints " +
                       (ckpts ? "identical" : "DIFFER") + ", resume " + (resumed ? "matches" : "DIFFERS") +
                       ", tau>0 SR " + (samples ? "identical" : "DIFFERS");
  return {ok, detail};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(11);
  const Image zeros(8, 8, 0.0), half(8, 8, 0.5);
  const double p = psnr(zeros, half);
  const Image a = oracle::random_image(16, 14, rng);
  const double s = ssim(a, a);
  const std::vector<Image> same(5, a);
  const double dv = diversity(same);
  double resample_err = 0.0;
  std::uniform_int_distribution<std::size_t> ext(1, 20);
  for (int i = 0; i < 40; ++i) {
    const Image img = oracle::random_image(ext(rng), ext(rng), rng);
    const std::size_t th = ext(rng), tw = ext(rng);
    resample_err = std::max(resample_err, oracle::max_image_diff(bilinear_upsample(img, th, tw),
                                                                 oracle::naive_bilinear(img, th, tw)));
    resample_err = std::max(resample_err, oracle::max_image_diff(bicubic_resample(img, th, tw),
                                                                 oracle::naive_bicubic(img, th, tw)));
  }
  const bool ok = std::abs(p - 20.0 * std::log10(2.0)) <= 1e-12 && std::abs(s - 1.0) <= 1e-12 && dv == 0.0 &&
                  resample_err <= 1e-10;
  char buf[200];
  std::snprintf(buf, sizeof buf, "PSNR(0, 0.5) = %.4f dB, SSIM(a,a) = %.15f, diversity = %g, resampler vs naive %.2g",
                p, s, dv, resample_err);
  return {ok, buf};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LINF acceptance criteria"};
  std::vector<int> only;
  std::size_t runs = 5;
  std::string config = LINF_DESK_CONFIG;
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_option("--runs", runs, "training runs for criterion 9")->check(CLI::PositiveNumber);
  app.add_option("--desk-config", config, "desk training config");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "invertibility", [] { return from_oracle(verify::round_trip(1000, 101), 10.0); }},
      {2, "change of variables", [] { return from_oracle(verify::logdet_jacobian(102), 30.0); }},
      {3, "Gaussian equivalence", [] { return from_oracle(verify::gaussian_equivalence(100, 103), 30.0); }},
      {4, "gradient audit", [] { return from_oracle(verify::gradient_audit(104), 120.0); }},
      {5, "density normalization", [] { return from_oracle(verify::density_normalization(10, 200000, 105), 60.0); }},
      {6, "temperature law", [] { return from_oracle(verify::temperature_law(10000, 106), 30.0); }},
      {7, "ensemble economics", [] { return from_oracle(verify::ensemble_economics(107), 60.0); }},
      {8, "tiling exactness", [] { return from_oracle(verify::tiling(50, 108), 60.0); }},
      {9, "desk-scale training", [&] { return desk_training(config, runs, 1800.0); }},
      {10, "determinism", [&] { return determinism(config); }},
      {11, "metric oracles", [] { return metric_oracles(); }},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    if (!o.passed) ++failed;
    std::printf("[%s] %2d %-22s %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), elapsed(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
