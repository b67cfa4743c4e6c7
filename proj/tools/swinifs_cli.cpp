// swinifs: data preparation, training, evaluation, inference and benchmarking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swinifs/image_io.hpp"
#include "swinifs/plot.hpp"
#include "swinifs/prepare.hpp"
#include "swinifs/swinifs.hpp"

namespace fs = std::filesystem;
using namespace swinifs;

namespace {

PerceptualMetric load_metric(const std::string& weights) {
  if (weights.empty()) {
    std::cerr << "note: no --lpips-weights given; using the hermetic random micro-net metric "
                 "(values are not comparable to published LPIPS)\n";
    return make_random_test_metric();
  }
  return make_alexnet_metric(weights);
}

// "x1,y1,...,x5,y5" or a landmark annotation file; the first entry is used
// unless one matches `image_id`.
LandmarkSet parse_landmarks_arg(const std::string& arg, const std::string& image_id) {
  if (fs::exists(arg)) {
    const auto ann = load_landmark_annotations(arg);
    if (ann.empty()) throw std::runtime_error("no landmarks in " + arg);
    for (const auto& a : ann)
      if (a.image_id == image_id) return a.landmarks;
    return ann.front().landmarks;
  }
  std::vector<double> xy;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) xy.push_back(std::stod(item));
  return LandmarkSet::from_flat(xy);
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

template <typename T>
int train(ExperimentConfig cfg, const std::string& resume, int print_every) {
  if (cfg.data.train_manifest.empty()) throw std::invalid_argument("config: data.train_manifest is required");
  const auto entries = load_manifest(cfg.data.train_manifest);
  for (const auto& e : entries)
    if (e.scale != cfg.model.scale)
      throw std::invalid_argument("manifest sample " + e.image_id + " has scale " + std::to_string(e.scale) +
                                  ", config has " + std::to_string(cfg.model.scale));
  auto data = load_samples<T>(entries, cfg.data.lr_mode == "precomputed");
  std::vector<Sample<T>> val;
  if (!cfg.data.val_manifest.empty()) val = load_samples<T>(load_manifest(cfg.data.val_manifest));
  std::shared_ptr<const FeatureExtractor<T>> ext = make_extractor<T>(cfg.loss);
  Trainer<T> trainer(cfg, std::move(data), ext);
  if (!resume.empty()) {
    trainer.restore(resume);
    std::cout << "resumed from " << resume << " at iteration " << trainer.iteration() << "\n";
  }
  std::optional<PerceptualMetric> metric;
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    if (print_every > 0 && s.iteration % print_every == 0)
      std::printf("iter %ld  l1 %.6f  perc %.6f  total %.6f  lr %.3g  %.1fs\n", s.iteration, s.l1, s.perceptual, s.total,
                  s.lr, s.wall_time);
  };
  hooks.on_checkpoint = [](long it, const fs::path& p) { std::cout << "checkpoint " << it << " -> " << p.string() << "\n"; };
  if (!val.empty()) {
    hooks.on_eval = [&](long it) {
      if (!metric) metric = make_random_test_metric();
      const auto r = evaluate(trainer.model(), val, *metric);
      std::printf("eval %ld  psnr %.3f  ssim %.4f  (bicubic %.3f)\n", it, r.mean.psnr, r.mean.ssim, r.mean.bicubic_psnr);
    };
  }
  try {
    const auto final_ckpt = run_training(trainer, hooks);
    std::cout << "final checkpoint " << final_ckpt.string() << "\n";
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landmark-guided face super-resolution"};
  app.require_subcommand(1);

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data", "Crop aligned faces to 128x128 and synthesize LR inputs");
  std::string images, landmarks, prep_out;
  PrepareOptions popts;
  double blur_sigma = 0.0;
  int blur_size = 0;
  prep->add_option("--images", images, "Directory of aligned source images")->required()->check(CLI::ExistingDirectory);
  prep->add_option("--landmarks", landmarks, "Five-point landmark annotation file")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--scale", popts.scale, "Downscaling factor (4 or 8)")->check(CLI::IsMember({4, 8}));
  prep->add_option("--margin", popts.margin, "Crop margin as a fraction of the landmark box");
  prep->add_option("--noise-sigma", popts.degradation.noise_sigma, "Gaussian noise sigma on the LR image");
  prep->add_option("--blur-sigma", blur_sigma, "Gaussian blur sigma before downsampling (0: none)");
  prep->add_option("--blur-size", blur_size, "Odd blur kernel size");
  prep->add_option("--limit", popts.limit, "Prepare at most this many images (0: all)");
  prep->add_option("--skip", popts.skip, "Skip this many annotations first");
  prep->add_option("--seed", popts.seed, "Root seed for the noise stream");

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Write a procedural face dataset in prepared layout");
  std::string synth_out;
  int synth_count = 16, synth_scale = 4;
  std::uint64_t synth_first = 100;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--count", synth_count);
  synth->add_option("--scale", synth_scale)->check(CLI::IsMember({4, 8}));
  synth->add_option("--first-seed", synth_first);

  // train
  auto* tr = app.add_subcommand("train", "Train from a config file");
  std::string config_path, resume;
  int print_every = 50;
  tr->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  tr->add_option("--print-every", print_every, "Console log interval (iterations)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against a prepared manifest");
  std::string ckpt, manifest, out_report, lpips_weights, model_name = "SwinIFS";
  int timing_runs = 21;
  ev->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  ev->add_option("--out-report", out_report, "Report path; .csv and .txt are written")->required();
  ev->add_option("--lpips-weights", lpips_weights, "Archive with AlexNet trunk and linear weights");
  ev->add_option("--timing-runs", timing_runs, "Warm repetitions per image for the timing median (0: single run)");
  ev->add_option("--name", model_name);

  // infer
  auto* inf = app.add_subcommand("infer", "Super-resolve one LR image");
  std::string inf_image, inf_landmarks, inf_out;
  inf->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  inf->add_option("--image", inf_image, "LR input image")->required()->check(CLI::ExistingFile);
  inf->add_option("--landmarks", inf_landmarks, "x1,y1,...,x5,y5 in LR pixels, or an annotation file")->required();
  inf->add_option("--out", inf_out)->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "PSNR vs inference time table and scatter plot");
  std::vector<std::string> ckpts, names;
  std::string bench_out;
  bench->add_option("--checkpoints", ckpts)->required()->delimiter(',')->check(CLI::ExistingFile);
  bench->add_option("--names", names, "Display names, one per checkpoint")->delimiter(',');
  bench->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_option("--lpips-weights", lpips_weights);
  bench->add_option("--timing-runs", timing_runs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      if (blur_sigma > 0.0) popts.degradation.blur_kernel = BlurKernel::gaussian(blur_size ? blur_size : 2 * static_cast<int>(std::ceil(3 * blur_sigma)) + 1, blur_sigma);
      popts.seed = root_seed_from_env(popts.seed);
      const auto m = prepare_dataset(images, landmarks, prep_out, popts);
      std::cout << "wrote " << load_manifest(m).size() << " samples to " << m.string() << "\n";
    } else if (*synth) {
      const auto m = write_synthetic_dataset(synth_out, synth_count, synth_scale, synth_first);
      std::cout << "wrote " << synth_count << " samples to " << m.string() << "\n";
    } else if (*tr) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      cfg.train.seed = root_seed_from_env(cfg.train.seed);
      cfg.validate();
      return cfg.precision == "double" ? train<double>(cfg, resume, print_every) : train<float>(cfg, resume, print_every);
    } else if (*ev) {
      const auto model = load_model<float>(ckpt);
      const auto samples = load_samples<float>(load_manifest(manifest));
      const auto metric = load_metric(lpips_weights);
      EvalOptions opts;
      opts.timing_runs = timing_runs;
      opts.model_name = model_name;
      opts.seed = root_seed_from_env(0);
      const auto report = evaluate(model, samples, metric, opts);
      fs::path base(out_report);
      base.replace_extension();
      write_text(base.string() + ".csv", report.to_csv());
      write_text(base.string() + ".txt", report.to_table());
      std::cout << report.to_table();
    } else if (*inf) {
      const auto model = load_model<float>(ckpt);
      const auto lr = load_image<float>(inf_image);
      const auto lm = parse_landmarks_arg(inf_landmarks, fs::path(inf_image).filename().string());
      const auto sr = model.infer(make_model_input(lr, lm, model.config().scale));
      save_png(inf_out, sr);
      std::cout << "wrote " << sr.dim(2) << "x" << sr.dim(1) << " image to " << inf_out << "\n";
    } else if (*bench) {
      if (!names.empty() && names.size() != ckpts.size()) throw std::invalid_argument("--names needs one name per checkpoint");
      const auto samples = load_samples<float>(load_manifest(manifest));
      const auto metric = load_metric(lpips_weights);
      std::vector<EvalReport> reports;
      for (std::size_t i = 0; i < ckpts.size(); ++i) {
        const auto model = load_model<float>(ckpts[i]);
        EvalOptions opts;
        opts.timing_runs = timing_runs;
        opts.model_name = names.empty() ? fs::path(ckpts[i]).stem().string() : names[i];
        reports.push_back(evaluate(model, samples, metric, opts));
        if (reports.back().scale != reports.front().scale) throw std::invalid_argument("benchmark: checkpoints differ in scale");
      }
      const auto rows = benchmark_rows(reports, samples, timing_runs > 0 ? timing_runs : 1);
      const fs::path out(bench_out);
      write_text(out / "benchmark.csv", benchmark_csv(rows));
      save_scatter_png(out / "benchmark.png", rows);
      std::cout << benchmark_csv(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
