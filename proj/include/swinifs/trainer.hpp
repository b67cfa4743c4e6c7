#pragma once

// Training loop, evaluation driver and benchmark table.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinifs/archive.hpp"
#include "swinifs/checkpoint.hpp"
#include "swinifs/config.hpp"
#include "swinifs/dataset.hpp"
#include "swinifs/degradation.hpp"
#include "swinifs/heatmaps.hpp"
#include "swinifs/losses.hpp"
#include "swinifs/metrics.hpp"
#include "swinifs/model.hpp"
#include "swinifs/optim.hpp"
#include "swinifs/resample.hpp"
#include "swinifs/seed.hpp"

namespace swinifs {

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::string last_good)
      : std::runtime_error(what), last_good_checkpoint(std::move(last_good)) {}
  std::string last_good_checkpoint;
};

// Epoch-wise shuffled sample order driven by a single engine.
class BatchSampler {
 public:
  BatchSampler() = default;
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {
    if (n == 0) throw std::invalid_argument("BatchSampler: empty dataset");
  }

  std::size_t next() {
    if (pos_ >= order_.size()) reshuffle();
    return order_[pos_++];
  }

  nlohmann::json state() const { return {{"rng", rng_state(rng_)}, {"order", order_}, {"pos", pos_}, {"n", n_}}; }
  void restore(const nlohmann::json& j) {
    if (j.at("n").get<std::size_t>() != n_) throw std::runtime_error("checkpoint was written for a dataset of different size");
    restore_rng(rng_, j.at("rng").get<std::string>());
    order_ = j.at("order").get<std::vector<std::size_t>>();
    pos_ = j.at("pos");
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = n_; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order_[i - 1], order_[pick(rng_)]);
    }
    pos_ = 0;
  }

  std::size_t n_ = 0;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct StepLog {
  long iteration = 0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;
};

template <typename T>
class Trainer {
 public:
  // `cfg.train.seed` is the root seed for init, batch order, drop path and noise.
  Trainer(ExperimentConfig cfg, std::vector<Sample<T>> data, std::shared_ptr<const FeatureExtractor<T>> extractor)
      : cfg_(std::move(cfg)),
        seeds_(seed_everything(cfg_.train.seed)),
        model_(cfg_.model, seeds_.init()),
        adam_(AdamOptions{cfg_.train.beta1, cfg_.train.beta2, 1e-8}),
        data_(std::move(data)),
        extractor_(std::move(extractor)),
        sampler_(data_.size(), seeds_.batch_order()),
        drop_rng_(seeds_.drop_path()),
        start_(std::chrono::steady_clock::now()) {
    cfg_.validate();
    if (!extractor_) throw std::invalid_argument("Trainer: no feature extractor");
    on_the_fly_ = cfg_.data.lr_mode == "on_the_fly";
    degradation_ = degradation_from(cfg_);
    const int lr_size = kHrSize / cfg_.model.scale;
    for (const auto& s : data_) {
      if (s.hr.shape() != Shape{3, kHrSize, kHrSize})
        throw std::invalid_argument("sample " + s.image_id + ": HR must be 3x128x128, got " + shape_str(s.hr.shape()));
      if (!on_the_fly_ && s.lr.shape() != Shape{3, lr_size, lr_size})
        throw std::invalid_argument("sample " + s.image_id + ": LR must be 3x" + std::to_string(lr_size) + "x" +
                                    std::to_string(lr_size) + ", got " + shape_str(s.lr.shape()));
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  SwinIFS<T>& model() { return model_; }
  const SwinIFS<T>& model() const { return model_; }
  const Adam<T>& optimizer() const { return adam_; }
  long iteration() const { return iteration_; }
  double current_lr() const {
    return multistep_lr(cfg_.train.lr, iteration_ + 1, cfg_.train.milestones, cfg_.train.lr_decay);
  }

  // LR image for sample `idx` at the current iteration.
  Tensor<T> lr_for(std::size_t idx) const {
    const auto& s = data_[idx];
    if (!on_the_fly_) return s.lr;
    ImageRecord<T> rec{s.image_id, s.hr, s.landmarks_lr.scaled(cfg_.model.scale)};
    return degrade(rec, degradation_, seeds_.noise(idx, static_cast<std::uint64_t>(iteration_))).lr_image;
  }

  // One optimisation step over a batch; the returned losses are those of the
  // batch before the update.
  StepLog step() {
    const long it = iteration_ + 1;
    const double lr = multistep_lr(cfg_.train.lr, it, cfg_.train.milestones, cfg_.train.lr_decay);
    model_.zero_grad();
    const int b = cfg_.train.batch_size;
    const T inv_b = T(1) / static_cast<T>(b);
    StepLog log;
    log.iteration = it;
    log.lr = lr;
    ForwardContext ctx{true, &drop_rng_};
    for (int k = 0; k < b; ++k) {
      const std::size_t idx = sampler_.next();
      const auto& s = data_[idx];
      const auto input = make_model_input(lr_for(idx), s.landmarks_lr, cfg_.model.scale, cfg_.heatmap);
      const Var<T> pred = model_.forward(input, ctx);
      const auto loss = total_loss(pred, Var<T>(s.hr), *extractor_, cfg_.loss.weights);
      log.l1 += loss.l1 / b;
      log.perceptual += loss.perceptual / b;
      log.total += static_cast<double>(loss.total.item()) / b;
      backward(ops::scale(loss.total, inv_b));
    }
    if (!std::isfinite(log.total)) {
      throw TrainingDiverged("non-finite loss at iteration " + std::to_string(it) +
                                 (last_checkpoint_.empty() ? std::string(" (no checkpoint written yet)")
                                                           : "; last good checkpoint: " + last_checkpoint_),
                             last_checkpoint_);
    }
    adam_.step(model_.parameters(), lr);
    iteration_ = it;
    log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return log;
  }

  Archive checkpoint() const {
    Archive a;
    a.meta["format"] = kCheckpointFormat;
    a.meta["iteration"] = iteration_;
    a.meta["seed"] = cfg_.train.seed;
    a.meta["precision"] = dtype_name(dtype_of<T>());
    a.meta["experiment"] = to_json(cfg_);
    a.meta["sampler"] = sampler_.state();
    a.meta["drop_path_rng"] = rng_state(drop_rng_);
    a.meta["extractor"] = extractor_->id();
    put_model(a, model_);
    put_adam(a, adam_);
    return a;
  }

  void save(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    checkpoint().save(path);
    last_checkpoint_ = path.string();
  }

  // Restores model, optimizer, sampler and RNG state. The checkpoint's model
  // config must equal the trainer's.
  void restore(const std::filesystem::path& path) {
    const Archive a = Archive::load(path);
    const ModelConfig stored = checkpoint_model_config(a);
    if (!(stored == cfg_.model))
      throw ConfigMismatch("checkpoint " + path.string() + " has model config " + to_json(stored).dump() +
                           ", run config has " + to_json(cfg_.model).dump());
    if (a.meta.at("precision").get<std::string>() != dtype_name(dtype_of<T>()))
      throw std::runtime_error("checkpoint precision " + a.meta.at("precision").get<std::string>() + " differs from trainer");
    restore_model(a, model_);
    restore_adam(a, model_, adam_);
    sampler_.restore(a.meta.at("sampler"));
    restore_rng(drop_rng_, a.meta.at("drop_path_rng").get<std::string>());
    iteration_ = a.meta.at("iteration");
    last_checkpoint_ = path.string();
  }

  const std::string& last_checkpoint() const { return last_checkpoint_; }

 private:
  ExperimentConfig cfg_;
  SeedPlan seeds_;
  SwinIFS<T> model_;
  Adam<T> adam_;
  std::vector<Sample<T>> data_;
  std::shared_ptr<const FeatureExtractor<T>> extractor_;
  BatchSampler sampler_;
  std::mt19937_64 drop_rng_;
  std::chrono::steady_clock::time_point start_;
  DegradationSpec degradation_;
  bool on_the_fly_ = false;
  long iteration_ = 0;
  std::string last_checkpoint_;
};

inline std::string checkpoint_name(long iteration) {
  std::ostringstream o;
  o << "ckpt_" << std::setw(8) << std::setfill('0') << iteration << ".swa";
  return o.str();
}

// Append-only CSV of per-step scalars.
class TrainLog {
 public:
  explicit TrainLog(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open training log: " + path.string());
    if (fresh) out_ << "iter,l1,perc,total,lr,wall_time\n";
    out_ << std::setprecision(10);
  }
  void append(const StepLog& s) {
    out_ << s.iteration << ',' << s.l1 << ',' << s.perceptual << ',' << s.total << ',' << s.lr << ',' << s.wall_time << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(long, const std::filesystem::path&)> on_checkpoint;
  std::function<void(long)> on_eval;
};

// Runs until cfg.train.max_iters, logging every step to <out_dir>/train_log.csv
// and checkpointing to <out_dir>/ckpt_XXXXXXXX.swa. Returns the final checkpoint path.
template <typename T>
std::filesystem::path run_training(Trainer<T>& trainer, const TrainHooks& hooks = {}) {
  const auto& cfg = trainer.config();
  const std::filesystem::path out_dir = cfg.data.out_dir;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream c(out_dir / "config.json");
    c << to_json(cfg).dump(2) << '\n';
  }
  TrainLog log(out_dir / "train_log.csv");
  while (trainer.iteration() < cfg.train.max_iters) {
    const StepLog s = trainer.step();
    log.append(s);
    if (hooks.on_step) hooks.on_step(s);
    if (cfg.train.checkpoint_every > 0 && s.iteration % cfg.train.checkpoint_every == 0) {
      const auto p = out_dir / checkpoint_name(s.iteration);
      trainer.save(p);
      if (hooks.on_checkpoint) hooks.on_checkpoint(s.iteration, p);
    }
    if (cfg.train.eval_every > 0 && s.iteration % cfg.train.eval_every == 0 && hooks.on_eval) hooks.on_eval(s.iteration);
  }
  const auto final_path = out_dir / checkpoint_name(trainer.iteration());
  if (trainer.last_checkpoint() != final_path.string()) trainer.save(final_path);
  return final_path;
}

struct EvalOptions {
  DegradationSpec degradation;  // used when a sample carries no LR image
  HeatmapConfig heatmap;
  std::uint64_t seed = 0;       // noise stream root
  int timing_runs = 0;          // >0: median per-image time over this many repeats
  std::string model_name = "SwinIFS";
};

// Degrade (or use the stored LR) -> heatmaps -> forward -> clamp -> metrics,
// with bicubic-baseline columns from the same LR image.
template <typename T>
EvalReport evaluate(const SwinIFS<T>& model, const std::vector<Sample<T>>& samples, const PerceptualMetric& metric,
                    const EvalOptions& opts = {}) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  const int s = model.config().scale;
  const SeedPlan seeds = seed_everything(opts.seed);
  EvalReport report;
  report.model_name = opts.model_name;
  report.scale = s;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    Tensor<T> lr = smp.lr;
    if (lr.numel() == 0) {
      DegradationSpec d = opts.degradation;
      d.scale = s;
      lr = degrade(ImageRecord<T>{smp.image_id, smp.hr, smp.landmarks_lr.scaled(s)}, d, seeds.noise(i)).lr_image;
    }
    const auto input = make_model_input(lr, smp.landmarks_lr, s, opts.heatmap);
    EvalRow row;
    row.image_id = smp.image_id;
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor<T> sr = model.infer(input);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.timing_runs > 0) row.seconds = time_call([&] { (void)model.infer(input); }, opts.timing_runs, 0).median_seconds;
    const Tensor<T> bic = bicubic_resample(lr, smp.hr.dim(1), smp.hr.dim(2));
    row.psnr = psnr(sr, smp.hr);
    row.ssim = ssim_y(sr, smp.hr);
    row.perceptual = metric(sr, smp.hr);
    row.bicubic_psnr = psnr(bic, smp.hr);
    row.bicubic_ssim = ssim_y(bic, smp.hr);
    row.bicubic_perceptual = metric(bic, smp.hr);
    report.per_image.push_back(std::move(row));
  }
  std::ostringstream fp;
  fp << "model=" << opts.model_name << " params=" << model.parameter_count() << " scale=" << s << " metric=" << metric.id()
     << " images=" << samples.size() << " precision=" << dtype_name(dtype_of<T>());
  report.fingerprint = fp.str();
  report.finalize();
  return report;
}

struct BenchmarkRow {
  std::string model_name;
  double psnr = 0.0;
  double seconds = 0.0;
};

// One row per model report plus a leading bicubic reference row. Bicubic
// timing is measured here on the first LR image.
template <typename T>
std::vector<BenchmarkRow> benchmark_rows(const std::vector<EvalReport>& reports, const std::vector<Sample<T>>& samples,
                                         int timing_runs = 21) {
  if (reports.empty()) throw std::invalid_argument("benchmark: no models");
  if (samples.empty()) throw std::invalid_argument("benchmark: empty test set");
  std::vector<BenchmarkRow> rows;
  Tensor<T> lr = samples.front().lr;
  if (lr.numel() == 0) lr = bicubic_resample(samples.front().hr, kHrSize / reports.front().scale, kHrSize / reports.front().scale);
  const double bic_t =
      time_call([&] { (void)bicubic_resample(lr, samples.front().hr.dim(1), samples.front().hr.dim(2)); }, timing_runs, 1)
          .median_seconds;
  rows.push_back({"Bicubic", reports.front().mean.bicubic_psnr, bic_t});
  for (const auto& r : reports) rows.push_back({r.model_name, r.mean.psnr, r.mean.seconds});
  return rows;
}

inline std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream o;
  o << std::setprecision(10) << "model_name,psnr,seconds\n";
  for (const auto& r : rows) o << r.model_name << ',' << r.psnr << ',' << r.seconds << '\n';
  return o.str();
}

}  // namespace swinifs
