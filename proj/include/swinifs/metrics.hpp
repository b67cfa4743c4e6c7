#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinifs/archive.hpp"
#include "swinifs/feature_net.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

inline constexpr double kPsnrCapDb = 100.0;

// BT.601 full-range luma.
template <typename T>
Tensor<double> rgb_to_y(const Tensor<T>& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw std::invalid_argument("rgb_to_y: expected (3,H,W)");
  const int h = image.dim(1), w = image.dim(2);
  Tensor<double> y({1, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      y(0, i, j) = 0.299 * image(0, i, j) + 0.587 * image(1, i, j) + 0.114 * image(2, i, j);
  return y;
}

// 10 log10(1 / MSE) over all channels after clamping to [0,1]; capped at 100 dB.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same_shape(target, "psnr");
  if (pred.numel() == 0) throw std::invalid_argument("psnr: empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = std::clamp<double>(pred[i], 0.0, 1.0) - std::clamp<double>(target[i], 0.0, 1.0);
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.numel());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) sum += g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of a single-channel image.
inline Tensor<double> filter_valid(const Tensor<double>& x, const std::vector<double>& g) {
  const int h = x.dim(1), w = x.dim(2), k = static_cast<int>(g.size());
  const int ho = h - k + 1, wo = w - k + 1;
  Tensor<double> tmp({1, h, wo}), out({1, ho, wo});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < wo; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * x(0, i, j + t);
      tmp(0, i, j) = acc;
    }
  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * tmp(0, i + t, j);
      out(0, i, j) = acc;
    }
  return out;
}

}  // namespace detail

// Single-scale SSIM between two single-channel images, mean over valid positions.
inline double ssim_gray(const Tensor<double>& a, const Tensor<double>& b, const SsimOptions& o = {}) {
  a.require_same_shape(b, "ssim");
  if (a.ndim() != 3 || a.dim(0) != 1) throw std::invalid_argument("ssim: expected (1,H,W)");
  if (a.dim(1) < o.window || a.dim(2) < o.window)
    throw std::invalid_argument("ssim: image " + shape_str(a.shape()) + " smaller than the " + std::to_string(o.window) +
                                "x" + std::to_string(o.window) + " window");
  const auto g = detail::gaussian_window_1d(o.window, o.sigma);
  Tensor<double> aa(a.shape()), bb(a.shape()), ab(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = detail::filter_valid(a, g), mu_b = detail::filter_valid(b, g);
  const auto e_aa = detail::filter_valid(aa, g), e_bb = detail::filter_valid(bb, g), e_ab = detail::filter_valid(ab, g);
  const double c1 = std::pow(o.k1 * o.dynamic_range, 2), c2 = std::pow(o.k2 * o.dynamic_range, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.numel(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.numel());
}

// SSIM on the luma of [0,1]-clamped RGB images.
template <typename T>
double ssim_y(const Tensor<T>& pred, const Tensor<T>& target, const SsimOptions& o = {}) {
  pred.require_same_shape(target, "ssim_y");
  return ssim_gray(rgb_to_y(clamp01(pred)), rgb_to_y(clamp01(target)), o);
}

// Learned perceptual distance: unit-normalize each tap's features across
// channels, square the difference, weight per channel, average spatially and
// sum over taps.
class PerceptualMetric {
 public:
  PerceptualMetric(std::unique_ptr<ConvFeatureNet<double>> net, std::vector<std::vector<double>> channel_weights)
      : net_(std::move(net)), weights_(std::move(channel_weights)) {
    if (weights_.size() != net_->taps().size()) throw std::invalid_argument("PerceptualMetric: one weight vector per tap required");
  }

  std::string id() const { return "lpips_" + net_->id(); }
  const ConvFeatureNet<double>& net() const { return *net_; }
  const std::vector<std::vector<double>>& channel_weights() const { return weights_; }

  template <typename T>
  double operator()(const Tensor<T>& pred, const Tensor<T>& target) const {
    pred.require_same_shape(target, "perceptual_distance");
    NoGradGuard no_grad;
    const auto fa = net_->features(Var<double>(clamp01(pred.template cast<double>())));
    const auto fb = net_->features(Var<double>(clamp01(target.template cast<double>())));
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
      const auto& a = fa[l].value();
      const auto& b = fb[l].value();
      const int c = a.dim(0);
      const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
      if (weights_[l].size() != static_cast<std::size_t>(c))
        throw std::runtime_error(id() + ": tap " + std::to_string(l) + " has " + std::to_string(c) + " channels, weights have " +
                                 std::to_string(weights_[l].size()));
      double layer = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        double na = 0.0, nb = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          na += a[ch * plane + p] * a[ch * plane + p];
          nb += b[ch * plane + p] * b[ch * plane + p];
        }
        na = std::sqrt(na) + kEps;
        nb = std::sqrt(nb) + kEps;
        for (int ch = 0; ch < c; ++ch) {
          const double d = a[ch * plane + p] / na - b[ch * plane + p] / nb;
          layer += weights_[l][ch] * d * d;
        }
      }
      total += layer / static_cast<double>(plane);
    }
    return total;
  }

  static constexpr double kEps = 1e-10;

 private:
  std::unique_ptr<ConvFeatureNet<double>> net_;
  std::vector<std::vector<double>> weights_;
};

template <typename T>
double perceptual_distance(const Tensor<T>& pred, const Tensor<T>& target, const PerceptualMetric& metric_net) {
  return metric_net(pred, target);
}

// Hermetic metric: random_test trunk tapped at relu2 and relu3, uniform 1/C weights.
inline PerceptualMetric make_random_test_metric() {
  auto net = make_random_test_extractor<double>({"relu2", "relu3"});
  std::vector<std::vector<double>> w{std::vector<double>(8, 1.0 / 8), std::vector<double>(16, 1.0 / 16)};
  return PerceptualMetric(std::move(net), std::move(w));
}

// AlexNet trunk + per-channel weights from an archive holding conv{1..5}.{weight,bias}
// and lin{0..4}.weight.
inline PerceptualMetric make_alexnet_metric(const std::filesystem::path& weights) {
  const Archive a = Archive::load(weights);
  // Input scaling of the published metric: x in [0,1] -> (2x - 1 - shift) / scale.
  const double shift[3] = {-0.030, -0.088, -0.188}, scl[3] = {0.458, 0.448, 0.450};
  std::vector<double> mean(3), stddev(3);
  for (int c = 0; c < 3; ++c) {
    mean[c] = (1.0 + shift[c]) / 2.0;
    stddev[c] = scl[c] / 2.0;
  }
  auto net = std::make_unique<ConvFeatureNet<double>>("alexnet", alexnet_layers(),
                                                      std::vector<std::string>{"relu1", "relu2", "relu3", "relu4", "relu5"},
                                                      mean, stddev);
  net->load_weights(a);
  std::vector<std::vector<double>> w;
  for (int l = 0; l < 5; ++l) {
    const auto t = a.get<double>("lin" + std::to_string(l) + ".weight");
    w.emplace_back(t.values().begin(), t.values().end());
  }
  return PerceptualMetric(std::move(net), std::move(w));
}

struct TimingResult {
  double median_seconds = 0.0;
  std::vector<double> samples;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median_of: empty sample list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Wall-clock median of `runs` calls after `warmup` untimed calls. Must run on
// an otherwise idle machine.
inline TimingResult time_call(const std::function<void()>& fn, int runs = 21, int warmup = 1) {
  if (runs < 1) throw std::invalid_argument("time_call: runs must be >= 1");
  for (int i = 0; i < warmup; ++i) fn();
  TimingResult r;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    r.samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  r.median_seconds = median_of(r.samples);
  return r;
}

// Runs `model` on every input (batch 1) and reports the median per-image time
// of `runs` warm repetitions over the first input.
template <typename In, typename Out>
std::pair<std::vector<Out>, TimingResult> timed_inference(const std::function<Out(const In&)>& model,
                                                          const std::vector<In>& inputs, int runs = 21) {
  if (inputs.empty()) throw std::invalid_argument("timed_inference: no inputs");
  std::vector<Out> outputs;
  for (const auto& in : inputs) outputs.push_back(model(in));
  auto timing = time_call([&] { (void)model(inputs.front()); }, runs, 1);
  return {std::move(outputs), std::move(timing)};
}

struct EvalRow {
  std::string image_id;
  double psnr = 0.0;
  double ssim = 0.0;
  double perceptual = 0.0;
  double seconds = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
  double bicubic_perceptual = 0.0;
};

struct EvalReport {
  std::string model_name = "SwinIFS";
  int scale = 4;
  std::vector<EvalRow> per_image;
  EvalRow mean;
  std::string fingerprint;

  void finalize() {
    if (per_image.empty()) throw std::invalid_argument("EvalReport: no images");
    EvalRow m;
    m.image_id = "mean";
    for (const auto& r : per_image) {
      m.psnr += r.psnr;
      m.ssim += r.ssim;
      m.perceptual += r.perceptual;
      m.seconds += r.seconds;
      m.bicubic_psnr += r.bicubic_psnr;
      m.bicubic_ssim += r.bicubic_ssim;
      m.bicubic_perceptual += r.bicubic_perceptual;
    }
    const double n = static_cast<double>(per_image.size());
    m.psnr /= n;
    m.ssim /= n;
    m.perceptual /= n;
    m.seconds /= n;
    m.bicubic_psnr /= n;
    m.bicubic_ssim /= n;
    m.bicubic_perceptual /= n;
    mean = m;
  }

  std::string to_csv() const {
    std::ostringstream o;
    o << std::setprecision(10);
    o << "image_id,psnr,ssim,lpips,inference_seconds,bicubic_psnr,bicubic_ssim,bicubic_lpips\n";
    auto row = [&](const EvalRow& r) {
      o << r.image_id << ',' << r.psnr << ',' << r.ssim << ',' << r.perceptual << ',' << r.seconds << ',' << r.bicubic_psnr
        << ',' << r.bicubic_ssim << ',' << r.bicubic_perceptual << '\n';
    };
    for (const auto& r : per_image) row(r);
    row(mean);
    return o.str();
  }

  std::string to_table() const {
    std::ostringstream o;
    o << std::fixed;
    o << "# " << fingerprint << "\n";
    o << "# images: " << per_image.size() << "; timing taken with no concurrent load\n";
    o << std::left << std::setw(14) << "" << "  " << scale << "x Upscaling\n";
    o << std::left << std::setw(14) << "Model" << std::right << std::setw(8) << "PSNR" << std::setw(9) << "SSIM"
      << std::setw(9) << "LPIPS" << std::setw(12) << "sec/img" << '\n';
    auto line = [&](const std::string& name, double p, double s, double l, double t) {
      o << std::left << std::setw(14) << name << std::right << std::setprecision(2) << std::setw(8) << p
        << std::setprecision(4) << std::setw(9) << s << std::setw(9) << l;
      if (t >= 0) o << std::setprecision(5) << std::setw(12) << t;
      o << '\n';
    };
    line("Bicubic", mean.bicubic_psnr, mean.bicubic_ssim, mean.bicubic_perceptual, -1);
    line(model_name, mean.psnr, mean.ssim, mean.perceptual, mean.seconds);
    return o.str();
  }
};

}  // namespace swinifs
