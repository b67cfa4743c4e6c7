#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinifs/landmarks.hpp"
#include "swinifs/resample.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

struct BlurKernel {
  int height = 1;
  int width = 1;
  std::vector<double> taps{1.0};  // row-major

  double at(int y, int x) const { return taps[static_cast<std::size_t>(y) * width + x]; }

  static BlurKernel delta() { return {}; }

  static BlurKernel gaussian(int size, double sigma) {
    if (size < 1 || size % 2 == 0 || sigma <= 0.0) throw std::invalid_argument("BlurKernel::gaussian: odd size and sigma > 0");
    BlurKernel k{size, size, std::vector<double>(static_cast<std::size_t>(size) * size)};
    const int r = size / 2;
    double sum = 0.0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double v = std::exp(-((y - r) * (y - r) + (x - r) * (x - r)) / (2.0 * sigma * sigma));
        k.taps[static_cast<std::size_t>(y) * size + x] = v;
        sum += v;
      }
    for (auto& v : k.taps) v /= sum;
    return k;
  }
};

// I_LR = down_s(I_HR * k) + noise.
struct DegradationSpec {
  int scale = 4;
  std::optional<BlurKernel> blur_kernel;
  double noise_sigma = 0.0;

  void validate(int hr_size = kHrSize) const {
    if (scale != 4 && scale != 8) throw std::invalid_argument("DegradationSpec: scale must be 4 or 8");
    if (hr_size % scale != 0) throw std::invalid_argument("DegradationSpec: scale does not divide the HR size");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("DegradationSpec: noise_sigma must be >= 0");
    if (blur_kernel) {
      const auto& k = *blur_kernel;
      if (k.height < 1 || k.width < 1 || k.taps.size() != static_cast<std::size_t>(k.height) * k.width)
        throw std::invalid_argument("DegradationSpec: malformed blur kernel");
      double sum = 0.0;
      for (double v : k.taps) sum += v;
      if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("DegradationSpec: blur kernel must sum to 1");
    }
  }
};

// Same-size 2-D convolution with edge replication; the kernel anchor is its
// center tap (height/2, width/2).
template <typename T>
Tensor<T> convolve_replicate(const Tensor<T>& image, const BlurKernel& k) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int cy = k.height / 2, cx = k.width / 2;
  Tensor<T> out(image.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = 0; i < k.height; ++i)
          for (int j = 0; j < k.width; ++j) {
            const int sy = std::clamp(y - (i - cy), 0, h - 1);
            const int sx = std::clamp(x - (j - cx), 0, w - 1);
            acc += k.at(i, j) * static_cast<double>(image(ch, sy, sx));
          }
        out(ch, y, x) = static_cast<T>(acc);
      }
  return out;
}

template <typename T>
struct DegradedSample {
  Tensor<T> lr_image;
  LandmarkSet landmarks_lr;
};

template <typename T>
DegradedSample<T> degrade(const ImageRecord<T>& record, const DegradationSpec& spec, std::uint64_t rng_seed) {
  const int h = record.hr_image.dim(1), w = record.hr_image.dim(2);
  if (record.hr_image.ndim() != 3 || record.hr_image.dim(0) != 3 || h != w)
    throw std::invalid_argument("degrade: expected a square (3,H,W) HR image");
  spec.validate(h);
  Tensor<T> blurred = spec.blur_kernel ? convolve_replicate(record.hr_image, *spec.blur_kernel) : record.hr_image;
  Tensor<T> lr = bicubic_resample(blurred, h / spec.scale, w / spec.scale);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : lr.values()) v = static_cast<T>(std::clamp(static_cast<double>(v) + noise(rng), 0.0, 1.0));
  }
  return {std::move(lr), record.landmarks_hr.scaled(1.0 / spec.scale)};
}

}  // namespace swinifs
