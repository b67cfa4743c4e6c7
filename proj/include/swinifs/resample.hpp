#pragma once

// Separable bicubic resampling shared by degradation, the reconstruction skip
// path and the bicubic baseline.
//
// Kernel: Keys cubic convolution with a = -0.5. When an axis is shrunk the
// kernel is stretched by the scale factor (antialias prefilter) and the taps
// are renormalized to unit sum. Samples outside the image replicate the edge.
// Output pixel o maps to input coordinate (o + 0.5) * in / out - 0.5.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "swinifs/tensor.hpp"

namespace swinifs {

inline constexpr double kBicubicA = -0.5;

inline double bicubic_kernel(double x, double a = kBicubicA) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct ResampleTaps {
  int first = 0;
  std::vector<double> weights;
};

inline std::vector<ResampleTaps> bicubic_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double support = scale > 1.0 ? scale : 1.0;
  std::vector<ResampleTaps> taps(static_cast<std::size_t>(out_size));
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - 2.0 * support));
    const int hi = static_cast<int>(std::ceil(center + 2.0 * support));
    auto& t = taps[static_cast<std::size_t>(o)];
    t.first = lo;
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = bicubic_kernel((j - center) / support);
      t.weights.push_back(w);
      sum += w;
    }
    for (auto& w : t.weights) w /= sum;
  }
  return taps;
}

}  // namespace detail

// Resizes a (C,H,W) image to (C,target_h,target_w); the result is clamped to [0,1].
template <typename T>
Tensor<T> bicubic_resample(const Tensor<T>& image, int target_h, int target_w) {
  if (image.ndim() != 3) throw std::invalid_argument("bicubic_resample: expected (C,H,W), got " + shape_str(image.shape()));
  if (target_h < 1 || target_w < 1) throw std::invalid_argument("bicubic_resample: target size must be >= 1");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto tx = detail::bicubic_taps(w, target_w);
  const auto ty = detail::bicubic_taps(h, target_h);

  std::vector<double> rows(static_cast<std::size_t>(c) * h * target_w);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int ox = 0; ox < target_w; ++ox) {
        const auto& t = tx[static_cast<std::size_t>(ox)];
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          const int sx = std::clamp(t.first + static_cast<int>(k), 0, w - 1);
          acc += t.weights[k] * static_cast<double>(image(ch, y, sx));
        }
        rows[(static_cast<std::size_t>(ch) * h + y) * target_w + ox] = acc;
      }

  Tensor<T> out({c, target_h, target_w});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < target_h; ++oy) {
      const auto& t = ty[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < target_w; ++ox) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          const int sy = std::clamp(t.first + static_cast<int>(k), 0, h - 1);
          acc += t.weights[k] * rows[(static_cast<std::size_t>(ch) * h + sy) * target_w + ox];
        }
        out(ch, oy, ox) = static_cast<T>(std::clamp(acc, 0.0, 1.0));
      }
    }
  return out;
}

}  // namespace swinifs
