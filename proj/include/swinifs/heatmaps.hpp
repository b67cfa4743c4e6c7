#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "swinifs/landmarks.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

struct HeatmapConfig {
  double sigma = 1.5;                     // LR pixels
  double truncation_radius_sigmas = 3.0;  // zero beyond this many sigmas
};

template <typename T>
struct HeatmapStack {
  Tensor<T> maps;  // (5, H, W), channel order of LandmarkSet
  double sigma = 0.0;
};

// Peak-1 Gaussian per landmark, sampled at pixel centers (j + 0.5, i + 0.5).
// A landmark outside [0,W) x [0,H) yields an all-zero channel.
template <typename T>
HeatmapStack<T> render_heatmaps(const LandmarkSet& landmarks, int h, int w, double sigma,
                                double truncation_radius_sigmas = 3.0) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("render_heatmaps: sigma must be > 0");
  if (h < 1 || w < 1) throw std::invalid_argument("render_heatmaps: map size must be >= 1");
  if (!(truncation_radius_sigmas > 0.0)) throw std::invalid_argument("render_heatmaps: truncation radius must be > 0");
  HeatmapStack<T> out{Tensor<T>({kNumLandmarks, h, w}), sigma};
  const double radius2 = std::pow(truncation_radius_sigmas * sigma, 2);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c < kNumLandmarks; ++c) {
    const Point2 p = landmarks[c];
    if (!(p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h)) continue;
    for (int i = 0; i < h; ++i) {
      const double dy = i + 0.5 - p.y;
      for (int j = 0; j < w; ++j) {
        const double dx = j + 0.5 - p.x;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= radius2) out.maps(c, i, j) = static_cast<T>(std::exp(-d2 * inv2s2));
      }
    }
  }
  return out;
}

template <typename T>
struct ModelInput {
  Tensor<T> tensor;  // (8, H, W): RGB then five heatmaps
  int scale = 4;
};

template <typename T>
ModelInput<T> build_model_input(const Tensor<T>& lr_image, const HeatmapStack<T>& heatmaps, int scale = 4) {
  const auto& is = lr_image.shape();
  const auto& hs = heatmaps.maps.shape();
  if (is.size() != 3 || is[0] != 3) throw std::invalid_argument("build_model_input: image must be (3,H,W)");
  if (hs.size() != 3 || hs[0] != kNumLandmarks || hs[1] != is[1] || hs[2] != is[2])
    throw std::invalid_argument("build_model_input: heatmaps " + shape_str(hs) + " do not match image " + shape_str(is));
  ModelInput<T> out{Tensor<T>({3 + kNumLandmarks, is[1], is[2]}), scale};
  std::copy(lr_image.values().begin(), lr_image.values().end(), out.tensor.data());
  std::copy(heatmaps.maps.values().begin(), heatmaps.maps.values().end(), out.tensor.data() + lr_image.numel());
  return out;
}

// Convenience: LR image + LR landmarks -> network input.
template <typename T>
ModelInput<T> make_model_input(const Tensor<T>& lr_image, const LandmarkSet& landmarks_lr, int scale,
                               const HeatmapConfig& cfg = {}) {
  return build_model_input(lr_image,
                           render_heatmaps<T>(landmarks_lr, lr_image.dim(1), lr_image.dim(2), cfg.sigma,
                                              cfg.truncation_radius_sigmas),
                           scale);
}

}  // namespace swinifs
