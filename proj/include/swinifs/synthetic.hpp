#pragma once

// Procedural face-like images with known five-point landmarks, used for
// hermetic tests and demos when no face dataset is available.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "swinifs/landmarks.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

namespace detail {

// Soft inside-test: ~1 inside, ~0 outside, one-pixel ramp at the edge.
inline double soft_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double d = std::sqrt(((x - cx) * (x - cx)) / (rx * rx) + ((y - cy) * (y - cy)) / (ry * ry));
  const double edge = (1.0 - d) * std::min(rx, ry);
  return std::clamp(edge + 0.5, 0.0, 1.0);
}

inline double blend(double base, double over, double alpha) { return base * (1.0 - alpha) + over * alpha; }

}  // namespace detail

struct SyntheticFace {
  Tensor<double> image;  // (3,H,W)
  LandmarkSet landmarks;
};

// Landmark order: left eye, right eye, nose, left mouth corner, right mouth corner.
inline SyntheticFace synthetic_face(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto jitter = [&](double a, double b) { return a + (b - a) * u(rng); };

  const double s = std::min(h, w);
  const double cx = w * jitter(0.45, 0.55), cy = h * jitter(0.45, 0.55);
  const double rx = s * jitter(0.26, 0.32), ry = s * jitter(0.33, 0.40);
  const double eye_dx = rx * jitter(0.38, 0.48), eye_y = cy - ry * jitter(0.18, 0.30);
  const double nose_y = cy + ry * jitter(0.02, 0.12), mouth_y = cy + ry * jitter(0.38, 0.50);
  const double mouth_dx = rx * jitter(0.28, 0.40), tilt = jitter(-0.04, 0.04) * s;

  LandmarkSet lm;
  lm.points[0] = {cx - eye_dx, eye_y - tilt * 0.5};
  lm.points[1] = {cx + eye_dx, eye_y + tilt * 0.5};
  lm.points[2] = {cx + jitter(-0.04, 0.04) * rx, nose_y};
  lm.points[3] = {cx - mouth_dx, mouth_y - tilt * 0.3};
  lm.points[4] = {cx + mouth_dx, mouth_y + tilt * 0.3};

  double bg[3], skin[3], hair[3];
  for (int c = 0; c < 3; ++c) bg[c] = jitter(0.1, 0.9);
  const double tone = jitter(0.35, 0.85);
  skin[0] = std::min(1.0, tone + 0.12);
  skin[1] = tone;
  skin[2] = std::max(0.0, tone - 0.12);
  const double hair_v = jitter(0.05, 0.45);
  for (int c = 0; c < 3; ++c) hair[c] = hair_v * jitter(0.8, 1.2);
  const double eye_r = s * jitter(0.025, 0.04), pupil = jitter(0.05, 0.35);
  const double bg_freq = jitter(0.02, 0.08), bg_phase = jitter(0.0, 6.28);
  // Fine texture: a few oriented gratings with periods of 2.5 to 7 pixels
  // (relative to a 128-pixel face), so detail is partly lost at 4x.
  struct Grating {
    double kx, ky, phase, amp;
  };
  Grating skin_tex[3], hair_tex[2], bg_tex[2];
  auto grating = [&](double amp_lo, double amp_hi) {
    const double period = jitter(2.5, 7.0) * s / kHrSize, angle = jitter(0.0, 3.14159);
    const double k = 6.28318 / period;
    return Grating{k * std::cos(angle), k * std::sin(angle), jitter(0.0, 6.28), jitter(amp_lo, amp_hi)};
  };
  for (auto& g : skin_tex) g = grating(0.012, 0.03);
  for (auto& g : hair_tex) g = grating(0.04, 0.08);
  for (auto& g : bg_tex) g = grating(0.02, 0.05);
  auto texture = [](const Grating* g, int n, double x, double y) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += g[i].amp * std::sin(g[i].kx * x + g[i].ky * y + g[i].phase);
    return v;
  };

  SyntheticFace out{Tensor<double>({3, h, w}), lm};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double wave = 0.08 * std::sin(bg_freq * (px + 0.6 * py) + bg_phase);
      double rgb[3];
      const double t_bg = texture(bg_tex, 2, px, py), t_hair = texture(hair_tex, 2, px, py);
      const double t_skin = texture(skin_tex, 3, px, py);
      for (int c = 0; c < 3; ++c) rgb[c] = bg[c] + wave + t_bg;
      const double a_hair = detail::soft_ellipse(px, py, cx, cy - ry * 0.15, rx * 1.1, ry * 1.0);
      const double a_face = detail::soft_ellipse(px, py, cx, cy, rx, ry);
      const double shade = 0.12 * (px - cx) / rx;
      for (int c = 0; c < 3; ++c) {
        rgb[c] = detail::blend(rgb[c], hair[c] + t_hair, a_hair);
        rgb[c] = detail::blend(rgb[c], skin[c] - shade + t_skin, a_face);
      }
      for (int e = 0; e < 2; ++e) {
        const auto& p = lm.points[e];
        const double a_brow = detail::soft_ellipse(px, py, p.x, p.y - eye_r * 2.6, eye_r * 2.2, eye_r * 0.45);
        for (int c = 0; c < 3; ++c) rgb[c] = detail::blend(rgb[c], hair[c], a_brow);
      }
      for (int e = 0; e < 2; ++e) {
        const auto& p = lm.points[e];
        const double a_white = detail::soft_ellipse(px, py, p.x, p.y, eye_r * 1.8, eye_r);
        const double a_pupil = detail::soft_ellipse(px, py, p.x, p.y, eye_r * 0.75, eye_r * 0.75);
        for (int c = 0; c < 3; ++c) rgb[c] = detail::blend(detail::blend(rgb[c], 0.95, a_white), pupil, a_pupil);
      }
      const auto& n = lm.points[2];
      const double a_nose = detail::soft_ellipse(px, py, n.x, n.y, eye_r * 1.2, eye_r * 0.9);
      for (int c = 0; c < 3; ++c) rgb[c] = detail::blend(rgb[c], skin[c] * 0.7, a_nose);
      const auto& ml = lm.points[3];
      const auto& mr = lm.points[4];
      const double mcx = 0.5 * (ml.x + mr.x), mcy = 0.5 * (ml.y + mr.y);
      const double a_mouth = detail::soft_ellipse(px, py, mcx, mcy, 0.5 * (mr.x - ml.x) + 0.5, eye_r * 0.8);
      rgb[0] = detail::blend(rgb[0], 0.7, a_mouth);
      rgb[1] = detail::blend(rgb[1], 0.2, a_mouth);
      rgb[2] = detail::blend(rgb[2], 0.25, a_mouth);
      for (int c = 0; c < 3; ++c) out.image(c, y, x) = std::clamp(rgb[c], 0.0, 1.0);
    }
  return out;
}

// A 128x128 aligned record.
template <typename T>
ImageRecord<T> synthetic_record(std::uint64_t seed, const std::string& id = {}) {
  auto f = synthetic_face(kHrSize, kHrSize, seed);
  return {id.empty() ? "synth_" + std::to_string(seed) : id, f.image.template cast<T>(), f.landmarks};
}

}  // namespace swinifs
