#pragma once

// Pure index permutations on (C,H,W) tensors: window tiling, cyclic shift,
// sub-pixel rearrangement and right/bottom replicate padding. All are exact.

#include <stdexcept>
#include <string>

#include "swinifs/tensor.hpp"

namespace swinifs {

namespace detail {
inline void require_chw(const Shape& s, const char* what) {
  if (s.size() != 3) throw std::invalid_argument(std::string(what) + ": expected (C,H,W), got " + shape_str(s));
}
inline int wrap(int v, int n) {
  int r = v % n;
  return r < 0 ? r + n : r;
}
}  // namespace detail

// (C,H,W) -> (num_windows, m*m, C). Windows are row-major over the grid, pixels
// row-major inside each window.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int m) {
  detail::require_chw(x.shape(), "window_partition");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (m < 1 || h % m != 0 || w % m != 0)
    throw std::invalid_argument("window_partition: " + shape_str(x.shape()) +
                                " is not padded to window size " + std::to_string(m));
  const int gw = w / m, nw = (h / m) * gw, n = m * m;
  Tensor<T> out({nw, n, c});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const int win = (y / m) * gw + xx / m;
        const int pix = (y % m) * m + xx % m;
        out[(static_cast<std::size_t>(win) * n + pix) * c + ch] = x(ch, y, xx);
      }
  return out;
}

// Inverse of window_partition.
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int m, int h, int w) {
  if (windows.ndim() != 3 || m < 1 || h % m != 0 || w % m != 0 || windows.dim(1) != m * m ||
      windows.dim(0) != (h / m) * (w / m))
    throw std::invalid_argument("window_reverse: " + shape_str(windows.shape()) +
                                " inconsistent with m=" + std::to_string(m) + " h=" + std::to_string(h) +
                                " w=" + std::to_string(w));
  const int c = windows.dim(2), gw = w / m, n = m * m;
  Tensor<T> out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const int win = (y / m) * gw + xx / m;
        const int pix = (y % m) * m + xx % m;
        out(ch, y, xx) = windows[(static_cast<std::size_t>(win) * n + pix) * c + ch];
      }
  return out;
}

// Cyclic shift: element (y,x) moves to ((y+dy) mod H, (x+dx) mod W).
template <typename T>
Tensor<T> roll(const Tensor<T>& x, int dy, int dx) {
  detail::require_chw(x.shape(), "roll");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out(x.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y) {
      const int ty = detail::wrap(y + dy, h);
      for (int xx = 0; xx < w; ++xx) out(ch, ty, detail::wrap(xx + dx, w)) = x(ch, y, xx);
    }
  return out;
}

// (C*r*r, H, W) -> (C, H*r, W*r); out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  detail::require_chw(x.shape(), "pixel_shuffle");
  if (r < 1 || x.dim(0) % (r * r) != 0)
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(x.dim(0)) +
                                " not divisible by r^2 for r=" + std::to_string(r));
  const int c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({c, h * r, w * r});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int src = ch * r * r + i * r + j;
        const T* in = x.data() + static_cast<std::size_t>(src) * h * w;
        for (int y = 0; y < h; ++y) {
          T* dst = out.data() + (static_cast<std::size_t>(ch) * h * r + y * r + i) * w * r + j;
          for (int xx = 0; xx < w; ++xx) dst[xx * r] = in[y * w + xx];
        }
      }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  detail::require_chw(x.shape(), "pixel_unshuffle");
  if (r < 1 || x.dim(1) % r != 0 || x.dim(2) % r != 0)
    throw std::invalid_argument("pixel_unshuffle: spatial size not divisible by " + std::to_string(r));
  const int c = x.dim(0), h = x.dim(1) / r, w = x.dim(2) / r;
  Tensor<T> out({c * r * r, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int dst = ch * r * r + i * r + j;
        T* o = out.data() + static_cast<std::size_t>(dst) * h * w;
        for (int y = 0; y < h; ++y) {
          const T* src = x.data() + (static_cast<std::size_t>(ch) * h * r + y * r + i) * w * r + j;
          for (int xx = 0; xx < w; ++xx) o[y * w + xx] = src[xx * r];
        }
      }
  return out;
}

struct PaddedSize {
  int h = 0;
  int w = 0;
};

inline int round_up(int v, int m) { return (v + m - 1) / m * m; }

// Replicates the last row/column so that H and W become multiples of m.
template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& x, int out_h, int out_w) {
  detail::require_chw(x.shape(), "pad_replicate");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h < h || out_w < w) throw std::invalid_argument("pad_replicate: target smaller than input");
  Tensor<T> out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx) out(ch, y, xx) = x(ch, std::min(y, h - 1), std::min(xx, w - 1));
  return out;
}

template <typename T>
std::pair<Tensor<T>, PaddedSize> pad_to_window(const Tensor<T>& x, int m) {
  detail::require_chw(x.shape(), "pad_to_window");
  if (m < 1) throw std::invalid_argument("pad_to_window: window size must be positive");
  PaddedSize original{x.dim(1), x.dim(2)};
  return {pad_replicate(x, round_up(original.h, m), round_up(original.w, m)), original};
}

// Top-left crop.
template <typename T>
Tensor<T> crop(const Tensor<T>& x, int h, int w) {
  detail::require_chw(x.shape(), "crop");
  if (h > x.dim(1) || w > x.dim(2) || h < 1 || w < 1) throw std::invalid_argument("crop: bad size");
  Tensor<T> out({x.dim(0), h, w});
  for (int ch = 0; ch < x.dim(0); ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) out(ch, y, xx) = x(ch, y, xx);
  return out;
}

template <typename T>
Tensor<T> unpad(const Tensor<T>& x, PaddedSize original) {
  return crop(x, original.h, original.w);
}

}  // namespace swinifs
