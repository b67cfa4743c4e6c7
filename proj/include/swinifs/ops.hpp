#pragma once

// Differentiable operators used by the network, the losses and the feature
// extractors. Each op computes its forward value eagerly and registers a
// backward closure through make_op.

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <numeric>
#include <vector>

#include "swinifs/autograd.hpp"
#include "swinifs/layout.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs::ops {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  a.value().require_same_shape(b.value(), "add");
  Tensor<T> out = a.value();
  out += b.value();
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t i = 0; i < 2; ++i)
      if (wants_grad(n, i)) n.inputs[i]->grad_ref() += n.grad;
  });
}

// a + c where c is a constant tensor.
template <typename T>
Var<T> add_const(const Var<T>& a, const Tensor<T>& c) {
  a.value().require_same_shape(c, "add_const");
  Tensor<T> out = a.value();
  out += c;
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) { n.inputs[0]->grad_ref() += n.grad; });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * n.grad[i];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  return make_op<T>(a.value().reshaped(std::move(shape)), {a}, [](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

namespace detail {

struct ConvGeometry {
  int c, h, w, kh, kw, stride, pad, ho, wo;
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        T* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            dst[ox] = (ix < 0 || ix >= g.w) ? T(0) : src[ix];
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        const T* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          const T* src = row + oy * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
}

// Direct stride-1 convolution, used when the output has few channels and an
// im2col GEMM would be dominated by the column buffer.
template <typename T>
void conv_direct(const T* x, const T* w, const ConvGeometry& g, int outc, T* out) {
  for (int o = 0; o < outc; ++o)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < g.kh; ++i)
        for (int j = 0; j < g.kw; ++j) {
          const T wv = w[((static_cast<std::size_t>(o) * g.c + c) * g.kh + i) * g.kw + j];
          const int lo = std::max(0, g.pad - j), hi = std::min(g.wo, g.w + g.pad - j);
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy - g.pad + i;
            if (iy < 0 || iy >= g.h) continue;
            const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w - g.pad + j;
            T* dst = out + (static_cast<std::size_t>(o) * g.ho + oy) * g.wo;
            for (int ox = lo; ox < hi; ++ox) dst[ox] += wv * src[ox];
          }
        }
}

template <typename T>
void conv_direct_backward(const T* x, const T* w, const T* dy, const ConvGeometry& g, int outc, T* dx, T* dw) {
  std::vector<T> lane(g.wo);  // per-column partial sums keep the inner loop vectorizable
  for (int o = 0; o < outc; ++o)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < g.kh; ++i)
        for (int j = 0; j < g.kw; ++j) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * g.c + c) * g.kh + i) * g.kw + j;
          const T wv = w[widx];
          const int lo = std::max(0, g.pad - j), hi = std::min(g.wo, g.w + g.pad - j);
          std::fill(lane.begin(), lane.end(), T(0));
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy - g.pad + i;
            if (iy < 0 || iy >= g.h) continue;
            const std::size_t xoff = (static_cast<std::size_t>(c) * g.h + iy) * g.w - g.pad + j;
            const T* g_row = dy + (static_cast<std::size_t>(o) * g.ho + oy) * g.wo;
            if (dw) {
              const T* src = x + xoff;
              for (int ox = lo; ox < hi; ++ox) lane[ox] += g_row[ox] * src[ox];
            }
            if (dx) {
              T* dst = dx + xoff;
              for (int ox = lo; ox < hi; ++ox) dst[ox] += wv * g_row[ox];
            }
          }
          if (dw) dw[widx] += std::accumulate(lane.begin(), lane.end(), T(0));
        }
}

}  // namespace detail

inline constexpr int kDirectConvMaxOut = 8;

// 2-D cross-correlation with zero padding. x: (C,H,W), w: (O,C,kh,kw), b: (O)
// or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1, int pad = 1) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0])
    throw std::invalid_argument("conv2d: input " + shape_str(xs) + " incompatible with weight " +
                                shape_str(ws));
  if (b.defined() && (b.value().numel() != static_cast<std::size_t>(ws[0])))
    throw std::invalid_argument("conv2d: bias size mismatch");
  detail::ConvGeometry g{xs[0], xs[1], xs[2], ws[2], ws[3], stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.ho < 1 || g.wo < 1) throw std::invalid_argument("conv2d: input smaller than kernel");
  const int outc = ws[0], k = g.c * g.kh * g.kw, p = g.ho * g.wo;

  const bool direct = stride == 1 && outc <= kDirectConvMaxOut && !g.pointwise();
  Tensor<T> out({outc, g.ho, g.wo});
  if (direct) {
    detail::conv_direct(x.value().data(), w.value().data(), g, outc, out.data());
  } else {
    std::vector<T> cols;
    const T* colp = x.value().data();
    if (!g.pointwise()) {
      cols.resize(static_cast<std::size_t>(k) * p);
      detail::im2col(x.value().data(), g, cols.data());
      colp = cols.data();
    }
    gemm<T>(false, false, outc, p, k, T(1), w.value().data(), colp, T(0), out.data());
  }
  if (b.defined())
    for (int o = 0; o < outc; ++o) {
      const T bv = b.value()[o];
      T* row = out.data() + static_cast<std::size_t>(o) * p;
      for (int i = 0; i < p; ++i) row[i] += bv;
    }

  return make_op<T>(std::move(out), {x, w, b}, [g, outc, k, p, direct](Node<T>& n) {
    const T* dy = n.grad.data();
    const auto& xv = n.inputs[0]->value;
    if (direct) {
      detail::conv_direct_backward(xv.data(), n.inputs[1]->value.data(), dy, g, outc,
                                   wants_grad(n, 0) ? n.inputs[0]->grad_ref().data() : nullptr,
                                   wants_grad(n, 1) ? n.inputs[1]->grad_ref().data() : nullptr);
    } else if (wants_grad(n, 1)) {
      std::vector<T> cols;
      const T* colp = xv.data();
      if (!g.pointwise()) {
        cols.resize(static_cast<std::size_t>(k) * p);
        detail::im2col(xv.data(), g, cols.data());
        colp = cols.data();
      }
      gemm<T>(false, true, outc, k, p, T(1), dy, colp, T(1), n.inputs[1]->grad_ref().data());
    }
    if (wants_grad(n, 2)) {
      auto& gb = n.inputs[2]->grad_ref();
      for (int o = 0; o < outc; ++o) {
        const T* row = dy + static_cast<std::size_t>(o) * p;
        T s = 0;
        for (int i = 0; i < p; ++i) s += row[i];
        gb[o] += s;
      }
    }
    if (!direct && wants_grad(n, 0)) {
      auto& gx = n.inputs[0]->grad_ref();
      const T* wv = n.inputs[1]->value.data();
      if (g.pointwise()) {
        gemm<T>(true, false, k, p, outc, T(1), wv, dy, T(1), gx.data());
      } else {
        std::vector<T> dcols(static_cast<std::size_t>(k) * p);
        gemm<T>(true, false, k, p, outc, T(1), wv, dy, T(0), dcols.data());
        detail::col2im_add(dcols.data(), g, gx.data());
      }
    }
  });
}

// Per-pixel linear map over channels: (C,H,W) x (O,C) -> (O,H,W).
template <typename T>
Var<T> channel_linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (w.shape().size() != 2) throw std::invalid_argument("channel_linear: weight must be (O,C)");
  return conv2d(x, reshape(w, {w.dim(0), w.dim(1), 1, 1}), b, 1, 0);
}

// Linear map over the last dimension: (..., C) x (O,C) + b -> (..., O).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& xs = x.shape();
  if (xs.empty() || w.shape().size() != 2 || w.dim(1) != xs.back())
    throw std::invalid_argument("linear: input " + shape_str(xs) + " incompatible with weight " +
                                shape_str(w.shape()));
  const int in = xs.back(), outd = w.dim(0);
  const int rows = static_cast<int>(x.value().numel() / in);
  Shape os = xs;
  os.back() = outd;
  Tensor<T> out(os);
  gemm<T>(false, true, rows, outd, in, T(1), x.value().data(), w.value().data(), T(0), out.data());
  if (b.defined())
    for (int r = 0; r < rows; ++r)
      for (int o = 0; o < outd; ++o) out[static_cast<std::size_t>(r) * outd + o] += b.value()[o];
  return make_op<T>(std::move(out), {x, w, b}, [rows, in, outd](Node<T>& n) {
    const T* dy = n.grad.data();
    if (wants_grad(n, 0))
      gemm<T>(false, false, rows, in, outd, T(1), dy, n.inputs[1]->value.data(), T(1),
              n.inputs[0]->grad_ref().data());
    if (wants_grad(n, 1))
      gemm<T>(true, false, outd, in, rows, T(1), dy, n.inputs[0]->value.data(), T(1),
              n.inputs[1]->grad_ref().data());
    if (wants_grad(n, 2)) {
      auto& gb = n.inputs[2]->grad_ref();
      for (int r = 0; r < rows; ++r)
        for (int o = 0; o < outd; ++o) gb[o] += dy[static_cast<std::size_t>(r) * outd + o];
    }
  });
}

// Layer normalization across channels at every pixel of a (C,H,W) map.
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const auto& xs = x.shape();
  if (xs.size() != 3 || gamma.value().numel() != static_cast<std::size_t>(xs[0]) ||
      beta.value().numel() != static_cast<std::size_t>(xs[0]))
    throw std::invalid_argument("layer_norm_channels: bad shapes");
  const int c = xs[0], p = xs[1] * xs[2];
  auto xhat = std::make_shared<Tensor<T>>(xs);
  auto rstd = std::make_shared<std::vector<T>>(p);
  std::vector<T> mean(p, T(0)), var(p, T(0));
  const T* xv = x.value().data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < p; ++i) mean[i] += xv[static_cast<std::size_t>(ch) * p + i];
  for (int i = 0; i < p; ++i) mean[i] /= T(c);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < p; ++i) {
      const T d = xv[static_cast<std::size_t>(ch) * p + i] - mean[i];
      var[i] += d * d;
    }
  for (int i = 0; i < p; ++i) (*rstd)[i] = T(1) / std::sqrt(var[i] / T(c) + eps);
  Tensor<T> out(xs);
  for (int ch = 0; ch < c; ++ch) {
    const T gv = gamma.value()[ch], bv = beta.value()[ch];
    for (int i = 0; i < p; ++i) {
      const std::size_t idx = static_cast<std::size_t>(ch) * p + i;
      const T h = (xv[idx] - mean[i]) * (*rstd)[i];
      (*xhat)[idx] = h;
      out[idx] = gv * h + bv;
    }
  }
  return make_op<T>(std::move(out), {x, gamma, beta}, [xhat, rstd, c, p](Node<T>& n) {
    const T* dy = n.grad.data();
    const T* gv = n.inputs[1]->value.data();
    if (wants_grad(n, 1) || wants_grad(n, 2)) {
      for (int ch = 0; ch < c; ++ch) {
        T sg = 0, sb = 0;
        for (int i = 0; i < p; ++i) {
          const std::size_t idx = static_cast<std::size_t>(ch) * p + i;
          sg += dy[idx] * (*xhat)[idx];
          sb += dy[idx];
        }
        if (wants_grad(n, 1)) n.inputs[1]->grad_ref()[ch] += sg;
        if (wants_grad(n, 2)) n.inputs[2]->grad_ref()[ch] += sb;
      }
    }
    if (wants_grad(n, 0)) {
      std::vector<T> m1(p, T(0)), m2(p, T(0));
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < p; ++i) {
          const std::size_t idx = static_cast<std::size_t>(ch) * p + i;
          const T dh = dy[idx] * gv[ch];
          m1[i] += dh;
          m2[i] += dh * (*xhat)[idx];
        }
      auto& gx = n.inputs[0]->grad_ref();
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < p; ++i) {
          const std::size_t idx = static_cast<std::size_t>(ch) * p + i;
          const T dh = dy[idx] * gv[ch];
          gx[idx] += (*rstd)[i] * (dh - m1[i] / T(c) - (*xhat)[idx] * m2[i] / T(c));
        }
    }
  });
}

// Exact (erf-based) GELU.
template <typename T>
Var<T> gelu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T v = x.value()[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  }
  return make_op<T>(std::move(out), {x}, [inv_sqrt2](Node<T>& n) {
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    auto& g = n.inputs[0]->grad_ref();
    const auto& xv = n.inputs[0]->value;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const T v = xv[i];
      const T d = T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      g[i] += n.grad[i] * d;
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(x.value()[i], T(0));
  return make_op<T>(std::move(out), {x}, [](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    const auto& xv = n.inputs[0]->value;
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (xv[i] > T(0)) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> roll(const Var<T>& x, int dy, int dx) {
  return make_op<T>(swinifs::roll(x.value(), dy, dx), {x}, [dy, dx](Node<T>& n) {
    n.inputs[0]->grad_ref() += swinifs::roll(n.grad, -dy, -dx);
  });
}

template <typename T>
Var<T> window_partition(const Var<T>& x, int m) {
  const int h = x.dim(1), w = x.dim(2);
  return make_op<T>(swinifs::window_partition(x.value(), m), {x}, [m, h, w](Node<T>& n) {
    n.inputs[0]->grad_ref() += swinifs::window_reverse(n.grad, m, h, w);
  });
}

template <typename T>
Var<T> window_reverse(const Var<T>& windows, int m, int h, int w) {
  return make_op<T>(swinifs::window_reverse(windows.value(), m, h, w), {windows}, [m](Node<T>& n) {
    n.inputs[0]->grad_ref() += swinifs::window_partition(n.grad, m);
  });
}

template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
  return make_op<T>(swinifs::pixel_shuffle(x.value(), r), {x}, [r](Node<T>& n) {
    n.inputs[0]->grad_ref() += swinifs::pixel_unshuffle(n.grad, r);
  });
}

template <typename T>
Var<T> pad_replicate(const Var<T>& x, int out_h, int out_w) {
  const int h = x.dim(1), w = x.dim(2);
  return make_op<T>(swinifs::pad_replicate(x.value(), out_h, out_w), {x}, [h, w](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    const int c = n.grad.dim(0), oh = n.grad.dim(1), ow = n.grad.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) g(ch, std::min(y, h - 1), std::min(xx, w - 1)) += n.grad(ch, y, xx);
  });
}

template <typename T>
Var<T> crop(const Var<T>& x, int h, int w) {
  return make_op<T>(swinifs::crop(x.value(), h, w), {x}, [h, w](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    for (int ch = 0; ch < g.dim(0); ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) g(ch, y, xx) += n.grad(ch, y, xx);
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_channels: spatial size mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const std::size_t na = a.value().numel();
  Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.value().values().begin(), a.value().values().end(), out.data());
  std::copy(b.value().values().begin(), b.value().values().end(), out.data() + na);
  return make_op<T>(std::move(out), {a, b}, [na](Node<T>& n) {
    if (wants_grad(n, 0)) {
      auto& g = n.inputs[0]->grad_ref();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (wants_grad(n, 1)) {
      auto& g = n.inputs[1]->grad_ref();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[na + i];
    }
  });
}

// Max pooling without padding, floor output size.
template <typename T>
Var<T> max_pool2d(const Var<T>& x, int kernel, int stride) {
  const auto& xs = x.shape();
  if (xs.size() != 3 || xs[1] < kernel || xs[2] < kernel) throw std::invalid_argument("max_pool2d: input too small");
  const int c = xs[0], h = xs[1], w = xs[2];
  const int ho = (h - kernel) / stride + 1, wo = (w - kernel) / stride + 1;
  Tensor<T> out({c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        std::size_t best = (static_cast<std::size_t>(ch) * h + oy * stride) * w + ox * stride;
        for (int i = 0; i < kernel; ++i)
          for (int j = 0; j < kernel; ++j) {
            const std::size_t idx = (static_cast<std::size_t>(ch) * h + oy * stride + i) * w + ox * stride + j;
            if (x.value()[idx] > x.value()[best]) best = idx;
          }
        const std::size_t o = (static_cast<std::size_t>(ch) * ho + oy) * wo + ox;
        out[o] = x.value()[best];
        (*argmax)[o] = best;
      }
  return make_op<T>(std::move(out), {x}, [argmax](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    for (std::size_t o = 0; o < argmax->size(); ++o) g[(*argmax)[o]] += n.grad[o];
  });
}

// (x - mean[c]) / stddev[c] with constant statistics.
template <typename T>
Var<T> channel_affine(const Var<T>& x, const std::vector<T>& mean, const std::vector<T>& stddev) {
  const auto& xs = x.shape();
  if (xs.size() != 3 || mean.size() != static_cast<std::size_t>(xs[0]) || stddev.size() != mean.size())
    throw std::invalid_argument("channel_affine: statistics do not match channel count");
  const std::size_t plane = static_cast<std::size_t>(xs[1]) * xs[2];
  Tensor<T> out(xs);
  for (int ch = 0; ch < xs[0]; ++ch)
    for (std::size_t i = 0; i < plane; ++i)
      out[ch * plane + i] = (x.value()[ch * plane + i] - mean[ch]) / stddev[ch];
  return make_op<T>(std::move(out), {x}, [stddev, plane](Node<T>& n) {
    auto& g = n.inputs[0]->grad_ref();
    for (std::size_t ch = 0; ch < stddev.size(); ++ch)
      for (std::size_t i = 0; i < plane; ++i) g[ch * plane + i] += n.grad[ch * plane + i] / stddev[ch];
  });
}

// mean(|a - b|) over all elements.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  a.value().require_same_shape(b.value(), "mean_abs_diff");
  const std::size_t count = a.value().numel();
  if (count == 0) throw std::invalid_argument("mean_abs_diff: empty input");
  T s = 0;
  for (std::size_t i = 0; i < count; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return make_op<T>(Tensor<T>({1}, {s / T(count)}), {a, b}, [count](Node<T>& n) {
    const T g = n.grad[0] / T(count);
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(n, k)) continue;
      auto& gk = n.inputs[k]->grad_ref();
      const T sign_k = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < count; ++i) {
        const T d = av[i] - bv[i];
        if (d > T(0)) gk[i] += sign_k * g;
        else if (d < T(0)) gk[i] -= sign_k * g;
      }
    }
  });
}

// mean((a - b)^2) over all elements.
template <typename T>
Var<T> mean_sq_diff(const Var<T>& a, const Var<T>& b) {
  a.value().require_same_shape(b.value(), "mean_sq_diff");
  const std::size_t count = a.value().numel();
  if (count == 0) throw std::invalid_argument("mean_sq_diff: empty input");
  T s = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const T d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_op<T>(Tensor<T>({1}, {s / T(count)}), {a, b}, [count](Node<T>& n) {
    const T g = T(2) * n.grad[0] / T(count);
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(n, k)) continue;
      auto& gk = n.inputs[k]->grad_ref();
      const T sign_k = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < count; ++i) gk[i] += sign_k * g * (av[i] - bv[i]);
    }
  });
}

// Multi-head attention inside windows.
//
// qkv: (num_windows, N, 3C) with the query, key and value blocks laid out as
// [q | k | v] and each block split into `heads` contiguous chunks of C/heads.
// bias_table: ((2M-1)^2, heads), gathered through rel_index (N*N entries).
// mask: optional additive (num_windows, N, N).
// Returns (num_windows, N, C): per head softmax(q k^T / sqrt(d) + B + mask) v.
template <typename T>
Var<T> window_attention_core(const Var<T>& qkv, const Var<T>& bias_table, std::shared_ptr<const std::vector<int>> rel_index,
                             int heads, const Tensor<T>* mask) {
  const auto& qs = qkv.shape();
  if (qs.size() != 3 || qs[2] % 3 != 0) throw std::invalid_argument("window_attention_core: qkv must be (W,N,3C)");
  const int nw = qs[0], n = qs[1], c = qs[2] / 3;
  if (heads < 1 || c % heads != 0) throw std::invalid_argument("window_attention_core: C not divisible by heads");
  const int d = c / heads;
  if (rel_index->size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("window_attention_core: relative index size mismatch");
  if (bias_table.shape().size() != 2 || bias_table.dim(1) != heads)
    throw std::invalid_argument("window_attention_core: bias table must be (entries, heads)");
  if (mask && (mask->shape() != Shape{nw, n, n}))
    throw std::invalid_argument("window_attention_core: mask must be " + shape_str({nw, n, n}));
  for (int idx : *rel_index)
    if (idx < 0 || idx >= bias_table.dim(0)) throw std::invalid_argument("window_attention_core: index out of table");

  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Strided = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
  using StridedOut = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
  const T scale = T(1) / std::sqrt(T(d));
  const int row = 3 * c;

  auto probs = std::make_shared<Tensor<T>>(Shape{nw, heads, n, n});
  Tensor<T> out({nw, n, c});
  const T* table = bias_table.value().data();
  Mat s(n, n);
  for (int w = 0; w < nw; ++w) {
    const T* base = qkv.value().data() + static_cast<std::size_t>(w) * n * row;
    for (int h = 0; h < heads; ++h) {
      Strided q(base + h * d, n, d, Eigen::OuterStride<>(row));
      Strided k(base + c + h * d, n, d, Eigen::OuterStride<>(row));
      Strided v(base + 2 * c + h * d, n, d, Eigen::OuterStride<>(row));
      s.noalias() = scale * (q * k.transpose());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          s(i, j) += table[static_cast<std::size_t>((*rel_index)[i * n + j]) * heads + h];
          if (mask) s(i, j) += (*mask)[(static_cast<std::size_t>(w) * n + i) * n + j];
        }
      T* p = probs->data() + (static_cast<std::size_t>(w) * heads + h) * n * n;
      for (int i = 0; i < n; ++i) {
        T mx = s(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, s(i, j));
        T sum = 0;
        for (int j = 0; j < n; ++j) {
          p[i * n + j] = std::exp(s(i, j) - mx);
          sum += p[i * n + j];
        }
        for (int j = 0; j < n; ++j) p[i * n + j] /= sum;
      }
      Eigen::Map<const Mat> pm(p, n, n);
      StridedOut o(out.data() + static_cast<std::size_t>(w) * n * c + h * d, n, d, Eigen::OuterStride<>(c));
      o.noalias() = pm * v;
    }
  }

  return make_op<T>(std::move(out), {qkv, bias_table}, [probs, rel_index, nw, n, c, d, heads, scale](Node<T>& nd) {
    const int row = 3 * c;
    const T* qv = nd.inputs[0]->value.data();
    T* gq = wants_grad(nd, 0) ? nd.inputs[0]->grad_ref().data() : nullptr;
    T* gt = wants_grad(nd, 1) ? nd.inputs[1]->grad_ref().data() : nullptr;
    Mat dp(n, n), ds(n, n);
    for (int w = 0; w < nw; ++w) {
      const T* base = qv + static_cast<std::size_t>(w) * n * row;
      for (int h = 0; h < heads; ++h) {
        Strided q(base + h * d, n, d, Eigen::OuterStride<>(row));
        Strided k(base + c + h * d, n, d, Eigen::OuterStride<>(row));
        Strided v(base + 2 * c + h * d, n, d, Eigen::OuterStride<>(row));
        Strided dout(nd.grad.data() + static_cast<std::size_t>(w) * n * c + h * d, n, d, Eigen::OuterStride<>(c));
        Eigen::Map<const Mat> p(probs->data() + (static_cast<std::size_t>(w) * heads + h) * n * n, n, n);
        dp.noalias() = dout * v.transpose();
        for (int i = 0; i < n; ++i) {
          T dot = 0;
          for (int j = 0; j < n; ++j) dot += dp(i, j) * p(i, j);
          for (int j = 0; j < n; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot);
        }
        if (gq) {
          T* gbase = gq + static_cast<std::size_t>(w) * n * row;
          StridedOut dq(gbase + h * d, n, d, Eigen::OuterStride<>(row));
          StridedOut dk(gbase + c + h * d, n, d, Eigen::OuterStride<>(row));
          StridedOut dv(gbase + 2 * c + h * d, n, d, Eigen::OuterStride<>(row));
          dq.noalias() += scale * (ds * k);
          dk.noalias() += scale * (ds.transpose() * q);
          dv.noalias() += p.transpose() * dout;
        }
        if (gt)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) gt[static_cast<std::size_t>((*rel_index)[i * n + j]) * heads + h] += ds(i, j);
      }
    }
  });
}

}  // namespace swinifs::ops
