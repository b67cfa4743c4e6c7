#pragma once

// Landmark-conditioned shifted-window transformer for face super-resolution.
//
//   input (8,H,W) --conv3x3--> F0 --[RSTB x D]--> FD ; Fres = F0 + conv3x3(FD)
//   Fres --conv3x3 to 64--> [conv to 256, pixel_shuffle(2)] x log2(s) --conv3x3 to 3-->
//   + bicubic(I_LR) -> SR (3, sH, sW)
//
// An RSTB is L Swin layers, a 3x3 conv and a residual add of the block input.
// A Swin layer is pre-norm: x += Attn(LN(x)) on (optionally shifted) MxM
// windows, then x += MLP(LN(x)) with GELU. Odd layer indices shift by M/2.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinifs/autograd.hpp"
#include "swinifs/heatmaps.hpp"
#include "swinifs/layout.hpp"
#include "swinifs/ops.hpp"
#include "swinifs/resample.hpp"

namespace swinifs {

inline constexpr int kReconChannels = 64;
inline constexpr double kShiftMaskValue = -100.0;

struct ModelConfig {
  int in_channels = 8;
  int embed_dim = 96;
  int num_rstb = 6;
  int stl_per_rstb = 6;
  int num_heads = 6;
  int window_size = 8;
  double mlp_ratio = 2.0;
  int scale = 4;
  double drop_path = 0.0;

  int hidden_dim() const { return static_cast<int>(std::lround(embed_dim * mlp_ratio)); }
  int upsample_stages() const { return scale == 8 ? 3 : 2; }

  void validate() const {
    if (in_channels != 3 + kNumLandmarks) throw std::invalid_argument("ModelConfig: in_channels must be 8");
    if (embed_dim < 1 || num_heads < 1 || embed_dim % num_heads != 0)
      throw std::invalid_argument("ModelConfig: embed_dim must be divisible by num_heads");
    if (window_size < 2) throw std::invalid_argument("ModelConfig: window_size must be >= 2");
    if (scale != 4 && scale != 8) throw std::invalid_argument("ModelConfig: scale must be 4 or 8");
    if (num_rstb < 1 || stl_per_rstb < 1) throw std::invalid_argument("ModelConfig: num_rstb and stl_per_rstb must be >= 1");
    if (!(mlp_ratio > 0.0) || hidden_dim() < 1) throw std::invalid_argument("ModelConfig: mlp_ratio must be > 0");
    if (!(drop_path >= 0.0 && drop_path < 1.0)) throw std::invalid_argument("ModelConfig: drop_path must be in [0,1)");
  }

  // embed_dim 32, D=2, L=2, M=4, two heads.
  static ModelConfig micro(int scale = 4) {
    ModelConfig c;
    c.embed_dim = 32;
    c.num_rstb = 2;
    c.stl_per_rstb = 2;
    c.num_heads = 2;
    c.window_size = 4;
    c.scale = scale;
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct ConvParams {
  Var<T> weight;  // (O, C, k, k)
  Var<T> bias;    // (O)
};

template <typename T>
struct LinearParams {
  Var<T> weight;  // (O, C)
  Var<T> bias;    // (O)
};

template <typename T>
struct NormParams {
  Var<T> weight;
  Var<T> bias;
};

// Relative position index of an MxM window: entry (i, j) addresses the bias
// table row for the offset between pixels i and j, in [0, (2M-1)^2).
inline std::vector<int> relative_position_index(int m) {
  const int n = m * m;
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int dy = i / m - j / m + (m - 1);
      const int dx = i % m - j % m + (m - 1);
      idx[static_cast<std::size_t>(i) * n + j] = dy * (2 * m - 1) + dx;
    }
  return idx;
}

template <typename T>
struct AttentionParams {
  LinearParams<T> qkv;   // (3C, C)
  LinearParams<T> proj;  // (C, C)
  Var<T> relative_position_bias_table;  // ((2M-1)^2, heads)
  int window_size = 0;
  int num_heads = 0;
  std::shared_ptr<const std::vector<int>> relative_index;
};

template <typename T>
struct SwinLayerParams {
  NormParams<T> norm1;
  AttentionParams<T> attn;
  NormParams<T> norm2;
  LinearParams<T> fc1;
  LinearParams<T> fc2;
  double drop_prob = 0.0;
};

template <typename T>
struct RstbParams {
  std::vector<SwinLayerParams<T>> layers;
  ConvParams<T> conv;
};

template <typename T>
struct ReconstructionParams {
  ConvParams<T> reduce;
  std::vector<ConvParams<T>> upsample;
  ConvParams<T> last;
};

// Training-time state consumed by stochastic depth; default is inference.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Additive mask for shifted windows over an (h, w) map: after a cyclic shift by
// `shift`, pixels that came from different regions of the unshifted map must
// not attend to each other. Regions are the 3x3 slices [0,h-m), [h-m,h-shift),
// [h-shift,h) per axis.
template <typename T>
Tensor<T> build_shift_mask(int h, int w, int m, int shift) {
  Tensor<T> region({1, h, w});
  auto band = [m, shift](int v, int size) { return v < size - m ? 0 : (v < size - shift ? 1 : 2); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) region(0, y, x) = static_cast<T>(band(y, h) * 3 + band(x, w));
  const Tensor<T> win = window_partition(region, m);
  const int nw = win.dim(0), n = win.dim(1);
  Tensor<T> mask({nw, n, n});
  for (int k = 0; k < nw; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        mask[(static_cast<std::size_t>(k) * n + i) * n + j] =
            win[static_cast<std::size_t>(k) * n + i] == win[static_cast<std::size_t>(k) * n + j] ? T(0)
                                                                                               : T(kShiftMaskValue);
  return mask;
}

template <typename T>
void check_finite(const Var<T>& x, const char* stage) {
#ifndef NDEBUG
  if (!all_finite(x.value())) throw std::runtime_error(std::string("non-finite activations after ") + stage);
#else
  (void)x;
  (void)stage;
#endif
}

template <typename T>
Var<T> conv3x3(const Var<T>& x, const ConvParams<T>& p) {
  return ops::conv2d(x, p.weight, p.bias, 1, 1);
}

template <typename T>
Var<T> shallow_extract(const Var<T>& input, const ConvParams<T>& params) {
  if (input.shape().size() != 3 || input.dim(0) != params.weight.dim(1))
    throw std::invalid_argument("shallow_extract: expected " + std::to_string(params.weight.dim(1)) +
                                "-channel input, got " + shape_str(input.shape()));
  return conv3x3(input, params);
}

// x_win: (num_windows, M*M, C) -> (num_windows, M*M, C).
template <typename T>
Var<T> windowed_attention(const Var<T>& x_win, const AttentionParams<T>& p, const Tensor<T>* mask = nullptr) {
#ifndef NDEBUG
  if (!all_finite(x_win.value())) throw std::runtime_error("windowed_attention: non-finite input");
#endif
  const Var<T> qkv = ops::linear(x_win, p.qkv.weight, p.qkv.bias);
  const Var<T> heads = ops::window_attention_core(qkv, p.relative_position_bias_table, p.relative_index, p.num_heads, mask);
  return ops::linear(heads, p.proj.weight, p.proj.bias);
}

namespace detail {
template <typename T>
Var<T> drop_path(const Var<T>& branch, double prob, const ForwardContext& ctx) {
  if (!ctx.training || prob <= 0.0) return branch;
  if (!ctx.rng) throw std::logic_error("drop_path: training context without RNG");
  std::bernoulli_distribution keep(1.0 - prob);
  return ops::scale(branch, keep(*ctx.rng) ? static_cast<T>(1.0 / (1.0 - prob)) : T(0));
}
}  // namespace detail

// Cyclic shift amount used by a layer on an (h, w) map.
inline int layer_shift(int layer_index, int window_size, int h, int w) {
  if (layer_index % 2 == 0 || h <= window_size || w <= window_size) return 0;
  return window_size / 2;
}

template <typename T>
Var<T> swin_layer(const Var<T>& x, int layer_index, const SwinLayerParams<T>& p, const ForwardContext& ctx = {}) {
  const int h = x.dim(1), w = x.dim(2), m = p.attn.window_size;
  if (h % m != 0 || w % m != 0) throw std::invalid_argument("swin_layer: input not padded to the window size");
  const int shift = layer_shift(layer_index, m, h, w);

  Var<T> y = ops::layer_norm_channels(x, p.norm1.weight, p.norm1.bias);
  if (shift) y = ops::roll(y, -shift, -shift);
  Tensor<T> mask;
  if (shift) mask = build_shift_mask<T>(h, w, m, shift);
  y = windowed_attention(ops::window_partition(y, m), p.attn, shift ? &mask : nullptr);
  y = ops::window_reverse(y, m, h, w);
  if (shift) y = ops::roll(y, shift, shift);
  Var<T> out = ops::add(x, detail::drop_path(y, p.drop_prob, ctx));

  Var<T> z = ops::layer_norm_channels(out, p.norm2.weight, p.norm2.bias);
  z = ops::channel_linear(ops::gelu(ops::channel_linear(z, p.fc1.weight, p.fc1.bias)), p.fc2.weight, p.fc2.bias);
  return ops::add(out, detail::drop_path(z, p.drop_prob, ctx));
}

template <typename T>
Var<T> rstb_forward(const Var<T>& x, const RstbParams<T>& p, const ForwardContext& ctx = {}) {
  Var<T> y = x;
  for (std::size_t j = 0; j < p.layers.size(); ++j) y = swin_layer(y, static_cast<int>(j), p.layers[j], ctx);
  Var<T> out = ops::add(conv3x3(y, p.conv), x);
  check_finite(out, "rstb");
  return out;
}

template <typename T>
Var<T> deep_extract(const Var<T>& f0, const std::vector<RstbParams<T>>& blocks, const ConvParams<T>& fusion,
                    const ForwardContext& ctx = {}) {
  Var<T> f = f0;
  for (const auto& b : blocks) f = rstb_forward(f, b, ctx);
  return ops::add(f0, conv3x3(f, fusion));
}

// f_res may be padded beyond (H, W) of lr_image; the upsampled body is cropped
// to (sH, sW) before the bicubic skip is added. No clamping here.
template <typename T>
Var<T> reconstruct(const Var<T>& f_res, const Tensor<T>& lr_image, int scale, const ReconstructionParams<T>& p) {
  if (scale != 4 && scale != 8) throw std::invalid_argument("reconstruct: scale must be 4 or 8");
  const std::size_t stages = scale == 8 ? 3 : 2;
  if (p.upsample.size() != stages) throw std::invalid_argument("reconstruct: parameters built for a different scale");
  if (lr_image.ndim() != 3 || lr_image.dim(0) != 3) throw std::invalid_argument("reconstruct: lr_image must be (3,H,W)");
  Var<T> y = conv3x3(f_res, p.reduce);
  for (const auto& stage : p.upsample) y = ops::pixel_shuffle(conv3x3(y, stage), 2);
  y = conv3x3(y, p.last);
  const int oh = lr_image.dim(1) * scale, ow = lr_image.dim(2) * scale;
  if (y.dim(1) != oh || y.dim(2) != ow) y = ops::crop(y, oh, ow);
  return ops::add_const(y, bicubic_resample(lr_image, oh, ow));
}

template <typename T>
class SwinIFS {
 public:
  using ParamList = std::vector<std::pair<std::string, Var<T>>>;

  SwinIFS(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    build(init_seed);
  }
  SwinIFS(const SwinIFS&) = delete;
  SwinIFS& operator=(const SwinIFS&) = delete;
  SwinIFS(SwinIFS&&) noexcept = default;
  SwinIFS& operator=(SwinIFS&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const ParamList& parameters() const { return params_; }

  Var<T>& parameter(const std::string& name) {
    for (auto& [n, v] : params_)
      if (n == name) return v;
    throw std::out_of_range("no parameter named " + name);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : params_) n += v.value().numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, v] : params_) v.zero_grad();
  }

  const ConvParams<T>& shallow() const { return shallow_; }
  const std::vector<RstbParams<T>>& blocks() const { return blocks_; }
  const ConvParams<T>& fusion() const { return fusion_; }
  const ReconstructionParams<T>& reconstruction() const { return recon_; }

  // (8,H,W) -> (3, sH, sW). Input is replicate-padded to a multiple of the window.
  Var<T> forward(const ModelInput<T>& input, const ForwardContext& ctx = {}) const {
    const auto& s = input.tensor.shape();
    if (s.size() != 3 || s[0] != config_.in_channels)
      throw std::invalid_argument("forward: expected (8,H,W) input, got " + shape_str(s));
    if (input.scale != config_.scale)
      throw std::invalid_argument("forward: input built for scale " + std::to_string(input.scale) + ", model is x" +
                                  std::to_string(config_.scale));
    const int m = config_.window_size;
    Var<T> x(input.tensor);
    const int ph = round_up(s[1], m), pw = round_up(s[2], m);
    if (ph != s[1] || pw != s[2]) x = ops::pad_replicate(x, ph, pw);
    const Var<T> f0 = shallow_extract(x, shallow_);
    const Var<T> f_res = deep_extract(f0, blocks_, fusion_, ctx);
    return reconstruct(f_res, slice_channels(input.tensor, 0, 3), config_.scale, recon_);
  }

  // Inference: no graph, output clamped to [0,1].
  Tensor<T> infer(const ModelInput<T>& input) const {
    NoGradGuard guard;
    return clamp01(forward(input).value());
  }

 private:
  Var<T> add_param(const std::string& name, Tensor<T> value) {
    Var<T> v(std::move(value), true);
    params_.emplace_back(name, v);
    return v;
  }

  ConvParams<T> make_conv(const std::string& name, int out, int in, int k, std::mt19937_64& rng) {
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor<T> w({out, in, k, k}), b({out});
    for (auto& v : w.values()) v = static_cast<T>(u(rng));
    for (auto& v : b.values()) v = static_cast<T>(u(rng));
    return {add_param(name + ".weight", std::move(w)), add_param(name + ".bias", std::move(b))};
  }

  static double trunc_normal(std::mt19937_64& rng, double std) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (;;) {
      const double v = nd(rng);
      if (std::abs(v) <= 2.0) return v * std;
    }
  }

  LinearParams<T> make_linear(const std::string& name, int out, int in, std::mt19937_64& rng) {
    Tensor<T> w({out, in}), b({out});
    for (auto& v : w.values()) v = static_cast<T>(trunc_normal(rng, 0.02));
    return {add_param(name + ".weight", std::move(w)), add_param(name + ".bias", std::move(b))};
  }

  NormParams<T> make_norm(const std::string& name, int c) {
    return {add_param(name + ".weight", Tensor<T>({c}, T(1))), add_param(name + ".bias", Tensor<T>({c}))};
  }

  void build(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int e = config_.embed_dim, m = config_.window_size;
    shallow_ = make_conv("shallow", e, config_.in_channels, 3, rng);
    auto rel = std::make_shared<const std::vector<int>>(relative_position_index(m));
    const int total_layers = config_.num_rstb * config_.stl_per_rstb;
    for (int i = 0; i < config_.num_rstb; ++i) {
      RstbParams<T> block;
      for (int j = 0; j < config_.stl_per_rstb; ++j) {
        const std::string p = "rstb." + std::to_string(i) + ".layer." + std::to_string(j);
        SwinLayerParams<T> layer;
        layer.norm1 = make_norm(p + ".norm1", e);
        layer.attn.qkv = make_linear(p + ".attn.qkv", 3 * e, e, rng);
        layer.attn.proj = make_linear(p + ".attn.proj", e, e, rng);
        Tensor<T> table({(2 * m - 1) * (2 * m - 1), config_.num_heads});
        for (auto& v : table.values()) v = static_cast<T>(trunc_normal(rng, 0.02));
        layer.attn.relative_position_bias_table = add_param(p + ".attn.relative_position_bias_table", std::move(table));
        layer.attn.window_size = m;
        layer.attn.num_heads = config_.num_heads;
        layer.attn.relative_index = rel;
        layer.norm2 = make_norm(p + ".norm2", e);
        layer.fc1 = make_linear(p + ".mlp.fc1", config_.hidden_dim(), e, rng);
        layer.fc2 = make_linear(p + ".mlp.fc2", e, config_.hidden_dim(), rng);
        const int depth_index = i * config_.stl_per_rstb + j;
        layer.drop_prob = total_layers > 1 ? config_.drop_path * depth_index / (total_layers - 1) : config_.drop_path;
        block.layers.push_back(std::move(layer));
      }
      block.conv = make_conv("rstb." + std::to_string(i) + ".conv", e, e, 3, rng);
      blocks_.push_back(std::move(block));
    }
    fusion_ = make_conv("fusion", e, e, 3, rng);
    recon_.reduce = make_conv("recon.reduce", kReconChannels, e, 3, rng);
    for (int k = 0; k < config_.upsample_stages(); ++k)
      recon_.upsample.push_back(make_conv("recon.upsample." + std::to_string(k), 4 * kReconChannels, kReconChannels, 3, rng));
    recon_.last = make_conv("recon.last", 3, kReconChannels, 3, rng);
  }

  ModelConfig config_;
  ParamList params_;
  ConvParams<T> shallow_;
  std::vector<RstbParams<T>> blocks_;
  ConvParams<T> fusion_;
  ReconstructionParams<T> recon_;
};

}  // namespace swinifs
