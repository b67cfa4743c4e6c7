#pragma once

// Frozen convolutional feature networks: the perceptual-loss extractor and the
// backbone of the learned perceptual distance. Weights are constants; gradients
// flow only to the input image.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinifs/archive.hpp"
#include "swinifs/autograd.hpp"
#include "swinifs/ops.hpp"

namespace swinifs {

template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  // image: (3,H,W) in [0,1]. Returns one tensor per selected layer.
  virtual std::vector<Var<T>> features(const Var<T>& image) const = 0;
  virtual std::string id() const = 0;
};

template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<Var<T>> features(const Var<T>& image) const override { return {image}; }
  std::string id() const override { return "identity"; }
};

struct LayerSpec {
  enum class Kind { kConv, kRelu, kMaxPool };
  Kind kind = Kind::kConv;
  std::string name;
  int in = 0, out = 0, kernel = 3, stride = 1, pad = 1;

  static LayerSpec conv(std::string name, int in, int out, int kernel = 3, int stride = 1, int pad = 1) {
    return {Kind::kConv, std::move(name), in, out, kernel, stride, pad};
  }
  static LayerSpec relu(std::string name) { return {Kind::kRelu, std::move(name)}; }
  static LayerSpec pool(std::string name, int kernel = 2, int stride = 2) {
    return {Kind::kMaxPool, std::move(name), 0, 0, kernel, stride, 0};
  }
};

// Sequential conv/relu/max-pool stack with named taps.
template <typename T>
class ConvFeatureNet final : public FeatureExtractor<T> {
 public:
  ConvFeatureNet(std::string id, std::vector<LayerSpec> layers, std::vector<std::string> taps, std::vector<T> mean,
                 std::vector<T> stddev)
      : id_(std::move(id)), layers_(std::move(layers)), taps_(std::move(taps)), mean_(std::move(mean)), std_(std::move(stddev)) {
    for (const auto& t : taps_) {
      auto it = std::find_if(layers_.begin(), layers_.end(), [&](const LayerSpec& l) { return l.name == t; });
      if (it == layers_.end()) throw std::invalid_argument(id_ + ": unknown tap layer '" + t + "'");
      last_ = std::max(last_, static_cast<std::size_t>(it - layers_.begin()));
    }
    if (taps_.empty()) throw std::invalid_argument(id_ + ": at least one tap layer is required");
    weights_.resize(layers_.size());
  }

  std::string id() const override { return id_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<std::string>& taps() const { return taps_; }

  void set_conv(const std::string& name, Tensor<T> weight, Tensor<T> bias) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.name != name) continue;
      if (l.kind != LayerSpec::Kind::kConv) throw std::invalid_argument(name + " is not a conv layer");
      if (weight.shape() != Shape{l.out, l.in, l.kernel, l.kernel} || bias.shape() != Shape{l.out})
        throw std::invalid_argument(id_ + ": weight shape mismatch for " + name + ": " + shape_str(weight.shape()));
      weights_[i] = {Var<T>(std::move(weight)), Var<T>(std::move(bias))};
      return;
    }
    throw std::invalid_argument(id_ + ": no layer named " + name);
  }

  // Fills every conv with N(0, 2/fan_in) weights and zero bias.
  void init_random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& l : layers_) {
      if (l.kind != LayerSpec::Kind::kConv) continue;
      std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (l.in * l.kernel * l.kernel)));
      Tensor<T> w({l.out, l.in, l.kernel, l.kernel});
      for (auto& v : w.values()) v = static_cast<T>(nd(rng));
      set_conv(l.name, std::move(w), Tensor<T>({l.out}));
    }
  }

  // Reads "<layer>.weight" / "<layer>.bias" for every conv up to the last tap.
  void load_weights(const Archive& archive) {
    for (std::size_t i = 0; i <= last_; ++i) {
      const auto& l = layers_[i];
      if (l.kind != LayerSpec::Kind::kConv) continue;
      set_conv(l.name, archive.get<T>(l.name + ".weight"), archive.get<T>(l.name + ".bias"));
    }
  }

  std::vector<Var<T>> features(const Var<T>& image) const override {
    if (image.shape().size() != 3 || image.dim(0) != static_cast<int>(mean_.size()))
      throw std::invalid_argument(id_ + ": expected a " + std::to_string(mean_.size()) + "-channel image, got " +
                                  shape_str(image.shape()));
    std::vector<Var<T>> out;
    Var<T> x = ops::channel_affine(image, mean_, std_);
    for (std::size_t i = 0; i <= last_; ++i) {
      const auto& l = layers_[i];
      switch (l.kind) {
        case LayerSpec::Kind::kConv:
          if (!weights_[i].first.defined()) throw std::runtime_error(id_ + ": weights for " + l.name + " not loaded");
          x = ops::conv2d(x, weights_[i].first, weights_[i].second, l.stride, l.pad);
          break;
        case LayerSpec::Kind::kRelu:
          x = ops::relu(x);
          break;
        case LayerSpec::Kind::kMaxPool:
          x = ops::max_pool2d(x, l.kernel, l.stride);
          break;
      }
      if (std::find(taps_.begin(), taps_.end(), l.name) != taps_.end()) out.push_back(x);
    }
    return out;
  }

 private:
  std::string id_;
  std::vector<LayerSpec> layers_;
  std::vector<std::string> taps_;
  std::vector<T> mean_, std_;
  std::vector<std::pair<Var<T>, Var<T>>> weights_;
  std::size_t last_ = 0;
};

inline constexpr std::uint64_t kRandomExtractorSeed = 0x5157494e4653ULL;

// VGG-19 convolutional trunk (ImageNet statistics); layers named conv{b}_{i},
// relu{b}_{i}, pool{b}.
inline std::vector<LayerSpec> vgg19_layers() {
  const int widths[5] = {64, 128, 256, 512, 512};
  const int convs[5] = {2, 2, 4, 4, 4};
  std::vector<LayerSpec> layers;
  int in = 3;
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < convs[b]; ++i) {
      const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(i + 1);
      layers.push_back(LayerSpec::conv("conv" + suffix, in, widths[b]));
      layers.push_back(LayerSpec::relu("relu" + suffix));
      in = widths[b];
    }
    layers.push_back(LayerSpec::pool("pool" + std::to_string(b + 1)));
  }
  return layers;
}

// AlexNet trunk as used by the learned perceptual distance; taps relu1..relu5.
inline std::vector<LayerSpec> alexnet_layers() {
  return {LayerSpec::conv("conv1", 3, 64, 11, 4, 2), LayerSpec::relu("relu1"), LayerSpec::pool("pool1", 3, 2),
          LayerSpec::conv("conv2", 64, 192, 5, 1, 2), LayerSpec::relu("relu2"), LayerSpec::pool("pool2", 3, 2),
          LayerSpec::conv("conv3", 192, 384, 3, 1, 1), LayerSpec::relu("relu3"),
          LayerSpec::conv("conv4", 384, 256, 3, 1, 1), LayerSpec::relu("relu4"),
          LayerSpec::conv("conv5", 256, 256, 3, 1, 1), LayerSpec::relu("relu5")};
}

// Small fixed-seed stack for hermetic runs.
inline std::vector<LayerSpec> random_test_layers() {
  return {LayerSpec::conv("conv1", 3, 8), LayerSpec::relu("relu1"), LayerSpec::conv("conv2", 8, 8),
          LayerSpec::relu("relu2"), LayerSpec::pool("pool1"), LayerSpec::conv("conv3", 8, 16),
          LayerSpec::relu("relu3")};
}

template <typename T>
std::unique_ptr<ConvFeatureNet<T>> make_vgg19_extractor(const std::filesystem::path& weights,
                                                        std::vector<std::string> taps = {"relu4_4"}) {
  auto net = std::make_unique<ConvFeatureNet<T>>("vgg19", vgg19_layers(), std::move(taps), std::vector<T>{0.485, 0.456, 0.406},
                                                 std::vector<T>{0.229, 0.224, 0.225});
  net->load_weights(Archive::load(weights));
  return net;
}

template <typename T>
std::unique_ptr<ConvFeatureNet<T>> make_random_test_extractor(std::vector<std::string> taps = {"relu3"},
                                                              std::uint64_t seed = kRandomExtractorSeed) {
  auto net = std::make_unique<ConvFeatureNet<T>>("random_test", random_test_layers(), std::move(taps),
                                                 std::vector<T>{0.5, 0.5, 0.5}, std::vector<T>{0.5, 0.5, 0.5});
  net->init_random(seed);
  return net;
}

}  // namespace swinifs
