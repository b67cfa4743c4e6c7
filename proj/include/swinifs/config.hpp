#pragma once

// Flat "key = value" experiment configuration ('#' starts a comment), plus JSON
// conversions used in checkpoint metadata.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swinifs/degradation.hpp"
#include "swinifs/feature_net.hpp"
#include "swinifs/heatmaps.hpp"
#include "swinifs/losses.hpp"
#include "swinifs/model.hpp"

namespace swinifs {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::vector<long> milestones{250000, 400000};
  double lr_decay = 0.5;
  int batch_size = 16;
  long max_iters = 400000;
  std::uint64_t seed = 0;
  long checkpoint_every = 5000;
  long eval_every = 0;
  int scale = 4;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
    for (std::size_t i = 1; i < milestones.size(); ++i)
      if (milestones[i] <= milestones[i - 1]) throw std::invalid_argument("TrainConfig: milestones must be strictly increasing");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("TrainConfig: max_iters must be >= 0");
    if (scale != 4 && scale != 8) throw std::invalid_argument("TrainConfig: scale must be 4 or 8");
    if (!(lr_decay > 0.0)) throw std::invalid_argument("TrainConfig: lr_decay must be > 0");
  }
};

struct LossConfig {
  LossWeights weights;
  std::string extractor = "vgg19";  // vgg19 | random_test
  std::vector<std::string> extractor_layers;  // empty: extractor default
  std::string extractor_weights;              // archive path for vgg19
};

struct DataConfig {
  std::string train_manifest;
  std::string val_manifest;
  std::string out_dir = "runs/default";
  double margin = 0.5;
  double noise_sigma = 0.0;
  double blur_sigma = 0.0;  // 0: no blur kernel
  int blur_size = 0;
  std::string lr_mode = "precomputed";  // precomputed | on_the_fly
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  HeatmapConfig heatmap;
  LossConfig loss;
  DataConfig data;
  std::string precision = "float";  // float | double

  void validate() const {
    model.validate();
    train.validate();
    loss.weights.validate();
    if (model.scale != train.scale) throw std::invalid_argument("config: model.scale and train.scale differ");
    if (precision != "float" && precision != "double") throw std::invalid_argument("config: precision must be float or double");
    if (data.lr_mode != "precomputed" && data.lr_mode != "on_the_fly")
      throw std::invalid_argument("config: data.lr_mode must be precomputed or on_the_fly");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename V>
V parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  V v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw std::invalid_argument("config: bad value for " + key + ": '" + text + "'");
  return v;
}

template <typename V>
std::vector<V> parse_list(const std::string& key, const std::string& text) {
  std::vector<V> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_value<V>(key, item));
  }
  return out;
}

}  // namespace detail

using FlatConfig = std::map<std::string, std::string>;

inline FlatConfig parse_flat_config(std::istream& in, const std::string& source = "<config>") {
  FlatConfig out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(source + ":" + std::to_string(n) + ": expected key = value");
    out[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

// Applies recognised keys onto `cfg`; unknown keys are rejected.
inline void apply_flat_config(const FlatConfig& flat, ExperimentConfig& cfg) {
  using detail::parse_list;
  using detail::parse_value;
  for (const auto& [k, v] : flat) {
    if (k == "model.embed_dim") cfg.model.embed_dim = parse_value<int>(k, v);
    else if (k == "model.num_rstb") cfg.model.num_rstb = parse_value<int>(k, v);
    else if (k == "model.stl_per_rstb") cfg.model.stl_per_rstb = parse_value<int>(k, v);
    else if (k == "model.num_heads") cfg.model.num_heads = parse_value<int>(k, v);
    else if (k == "model.window_size") cfg.model.window_size = parse_value<int>(k, v);
    else if (k == "model.mlp_ratio") cfg.model.mlp_ratio = parse_value<double>(k, v);
    else if (k == "model.drop_path") cfg.model.drop_path = parse_value<double>(k, v);
    else if (k == "model.scale" || k == "train.scale" || k == "scale") {
      cfg.model.scale = cfg.train.scale = parse_value<int>(k, v);
    }
    else if (k == "heatmap.sigma") cfg.heatmap.sigma = parse_value<double>(k, v);
    else if (k == "heatmap.truncation_radius_sigmas") cfg.heatmap.truncation_radius_sigmas = parse_value<double>(k, v);
    else if (k == "loss.lambda_l1") cfg.loss.weights.lambda_l1 = parse_value<double>(k, v);
    else if (k == "loss.lambda_perc") cfg.loss.weights.lambda_perc = parse_value<double>(k, v);
    else if (k == "loss.extractor") cfg.loss.extractor = v;
    else if (k == "loss.extractor_layers") cfg.loss.extractor_layers = parse_list<std::string>(k, v);
    else if (k == "loss.extractor_weights") cfg.loss.extractor_weights = v;
    else if (k == "train.lr") cfg.train.lr = parse_value<double>(k, v);
    else if (k == "train.beta1") cfg.train.beta1 = parse_value<double>(k, v);
    else if (k == "train.beta2") cfg.train.beta2 = parse_value<double>(k, v);
    else if (k == "train.milestones") cfg.train.milestones = parse_list<long>(k, v);
    else if (k == "train.lr_decay") cfg.train.lr_decay = parse_value<double>(k, v);
    else if (k == "train.batch_size") cfg.train.batch_size = parse_value<int>(k, v);
    else if (k == "train.max_iters") cfg.train.max_iters = parse_value<long>(k, v);
    else if (k == "train.seed") cfg.train.seed = parse_value<std::uint64_t>(k, v);
    else if (k == "train.checkpoint_every") cfg.train.checkpoint_every = parse_value<long>(k, v);
    else if (k == "train.eval_every") cfg.train.eval_every = parse_value<long>(k, v);
    else if (k == "train.precision" || k == "precision") cfg.precision = v;
    else if (k == "data.train_manifest") cfg.data.train_manifest = v;
    else if (k == "data.val_manifest") cfg.data.val_manifest = v;
    else if (k == "data.out_dir") cfg.data.out_dir = v;
    else if (k == "data.margin") cfg.data.margin = parse_value<double>(k, v);
    else if (k == "data.noise_sigma") cfg.data.noise_sigma = parse_value<double>(k, v);
    else if (k == "data.blur_sigma") cfg.data.blur_sigma = parse_value<double>(k, v);
    else if (k == "data.blur_size") cfg.data.blur_size = parse_value<int>(k, v);
    else if (k == "data.lr_mode") cfg.data.lr_mode = v;
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  ExperimentConfig cfg;
  apply_flat_config(parse_flat_config(in, path.string()), cfg);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(cfg.data.train_manifest);
  resolve(cfg.data.val_manifest);
  resolve(cfg.data.out_dir);
  resolve(cfg.loss.extractor_weights);
  return cfg;
}

inline nlohmann::json to_json(const ModelConfig& m) {
  return {{"in_channels", m.in_channels}, {"embed_dim", m.embed_dim},       {"num_rstb", m.num_rstb},
          {"stl_per_rstb", m.stl_per_rstb}, {"num_heads", m.num_heads}, {"window_size", m.window_size},
          {"mlp_ratio", m.mlp_ratio},     {"scale", m.scale},             {"drop_path", m.drop_path}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.in_channels = j.at("in_channels");
  m.embed_dim = j.at("embed_dim");
  m.num_rstb = j.at("num_rstb");
  m.stl_per_rstb = j.at("stl_per_rstb");
  m.num_heads = j.at("num_heads");
  m.window_size = j.at("window_size");
  m.mlp_ratio = j.at("mlp_ratio");
  m.scale = j.at("scale");
  m.drop_path = j.at("drop_path");
  return m;
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"milestones", t.milestones},
          {"lr_decay", t.lr_decay},
          {"batch_size", t.batch_size},
          {"max_iters", t.max_iters},
          {"seed", t.seed},
          {"checkpoint_every", t.checkpoint_every},
          {"eval_every", t.eval_every},
          {"scale", t.scale}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.lr = j.at("lr");
  t.beta1 = j.at("beta1");
  t.beta2 = j.at("beta2");
  t.milestones = j.at("milestones").get<std::vector<long>>();
  t.lr_decay = j.at("lr_decay");
  t.batch_size = j.at("batch_size");
  t.max_iters = j.at("max_iters");
  t.seed = j.at("seed");
  t.checkpoint_every = j.at("checkpoint_every");
  t.eval_every = j.at("eval_every");
  t.scale = j.at("scale");
  return t;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"heatmap", {{"sigma", c.heatmap.sigma}, {"truncation_radius_sigmas", c.heatmap.truncation_radius_sigmas}}},
          {"loss",
           {{"lambda_l1", c.loss.weights.lambda_l1},
            {"lambda_perc", c.loss.weights.lambda_perc},
            {"extractor", c.loss.extractor},
            {"extractor_layers", c.loss.extractor_layers},
            {"extractor_weights", c.loss.extractor_weights}}},
          {"data",
           {{"train_manifest", c.data.train_manifest},
            {"val_manifest", c.data.val_manifest},
            {"out_dir", c.data.out_dir},
            {"margin", c.data.margin},
            {"noise_sigma", c.data.noise_sigma},
            {"blur_sigma", c.data.blur_sigma},
            {"blur_size", c.data.blur_size},
            {"lr_mode", c.data.lr_mode}}},
          {"precision", c.precision}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.model = model_config_from_json(j.at("model"));
  c.train = train_config_from_json(j.at("train"));
  c.heatmap.sigma = j.at("heatmap").at("sigma");
  c.heatmap.truncation_radius_sigmas = j.at("heatmap").at("truncation_radius_sigmas");
  const auto& l = j.at("loss");
  c.loss.weights.lambda_l1 = l.at("lambda_l1");
  c.loss.weights.lambda_perc = l.at("lambda_perc");
  c.loss.extractor = l.at("extractor");
  c.loss.extractor_layers = l.at("extractor_layers").get<std::vector<std::string>>();
  c.loss.extractor_weights = l.at("extractor_weights");
  const auto& d = j.at("data");
  c.data.train_manifest = d.at("train_manifest");
  c.data.val_manifest = d.at("val_manifest");
  c.data.out_dir = d.at("out_dir");
  c.data.margin = d.at("margin");
  c.data.noise_sigma = d.at("noise_sigma");
  c.data.blur_sigma = d.at("blur_sigma");
  c.data.blur_size = d.at("blur_size");
  c.data.lr_mode = d.at("lr_mode");
  c.precision = j.at("precision");
  return c;
}

// Degradation used for training/evaluation at the configured scale.
inline DegradationSpec degradation_from(const ExperimentConfig& c) {
  DegradationSpec d;
  d.scale = c.model.scale;
  d.noise_sigma = c.data.noise_sigma;
  if (c.data.blur_sigma > 0.0) d.blur_kernel = BlurKernel::gaussian(c.data.blur_size > 0 ? c.data.blur_size : 2 * static_cast<int>(std::ceil(3 * c.data.blur_sigma)) + 1, c.data.blur_sigma);
  return d;
}

template <typename T>
std::unique_ptr<FeatureExtractor<T>> make_extractor(const LossConfig& cfg) {
  if (cfg.extractor == "random_test") {
    return cfg.extractor_layers.empty() ? make_random_test_extractor<T>() : make_random_test_extractor<T>(cfg.extractor_layers);
  }
  if (cfg.extractor == "vgg19") {
    if (cfg.extractor_weights.empty())
      throw std::invalid_argument("loss.extractor = vgg19 needs loss.extractor_weights (see tools/export_weights.py)");
    return cfg.extractor_layers.empty() ? make_vgg19_extractor<T>(cfg.extractor_weights)
                                        : make_vgg19_extractor<T>(cfg.extractor_weights, cfg.extractor_layers);
  }
  if (cfg.extractor == "identity") return std::make_unique<IdentityExtractor<T>>();
  throw std::invalid_argument("unknown loss.extractor '" + cfg.extractor + "'");
}

}  // namespace swinifs
