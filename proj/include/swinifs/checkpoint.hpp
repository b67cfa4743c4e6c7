#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "swinifs/archive.hpp"
#include "swinifs/config.hpp"
#include "swinifs/model.hpp"
#include "swinifs/optim.hpp"

namespace swinifs {

inline constexpr const char* kCheckpointFormat = "swinifs-checkpoint";

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void put_model(Archive& a, const SwinIFS<T>& model) {
  for (const auto& [name, v] : model.parameters()) a.put("model/" + name, v.value());
  a.meta["model_config"] = to_json(model.config());
}

template <typename T>
void restore_model(const Archive& a, SwinIFS<T>& model) {
  for (const auto& [name, v] : model.parameters()) {
    Tensor<T> t = a.get<T>("model/" + name);
    if (t.shape() != v.value().shape())
      throw std::runtime_error("checkpoint tensor " + name + " has shape " + shape_str(t.shape()) + ", model expects " +
                               shape_str(v.value().shape()));
    Var<T> p = v;
    p.mutable_value() = std::move(t);
  }
}

template <typename T>
void put_adam(Archive& a, const Adam<T>& adam) {
  a.meta["adam_step"] = adam.step_count();
  for (const auto& [name, st] : adam.state()) {
    a.put("adam/m/" + name, st.m);
    a.put("adam/v/" + name, st.v);
  }
}

template <typename T>
void restore_adam(const Archive& a, const SwinIFS<T>& model, Adam<T>& adam) {
  std::map<std::string, typename Adam<T>::Moments> state;
  for (const auto& [name, v] : model.parameters()) {
    if (!a.contains("adam/m/" + name)) continue;
    state[name] = {a.get<T>("adam/m/" + name), a.get<T>("adam/v/" + name)};
  }
  adam.restore(a.meta.at("adam_step").get<long>(), std::move(state));
}

inline ModelConfig checkpoint_model_config(const Archive& a) {
  if (a.meta.value("format", "") != kCheckpointFormat) throw std::runtime_error("archive is not a model checkpoint");
  return model_config_from_json(a.meta.at("model_config"));
}

// Loads the weights of a checkpoint. When `expected` is given the stored
// ModelConfig must match it exactly.
template <typename T>
SwinIFS<T> load_model(const std::filesystem::path& path, const std::optional<ModelConfig>& expected = std::nullopt) {
  const Archive a = Archive::load(path);
  const ModelConfig stored = checkpoint_model_config(a);
  if (expected && !(*expected == stored))
    throw ConfigMismatch("checkpoint " + path.string() + " was written for model config " + to_json(stored).dump() +
                         ", expected " + to_json(*expected).dump());
  SwinIFS<T> model(stored, 0);
  restore_model(a, model);
  return model;
}

// Weights-only checkpoint (no optimizer state).
template <typename T>
void save_model(const std::filesystem::path& path, const SwinIFS<T>& model, std::uint64_t seed = 0, long iteration = 0) {
  Archive a;
  a.meta["format"] = kCheckpointFormat;
  a.meta["iteration"] = iteration;
  a.meta["seed"] = seed;
  a.meta["precision"] = dtype_name(dtype_of<T>());
  put_model(a, model);
  a.save(path);
}

template <typename Engine>
std::string rng_state(const Engine& e) {
  std::ostringstream o;
  o << e;
  return o.str();
}

template <typename Engine>
void restore_rng(Engine& e, const std::string& s) {
  std::istringstream in(s);
  in >> e;
  if (!in) throw std::runtime_error("corrupt RNG state in checkpoint");
}

}  // namespace swinifs
