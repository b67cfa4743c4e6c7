#pragma once

// Named-tensor archive used for checkpoints and pretrained extractor weights.
//
// Layout (little-endian):
//   "SWIFSARC"  u32 version  u64 meta_len  meta (JSON text)
//   u64 count, then per tensor:
//   u32 name_len  name  u8 dtype(0=f32,1=f64)  u32 ndim  i64 dims[ndim]  raw data

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "swinifs/tensor.hpp"

namespace swinifs {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
}

inline const char* dtype_name(DType d) { return d == DType::kFloat32 ? "float32" : "float64"; }

class Archive {
 public:
  static constexpr char kMagic[8] = {'S', 'W', 'I', 'F', 'S', 'A', 'R', 'C'};
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();

  // float -> double -> float round-trips exactly, so one storage type serves both.
  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    tensors_[name] = Entry{dtype_of<T>(), t.template cast<double>()};
  }

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("archive has no tensor '" + name + "'");
    return it->second.data.template cast<T>();
  }

  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  DType dtype(const std::string& name) const { return tensors_.at(name).dtype; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tensors_) out.push_back(k);
    return out;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write archive: " + tmp.string());
      out.write(kMagic, sizeof(kMagic));
      write_pod(out, kVersion);
      const std::string m = meta.dump();
      write_pod(out, static_cast<std::uint64_t>(m.size()));
      out.write(m.data(), static_cast<std::streamsize>(m.size()));
      write_pod(out, static_cast<std::uint64_t>(tensors_.size()));
      for (const auto& [name, e] : tensors_) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint8_t>(e.dtype));
        write_pod(out, static_cast<std::uint32_t>(e.data.ndim()));
        for (int d : e.data.shape()) write_pod(out, static_cast<std::int64_t>(d));
        if (e.dtype == DType::kFloat32) {
          for (double v : e.data.values()) write_pod(out, static_cast<float>(v));
        } else {
          out.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.numel() * sizeof(double)));
        }
      }
      if (!out) throw std::runtime_error("short write on archive: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  static Archive load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a tensor archive: " + path.string());
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("unsupported archive version " + std::to_string(version));
    Archive a;
    std::string m(read_pod<std::uint64_t>(in), '\0');
    in.read(m.data(), static_cast<std::streamsize>(m.size()));
    a.meta = nlohmann::json::parse(m);
    const auto count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string name(read_pod<std::uint32_t>(in), '\0');
      in.read(name.data(), static_cast<std::streamsize>(name.size()));
      const auto dtype = static_cast<DType>(read_pod<std::uint8_t>(in));
      if (dtype != DType::kFloat32 && dtype != DType::kFloat64) throw std::runtime_error("bad dtype for " + name);
      Shape shape(read_pod<std::uint32_t>(in));
      for (auto& d : shape) d = static_cast<int>(read_pod<std::int64_t>(in));
      Tensor<double> t(shape);
      if (dtype == DType::kFloat32) {
        for (auto& v : t.values()) v = read_pod<float>(in);
      } else {
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
      }
      if (!in) throw std::runtime_error("truncated archive: " + path.string());
      a.tensors_[name] = Entry{dtype, std::move(t)};
    }
    return a;
  }

 private:
  struct Entry {
    DType dtype = DType::kFloat32;
    Tensor<double> data;
  };

  template <typename P>
  static void write_pod(std::ostream& out, P v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(P));
  }
  template <typename P>
  static P read_pod(std::istream& in) {
    P v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(P));
    if (!in) throw std::runtime_error("truncated archive");
    return v;
  }

  std::map<std::string, Entry> tensors_;
};

}  // namespace swinifs
