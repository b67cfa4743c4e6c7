#pragma once

// Prepared-dataset manifest: one sample per line,
//   <hr_path> <lr_path> x1 y1 x2 y2 x3 y3 x4 y4 x5 y5 <scale>
// with LR-frame landmarks and paths relative to the manifest's directory.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinifs/landmarks.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path hr_path;
  std::filesystem::path lr_path;
  LandmarkSet landmarks_lr;
  int scale = 4;
};

inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                                 const std::string& source = "<manifest>") {
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto f = detail::split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 13) throw ParseError(source, n, "expected 13 fields, found " + std::to_string(f.size()));
    ManifestEntry e;
    e.hr_path = base_dir / std::string(f[0]);
    e.lr_path = base_dir / std::string(f[1]);
    e.image_id = std::filesystem::path(std::string(f[0])).stem().string();
    std::array<double, 10> xy{};
    for (int k = 0; k < 10; ++k) {
      auto v = detail::parse_number(f[2 + k]);
      if (!v) throw ParseError(source, n, "non-numeric landmark coordinate");
      xy[k] = *v;
    }
    e.landmarks_lr = LandmarkSet::from_flat(xy);
    auto s = detail::parse_number(f[12]);
    if (!s || (*s != 4.0 && *s != 8.0)) throw ParseError(source, n, "scale must be 4 or 8");
    e.scale = static_cast<int>(*s);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

// Paths are written relative to the manifest's directory.
inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  const auto base = path.parent_path();
  out << "# hr_path lr_path lm_lr(x1 y1 ... x5 y5) scale\n" << std::setprecision(10);
  for (const auto& e : entries) {
    out << std::filesystem::relative(e.hr_path, base).generic_string() << ' '
        << std::filesystem::relative(e.lr_path, base).generic_string();
    for (double v : e.landmarks_lr.flat()) out << ' ' << v;
    out << ' ' << e.scale << '\n';
  }
}

// One training/evaluation pair in memory.
template <typename T>
struct Sample {
  std::string image_id;
  Tensor<T> hr;  // (3,128,128)
  Tensor<T> lr;  // (3,128/s,128/s)
  LandmarkSet landmarks_lr;
};

}  // namespace swinifs
