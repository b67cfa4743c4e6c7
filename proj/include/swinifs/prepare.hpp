#pragma once

// Dataset preparation: aligned source images + five-point annotations ->
// 128x128 HR crops, LR inputs and a manifest. Output images are 8-bit PNG.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinifs/dataset.hpp"
#include "swinifs/degradation.hpp"
#include "swinifs/image_io.hpp"
#include "swinifs/landmarks.hpp"
#include "swinifs/seed.hpp"
#include "swinifs/synthetic.hpp"

namespace swinifs {

struct PrepareOptions {
  int scale = 4;
  double margin = 0.5;
  DegradationSpec degradation;  // scale is overridden by `scale`
  std::uint64_t seed = 0;       // noise stream root
  std::size_t limit = 0;        // 0: all annotated images
  std::size_t skip = 0;         // annotations skipped before `limit` applies
};

namespace detail {

inline ManifestEntry write_pair(const std::filesystem::path& out_dir, const std::string& id, const Tensor<double>& hr,
                                const Tensor<double>& lr, const LandmarkSet& lm_lr, int scale) {
  const auto stem = std::filesystem::path(id).stem().string();
  ManifestEntry e;
  e.image_id = stem;
  e.hr_path = out_dir / "hr" / (stem + ".png");
  e.lr_path = out_dir / ("lr_x" + std::to_string(scale)) / (stem + ".png");
  e.landmarks_lr = lm_lr;
  e.scale = scale;
  save_png(e.hr_path, hr);
  save_png(e.lr_path, lr);
  return e;
}

}  // namespace detail

// Reads each annotated image from `images_dir`, crops, degrades and writes
// <out_dir>/hr, <out_dir>/lr_x<s> and <out_dir>/manifest.txt. Source files are
// only read. Returns the manifest path.
inline std::filesystem::path prepare_dataset(const std::filesystem::path& images_dir,
                                             const std::filesystem::path& annotations,
                                             const std::filesystem::path& out_dir, const PrepareOptions& opts) {
  DegradationSpec spec = opts.degradation;
  spec.scale = opts.scale;
  spec.validate();
  const auto ann = load_landmark_annotations(annotations);
  const SeedPlan seeds = seed_everything(opts.seed);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = opts.skip; i < ann.size(); ++i) {
    if (opts.limit && entries.size() >= opts.limit) break;
    const auto& a = ann[i];
    const auto src = load_image<double>(images_dir / a.image_id);
    const auto rec = crop_face(src, a.landmarks, opts.margin, a.image_id);
    const auto d = degrade(rec, spec, seeds.noise(i));
    entries.push_back(detail::write_pair(out_dir, a.image_id, rec.hr_image, d.lr_image, d.landmarks_lr, opts.scale));
  }
  if (entries.empty()) throw std::runtime_error("prepare_dataset: no images prepared from " + annotations.string());
  const auto manifest = out_dir / "manifest.txt";
  write_manifest(manifest, entries);
  return manifest;
}

// Procedural faces written in the same layout as prepare_dataset.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& out_dir, int count, int scale,
                                                     std::uint64_t first_seed = 100) {
  if (count < 1) throw std::invalid_argument("write_synthetic_dataset: count must be >= 1");
  DegradationSpec spec;
  spec.scale = scale;
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < count; ++i) {
    const auto rec = synthetic_record<double>(first_seed + static_cast<std::uint64_t>(i));
    const auto d = degrade(rec, spec, 0);
    entries.push_back(detail::write_pair(out_dir, rec.image_id, rec.hr_image, d.lr_image, d.landmarks_lr, scale));
  }
  const auto manifest = out_dir / "manifest.txt";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace swinifs
