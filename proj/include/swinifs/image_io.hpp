#pragma once

// Image file I/O through OpenCV. Tensors are RGB, channel-first, in [0,1].

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "swinifs/dataset.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

template <typename T = double>
Tensor<T> load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  if (bgr.empty()) throw std::runtime_error("cannot read image: " + path.string());
  const double denom = bgr.depth() == CV_16U ? 65535.0 : 255.0;
  bgr.convertTo(bgr, CV_64FC3, 1.0 / denom);
  Tensor<T> out({3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      const auto& px = bgr.at<cv::Vec3d>(y, x);
      for (int c = 0; c < 3; ++c) out(c, y, x) = static_cast<T>(px[2 - c]);
    }
  return out;
}

template <typename T>
cv::Mat to_bgr8(const Tensor<T>& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw std::invalid_argument("to_bgr8: expected (3,H,W)");
  cv::Mat out(image.dim(1), image.dim(2), CV_8UC3);
  for (int y = 0; y < out.rows; ++y)
    for (int x = 0; x < out.cols; ++x)
      for (int c = 0; c < 3; ++c)
        out.at<cv::Vec3b>(y, x)[2 - c] = cv::saturate_cast<uchar>(std::clamp<double>(image(c, y, x), 0.0, 1.0) * 255.0);
  return out;
}

template <typename T>
void save_png(const std::filesystem::path& path, const Tensor<T>& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_bgr8(image))) throw std::runtime_error("cannot write image: " + path.string());
}

template <typename T>
std::vector<Sample<T>> load_samples(const std::vector<ManifestEntry>& entries, bool load_lr = true) {
  std::vector<Sample<T>> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Sample<T> s{e.image_id, load_image<T>(e.hr_path), {}, e.landmarks_lr};
    if (load_lr) s.lr = load_image<T>(e.lr_path);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace swinifs
