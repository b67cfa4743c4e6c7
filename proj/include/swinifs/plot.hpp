#pragma once

// PSNR-versus-time scatter plot (log-scaled time axis) rendered with OpenCV.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "swinifs/trainer.hpp"

namespace swinifs {

inline cv::Mat render_scatter(const std::vector<BenchmarkRow>& rows, int width = 720, int height = 480) {
  if (rows.empty()) throw std::invalid_argument("render_scatter: no rows");
  const int left = 80, right = 30, top = 40, bottom = 60;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  double tmin = 1e300, tmax = -1e300, pmin = 1e300, pmax = -1e300;
  for (const auto& r : rows) {
    const double t = std::log10(std::max(r.seconds, 1e-9));
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
    pmin = std::min(pmin, r.psnr);
    pmax = std::max(pmax, r.psnr);
  }
  if (tmax - tmin < 1e-6) { tmin -= 0.5; tmax += 0.5; }
  if (pmax - pmin < 1e-6) { pmin -= 0.5; pmax += 0.5; }
  const double tpad = 0.1 * (tmax - tmin), ppad = 0.1 * (pmax - pmin);
  tmin -= tpad; tmax += tpad; pmin -= ppad; pmax += ppad;
  auto px = [&](double t) { return left + static_cast<int>((t - tmin) / (tmax - tmin) * (width - left - right)); };
  auto py = [&](double p) { return height - bottom - static_cast<int>((p - pmin) / (pmax - pmin) * (height - top - bottom)); };

  const cv::Scalar black(0, 0, 0), grey(200, 200, 200);
  cv::rectangle(img, {left, top}, {width - right, height - bottom}, black, 1);
  for (int k = 0; k <= 4; ++k) {
    const double p = pmin + k * (pmax - pmin) / 4, t = tmin + k * (tmax - tmin) / 4;
    cv::line(img, {left, py(p)}, {width - right, py(p)}, grey, 1);
    std::ostringstream lp, lt;
    lp.precision(2);
    lp << std::fixed << p;
    lt.precision(2);
    lt << std::scientific << std::pow(10.0, t);
    cv::putText(img, lp.str(), {8, py(p) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);
    cv::putText(img, lt.str(), {std::min(px(t) - 25, width - right - 62), height - bottom + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);
  }
  cv::putText(img, "inference time per image (s, log scale)", {width / 2 - 150, height - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              black, 1, cv::LINE_AA);
  cv::putText(img, "PSNR (dB)", {8, top - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);
  for (const auto& r : rows) {
    const cv::Point c(px(std::log10(std::max(r.seconds, 1e-9))), py(r.psnr));
    cv::circle(img, c, 6, r.model_name == "Bicubic" ? cv::Scalar(40, 40, 200) : cv::Scalar(200, 90, 30), cv::FILLED, cv::LINE_AA);
    cv::putText(img, r.model_name, c + cv::Point(9, -6), cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1, cv::LINE_AA);
  }
  return img;
}

inline void save_scatter_png(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), render_scatter(rows))) throw std::runtime_error("cannot write plot: " + path.string());
}

}  // namespace swinifs
