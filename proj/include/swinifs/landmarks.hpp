#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "swinifs/resample.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

inline constexpr int kHrSize = 128;
inline constexpr int kNumLandmarks = 5;

// Continuous pixel frame: pixel (row i, col j) covers [j, j+1) x [i, i+1) and
// its center sits at (j + 0.5, i + 0.5). Downscaling by s maps x to x / s.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct LandmarkSet {
  enum Index { kLeftEye = 0, kRightEye, kNose, kMouthLeft, kMouthRight };
  static constexpr std::array<const char*, kNumLandmarks> kNames{"left_eye", "right_eye", "nose", "mouth_left",
                                                                 "mouth_right"};

  std::array<Point2, kNumLandmarks> points{};

  Point2& operator[](int i) { return points.at(static_cast<std::size_t>(i)); }
  const Point2& operator[](int i) const { return points.at(static_cast<std::size_t>(i)); }
  const Point2& left_eye() const { return points[kLeftEye]; }
  const Point2& right_eye() const { return points[kRightEye]; }
  const Point2& nose() const { return points[kNose]; }
  const Point2& mouth_left() const { return points[kMouthLeft]; }
  const Point2& mouth_right() const { return points[kMouthRight]; }

  LandmarkSet scaled(double factor) const {
    LandmarkSet out = *this;
    for (auto& p : out.points) {
      p.x *= factor;
      p.y *= factor;
    }
    return out;
  }

  bool inside(double width, double height) const {
    for (const auto& p : points)
      if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) return false;
    return true;
  }

  static LandmarkSet from_flat(std::span<const double> xy) {
    if (xy.size() != 2 * kNumLandmarks) throw std::invalid_argument("LandmarkSet: expected 10 coordinates");
    LandmarkSet s;
    for (int i = 0; i < kNumLandmarks; ++i) s.points[i] = {xy[2 * i], xy[2 * i + 1]};
    return s;
  }

  std::array<double, 2 * kNumLandmarks> flat() const {
    std::array<double, 2 * kNumLandmarks> out{};
    for (int i = 0; i < kNumLandmarks; ++i) {
      out[2 * i] = points[i].x;
      out[2 * i + 1] = points[i].y;
    }
    return out;
  }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

struct AnnotatedLandmarks {
  std::string image_id;
  LandmarkSet landmarks;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || std::isspace(static_cast<unsigned char>(c)); };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses CelebA list_landmarks style text: "<id> x1 y1 ... x5 y5" per line,
// separated by whitespace and/or commas. A leading record-count line and a
// column-name header line are skipped when present; '#' starts a comment.
inline std::vector<AnnotatedLandmarks> parse_landmark_annotations(std::istream& in, const std::string& source = "<stream>") {
  std::vector<AnnotatedLandmarks> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (out.empty()) {
      if (fields.size() == 1 && detail::parse_number(fields[0])) continue;
      if (fields.size() >= 2 && !detail::parse_number(fields[1])) continue;
    }
    if (fields.size() != 1 + 2 * kNumLandmarks)
      throw ParseError(source, line_no,
                       "expected an id and 10 coordinates, found " + std::to_string(fields.size() - 1) + " values");
    std::array<double, 2 * kNumLandmarks> xy{};
    for (std::size_t k = 0; k < xy.size(); ++k) {
      auto v = detail::parse_number(fields[k + 1]);
      if (!v) throw ParseError(source, line_no, "non-numeric coordinate '" + std::string(fields[k + 1]) + "'");
      xy[k] = *v;
    }
    std::string id(fields[0]);
    if (!ids.insert(id).second) throw ParseError(source, line_no, "duplicate image id '" + id + "'");
    out.push_back({std::move(id), LandmarkSet::from_flat(xy)});
  }
  return out;
}

inline std::vector<AnnotatedLandmarks> load_landmark_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open landmark annotations: " + path.string());
  return parse_landmark_annotations(in, path.string());
}

template <typename T>
struct ImageRecord {
  std::string image_id;
  Tensor<T> hr_image;  // (3, 128, 128) in [0,1]
  LandmarkSet landmarks_hr;
};

// Integer crop window in source pixels, [x0, x1) x [y0, y1).
struct CropBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

// Tight box = the pixels containing the landmarks; it is grown by margin_frac
// of its width (height) on the left and right (top and bottom), rounded
// outward and clamped to the source.
inline CropBox landmark_crop_box(const LandmarkSet& lm, int src_w, int src_h, double margin_frac) {
  if (margin_frac < 0.0 || !std::isfinite(margin_frac)) throw std::invalid_argument("crop_face: margin_frac must be >= 0");
  if (!lm.inside(src_w, src_h)) throw std::invalid_argument("crop_face: landmarks lie outside the source image");
  double xmin = lm[0].x, xmax = lm[0].x, ymin = lm[0].y, ymax = lm[0].y;
  for (const auto& p : lm.points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  if (!(xmax > xmin) || !(ymax > ymin)) throw std::invalid_argument("crop_face: degenerate landmark box");
  const double tx0 = std::floor(xmin), tx1 = std::floor(xmax) + 1.0;
  const double ty0 = std::floor(ymin), ty1 = std::floor(ymax) + 1.0;
  const double mx = margin_frac * (tx1 - tx0), my = margin_frac * (ty1 - ty0);
  CropBox box;
  box.x0 = static_cast<int>(std::max(0.0, std::floor(tx0 - mx)));
  box.x1 = static_cast<int>(std::min<double>(src_w, std::ceil(tx1 + mx)));
  box.y0 = static_cast<int>(std::max(0.0, std::floor(ty0 - my)));
  box.y1 = static_cast<int>(std::min<double>(src_h, std::ceil(ty1 + my)));
  return box;
}

inline LandmarkSet remap_into_crop(const LandmarkSet& lm, const CropBox& box, int out_size) {
  LandmarkSet out = lm;
  const double sx = static_cast<double>(out_size) / box.width();
  const double sy = static_cast<double>(out_size) / box.height();
  for (auto& p : out.points) {
    p.x = (p.x - box.x0) * sx;
    p.y = (p.y - box.y0) * sy;
  }
  return out;
}

template <typename T>
ImageRecord<T> crop_face(const Tensor<T>& image, const LandmarkSet& landmarks, double margin_frac,
                         std::string image_id = {}, int out_size = kHrSize) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw std::invalid_argument("crop_face: expected a (3,H,W) image");
  const CropBox box = landmark_crop_box(landmarks, image.dim(2), image.dim(1), margin_frac);
  Tensor<T> patch({3, box.height(), box.width()});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < box.height(); ++y)
      for (int x = 0; x < box.width(); ++x) patch(c, y, x) = image(c, box.y0 + y, box.x0 + x);
  ImageRecord<T> rec;
  rec.image_id = std::move(image_id);
  rec.hr_image = bicubic_resample(patch, out_size, out_size);
  rec.landmarks_hr = remap_into_crop(landmarks, box, out_size);
  return rec;
}

}  // namespace swinifs
