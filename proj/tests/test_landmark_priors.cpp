#include <cmath>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace swinifs;
using testing_support::bit_equal;
using testing_support::random_tensor;
using Catch::Matchers::WithinAbs;

namespace {

LandmarkSet all_at(double x, double y) {
  LandmarkSet s;
  for (auto& p : s.points) p = {x, y};
  return s;
}

}  // namespace

TEST_CASE("heatmaps: landmark on a pixel center gives exactly 1 there") {
  LandmarkSet lm = all_at(10.5, 7.5);
  lm[1] = {3.5, 20.5};
  const auto hm = render_heatmaps<double>(lm, 32, 32, 1.5);
  CHECK(hm.maps(0, 7, 10) == 1.0);
  CHECK(hm.maps(1, 20, 3) == 1.0);
  for (int c = 0; c < kNumLandmarks; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        CHECK(hm.maps(c, y, x) >= 0.0);
        CHECK(hm.maps(c, y, x) <= 1.0);
      }
}

TEST_CASE("heatmaps: pixel at distance sigma has value exp(-0.5)") {
  const double sigma = 2.0;
  const auto hm = render_heatmaps<double>(all_at(10.5, 10.5), 32, 32, sigma);
  CHECK_THAT(hm.maps(2, 10, 12), WithinAbs(std::exp(-0.5), 1e-15));
  CHECK_THAT(hm.maps(2, 8, 10), WithinAbs(0.60653065971263342, 1e-12));
}

TEST_CASE("heatmaps: channel sum equals the dense truncated-Gaussian sum") {
  const double sigma = 1.5;
  const Point2 p{13.3, 17.8};
  const auto hm = render_heatmaps<double>(all_at(p.x, p.y), 32, 32, sigma);
  double expect = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      const double d = std::hypot(j + 0.5 - p.x, i + 0.5 - p.y);
      if (d <= 3 * sigma) expect += std::exp(-d * d / (2 * sigma * sigma));
    }
  for (int c = 0; c < kNumLandmarks; ++c) {
    double sum = 0.0;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) sum += hm.maps(c, i, j);
    CHECK_THAT(sum, WithinAbs(expect, 1e-12));
  }
}

TEST_CASE("heatmaps: zero beyond 3 sigma") {
  const double sigma = 1.5;
  const auto hm = render_heatmaps<double>(all_at(16.0, 16.0), 32, 32, sigma);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      if (std::hypot(j + 0.5 - 16.0, i + 0.5 - 16.0) > 3 * sigma) CHECK(hm.maps(0, i, j) == 0.0);
}

TEST_CASE("heatmaps: off-frame landmark gives an all-zero channel") {
  LandmarkSet lm = all_at(5.5, 5.5);
  lm[3] = {-0.5, 10};
  lm[4] = {10, 32.0};
  const auto hm = render_heatmaps<double>(lm, 32, 32, 1.5);
  for (int c : {3, 4})
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) CHECK(hm.maps(c, i, j) == 0.0);
  CHECK(hm.maps(0, 5, 5) == 1.0);
}

TEST_CASE("heatmaps: non-positive sigma is an error") {
  CHECK_THROWS(render_heatmaps<double>(all_at(1, 1), 8, 8, 0.0));
  CHECK_THROWS(render_heatmaps<double>(all_at(1, 1), 8, 8, -1.0));
}

TEST_CASE("heatmaps: integer translation equivariance (property)") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(8.0, 24.0);
  std::uniform_int_distribution<int> shift(-4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Point2 p{u(rng), u(rng)};
    const int dx = shift(rng), dy = shift(rng);
    const auto a = render_heatmaps<double>(all_at(p.x, p.y), 32, 32, 1.5);
    const auto b = render_heatmaps<double>(all_at(p.x + dx, p.y + dy), 32, 32, 1.5);
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) {
        const int si = i - dy, sj = j - dx;
        if (si < 0 || si >= 32 || sj < 0 || sj >= 32) continue;
        CHECK_THAT(b.maps(0, i, j), WithinAbs(a.maps(0, si, sj), 1e-12));
      }
  }
}

TEST_CASE("heatmaps: 90-degree rotational symmetry at the center of an odd map") {
  const int n = 15;
  const auto hm = render_heatmaps<double>(all_at(n / 2.0, n / 2.0), n, n, 2.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK_THAT(hm.maps(0, i, j), WithinAbs(hm.maps(0, j, n - 1 - i), 1e-9));
}

TEST_CASE("heatmaps: values do not increase with distance (property)") {
  const Point2 p{12.2, 9.7};
  const auto hm = render_heatmaps<double>(all_at(p.x, p.y), 24, 24, 1.5);
  std::vector<std::pair<double, double>> dv;
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j < 24; ++j) dv.emplace_back(std::hypot(j + 0.5 - p.x, i + 0.5 - p.y), hm.maps(0, i, j));
  std::sort(dv.begin(), dv.end());
  for (std::size_t k = 1; k < dv.size(); ++k)
    if (dv[k].first > dv[k - 1].first) CHECK(dv[k].second <= dv[k - 1].second);
}

TEST_CASE("build_model_input: 3x16x16 image + 5x16x16 stack -> 8x16x16") {
  const auto img = random_tensor({3, 16, 16}, 1);
  const auto hm = render_heatmaps<double>(all_at(8.1, 7.9), 16, 16, 1.5);
  const auto in = build_model_input(img, hm, 8);
  CHECK(in.tensor.shape() == Shape{8, 16, 16});
  CHECK(in.scale == 8);
  CHECK(bit_equal(slice_channels(in.tensor, 0, 3), img));
  CHECK(bit_equal(slice_channels(in.tensor, 3, 8), hm.maps));
}

TEST_CASE("build_model_input: zero heatmaps leave channels 3-7 zero") {
  const auto img = random_tensor({3, 16, 16}, 2);
  const HeatmapStack<double> hm{Tensor<double>({5, 16, 16}), 1.5};
  const auto in = build_model_input(img, hm);
  for (int c = 3; c < 8; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(in.tensor(c, y, x) == 0.0);
  CHECK(bit_equal(slice_channels(in.tensor, 0, 3), img));
}

TEST_CASE("build_model_input: size mismatch is an error") {
  const auto img = random_tensor({3, 16, 16}, 3);
  const auto hm = render_heatmaps<double>(all_at(4, 4), 32, 32, 1.5);
  CHECK_THROWS(build_model_input(img, hm));
}
