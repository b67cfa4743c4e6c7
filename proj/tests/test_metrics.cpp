#include <cmath>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace swinifs;
using testing_support::random_tensor;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Tensor<double> constant_image(int c, int h, int w, double v) { return Tensor<double>({c, h, w}, v); }

// Direct sliding-window SSIM with a 2-D Gaussian, no separable filtering.
double reference_ssim(const Tensor<double>& a, const Tensor<double>& b) {
  const int k = 11, h = a.dim(1), w = a.dim(2);
  std::vector<double> g(k * k);
  double gs = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) gs += g[i * k + j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * 1.5 * 1.5));
  for (auto& v : g) v /= gs;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y + k <= h; ++y)
    for (int x = 0; x + k <= w; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          ma += g[i * k + j] * a(0, y + i, x + j);
          mb += g[i * k + j] * b(0, y + i, x + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const double da = a(0, y + i, x + j) - ma, db = b(0, y + i, x + j) - mb;
          va += g[i * k + j] * da * da;
          vb += g[i * k + j] * db * db;
          cov += g[i * k + j] * da * db;
        }
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

PerceptualMetric micro_metric(const Tensor<double>& w, const Tensor<double>& b, std::vector<double> ch_weights) {
  auto net = std::make_unique<ConvFeatureNet<double>>(
      "micro", std::vector<LayerSpec>{LayerSpec::conv("conv", 3, 2), LayerSpec::relu("relu")},
      std::vector<std::string>{"relu"}, std::vector<double>{0.5, 0.5, 0.5}, std::vector<double>{0.25, 0.25, 0.25});
  net->set_conv("conv", w, b);
  return PerceptualMetric(std::move(net), {std::move(ch_weights)});
}

}  // namespace

TEST_CASE("rgb_to_y: white is 1, red is 0.299") {
  CHECK_THAT(rgb_to_y(constant_image(3, 2, 2, 1.0))(0, 1, 1), WithinAbs(1.0, 1e-15));
  Tensor<double> red({3, 1, 1});
  red[0] = 1.0;
  CHECK(rgb_to_y(red)[0] == 0.299);
}

TEST_CASE("rgb_to_y: random image equals a per-pixel weighted sum") {
  const auto img = random_tensor({3, 7, 5}, 1);
  const auto y = rgb_to_y(img);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK_THAT(y(0, i, j), WithinAbs(0.299 * img(0, i, j) + 0.587 * img(1, i, j) + 0.114 * img(2, i, j), 1e-15));
}

TEST_CASE("psnr: identical images hit the 100 dB cap") {
  const auto a = random_tensor({3, 8, 8}, 2);
  CHECK(psnr(a, a) == 100.0);
}

TEST_CASE("psnr: uniform 0.1 offset is 20 dB") {
  const auto a = random_tensor({3, 16, 16}, 3, 0.1, 0.8);
  auto b = a;
  for (auto& v : b.values()) v += 0.1;
  CHECK_THAT(psnr(b, a), WithinAbs(20.0, 1e-6));
}

TEST_CASE("psnr: random pair equals a loop-computed MSE and log") {
  const auto a = random_tensor({3, 9, 9}, 4), b = random_tensor({3, 9, 9}, 5);
  double se = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) se += (a(c, i, j) - b(c, i, j)) * (a(c, i, j) - b(c, i, j));
  CHECK_THAT(psnr(a, b), WithinAbs(10.0 * std::log10(243.0 / se), 1e-12));
  CHECK_THROWS(psnr(a, random_tensor({3, 9, 8}, 1)));
}

TEST_CASE("psnr: values are clamped to [0,1] first") {
  const auto a = constant_image(3, 4, 4, 1.0);
  CHECK(psnr(constant_image(3, 4, 4, 1.7), a) == 100.0);
}

TEST_CASE("psnr strictly decreases with noise amplitude") {
  const auto clean = random_tensor({3, 32, 32}, 6, 0.2, 0.8);
  const auto noise = random_tensor({3, 32, 32}, 7, -1.0, 1.0);
  double prev = 1e9;
  for (double sigma : {0.01, 0.02, 0.05}) {
    auto noisy = clean;
    for (std::size_t i = 0; i < noisy.numel(); ++i) noisy[i] += sigma * noise[i];
    const double p = psnr(noisy, clean);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim_y: identical images give 1 and SSIM is symmetric") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_tensor({3, 24, 20}, rng()), b = random_tensor({3, 24, 20}, rng());
    CHECK_THAT(ssim_y(a, a), WithinAbs(1.0, 1e-9));
    CHECK_THAT(ssim_y(a, b), WithinAbs(ssim_y(b, a), 1e-15));
    CHECK(ssim_y(a, b) >= -1.0);
    CHECK(ssim_y(a, b) <= 1.0);
  }
}

TEST_CASE("ssim_y: constant 0.5 vs 0.6 reduces to the luminance term") {
  const double c1 = 1e-4;
  const double expect = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  CHECK_THAT(ssim_y(constant_image(3, 16, 16, 0.6), constant_image(3, 16, 16, 0.5)), WithinAbs(expect, 1e-12));
}

TEST_CASE("ssim_y: random 32x32 pair matches a direct sliding-window reference") {
  const auto a = random_tensor({3, 32, 32}, 9), b = random_tensor({3, 32, 32}, 10);
  CHECK_THAT(ssim_y(a, b), WithinAbs(reference_ssim(rgb_to_y(a), rgb_to_y(b)), 1e-10));
}

TEST_CASE("ssim_y: image smaller than the window is an error") {
  CHECK_THROWS(ssim_y(random_tensor({3, 10, 32}, 1), random_tensor({3, 10, 32}, 2)));
}

TEST_CASE("perceptual_distance: zero for identical inputs, symmetric, non-negative") {
  const auto metric = make_random_test_metric();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_tensor({3, 32, 32}, rng()), b = random_tensor({3, 32, 32}, rng());
    CHECK(perceptual_distance(a, a, metric) == 0.0);
    const double ab = perceptual_distance(a, b, metric);
    CHECK(ab > 0.0);
    CHECK_THAT(perceptual_distance(b, a, metric), WithinAbs(ab, 1e-15));
  }
}

TEST_CASE("perceptual_distance: micro-net on 8x8 inputs matches a longhand computation") {
  const auto w = random_tensor({2, 3, 3, 3}, 12, -0.5, 0.5);
  const Tensor<double> b({2}, {0.05, 0.1});
  const std::vector<double> cw{0.3, 0.7};
  const auto metric = micro_metric(w, b, cw);
  const auto x = random_tensor({3, 8, 8}, 13), y = random_tensor({3, 8, 8}, 14);
  auto feat = [&](const Tensor<double>& img, int o, int i, int j) {
    double acc = b[o];
    for (int c = 0; c < 3; ++c)
      for (int ki = 0; ki < 3; ++ki)
        for (int kj = 0; kj < 3; ++kj) {
          const int yy = i + ki - 1, xx = j + kj - 1;
          if (yy < 0 || yy >= 8 || xx < 0 || xx >= 8) continue;
          acc += w[((o * 3 + c) * 3 + ki) * 3 + kj] * (img(c, yy, xx) - 0.5) / 0.25;
        }
    return std::max(acc, 0.0);
  };
  double total = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double fx[2] = {feat(x, 0, i, j), feat(x, 1, i, j)}, fy[2] = {feat(y, 0, i, j), feat(y, 1, i, j)};
      const double nx = std::hypot(fx[0], fx[1]) + 1e-10, ny = std::hypot(fy[0], fy[1]) + 1e-10;
      for (int c = 0; c < 2; ++c) total += cw[c] * (fx[c] / nx - fy[c] / ny) * (fx[c] / nx - fy[c] / ny);
    }
  CHECK_THAT(perceptual_distance(x, y, metric), WithinAbs(total / 64.0, 1e-12));
}

TEST_CASE("median_of equals the middle of the sorted sample list") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n : {1, 2, 5, 20, 21}) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    auto s = v;
    std::sort(s.begin(), s.end());
    const double expect = n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2;
    CHECK(median_of(v) == expect);
  }
  CHECK_THROWS(median_of({}));
}

TEST_CASE("timed_inference: positive and stable per-image times") {
  SwinIFS<float> model(ModelConfig::micro(4), 1);
  const std::vector<ModelInput<float>> inputs{make_model_input(random_tensor<float>({3, 32, 32}, 1), LandmarkSet{}, 4)};
  const std::function<Tensor<float>(const ModelInput<float>&)> fn = [&](const ModelInput<float>& in) { return model.infer(in); };
  const auto [out1, t1] = timed_inference(fn, inputs, 21);
  const auto [out2, t2] = timed_inference(fn, inputs, 21);
  CHECK(out1.size() == 1);
  CHECK(out1[0].shape() == Shape{3, 128, 128});
  CHECK(t1.samples.size() == 21);
  CHECK(t1.median_seconds > 0.0);
  CHECK(t1.median_seconds == median_of(t1.samples));
  const double ratio = std::max(t1.median_seconds, t2.median_seconds) / std::min(t1.median_seconds, t2.median_seconds);
  CHECK(ratio < 1.5);
}

TEST_CASE("EvalReport: aggregates are exact means; empty report is an error") {
  EvalReport r;
  CHECK_THROWS(r.finalize());
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(20.0, 40.0);
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    EvalRow row;
    row.image_id = "img" + std::to_string(i);
    row.psnr = u(rng);
    row.ssim = u(rng) / 40.0;
    sum += row.psnr;
    r.per_image.push_back(row);
  }
  r.finalize();
  CHECK(r.mean.psnr == sum / 10.0);
  CHECK(r.to_csv().find("mean,") != std::string::npos);
  CHECK(r.to_table().find("Bicubic") != std::string::npos);
}
