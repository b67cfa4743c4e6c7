#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace swinifs;
using testing_support::bit_equal;
using testing_support::random_tensor;
using Catch::Matchers::WithinAbs;

namespace {

// Dense reference: every input sample within the (stretched) kernel support
// contributes K((x - j) / support), clamped index, weights renormalised.
double dense_bicubic_1d(const std::vector<double>& in, int out_size, int o) {
  const int n = static_cast<int>(in.size());
  const double scale = static_cast<double>(n) / out_size;
  const double support = std::max(1.0, scale);
  const double x = (o + 0.5) * scale - 0.5;
  double acc = 0.0, wsum = 0.0;
  for (int j = -4 * n; j < 5 * n; ++j) {
    const double d = std::abs(x - j) / support;
    if (d >= 2.0) continue;
    const double a = -0.5;
    const double w = d <= 1.0 ? (a + 2) * d * d * d - (a + 3) * d * d + 1 : a * d * d * d - 5 * a * d * d + 8 * a * d - 4 * a;
    acc += w * in[std::clamp(j, 0, n - 1)];
    wsum += w;
  }
  return acc / wsum;
}

}  // namespace

TEST_CASE("landmark annotations: CelebA layout with count and header lines") {
  std::istringstream in(
      "2\n"
      "lefteye_x lefteye_y righteye_x righteye_y nose_x nose_y leftmouth_x leftmouth_y rightmouth_x rightmouth_y\n"
      "a.jpg 10 20 30 20 20 30 12 40 28 40\n"
      "b.jpg,1.5,2,3,4,5,6,7,8,9,10.25\n");
  const auto rows = parse_landmark_annotations(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].image_id == "a.jpg");
  CHECK(rows[0].landmarks.left_eye().x == 10.0);
  CHECK(rows[0].landmarks.left_eye().y == 20.0);
  CHECK(rows[0].landmarks.mouth_right().x == 28.0);
  CHECK(rows[1].image_id == "b.jpg");
  CHECK(rows[1].landmarks.mouth_right().y == 10.25);
}

TEST_CASE("landmark annotations: empty input gives an empty list") {
  std::istringstream in("");
  CHECK(parse_landmark_annotations(in).empty());
}

TEST_CASE("landmark annotations: a row with 9 numbers is rejected at its line") {
  std::istringstream in("a.jpg 10 20 30 20 20 30 12 40 28 40\nb.jpg 1 2 3 4 5 6 7 8 9\n");
  try {
    (void)parse_landmark_annotations(in, "lm.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("lm.txt:2") != std::string::npos);
  }
}

TEST_CASE("landmark annotations: duplicate ids are rejected") {
  std::istringstream in("a.jpg 10 20 30 20 20 30 12 40 28 40\na.jpg 10 20 30 20 20 30 12 40 28 40\n");
  CHECK_THROWS_AS(parse_landmark_annotations(in), ParseError);
}

TEST_CASE("landmark annotations: load from file preserves order") {
  const auto path = std::filesystem::temp_directory_path() / "swinifs_lm_order.txt";
  {
    std::ofstream out(path);
    for (int i = 9; i >= 0; --i) out << "img" << i << ".png 1 2 3 4 5 6 7 8 9 " << i << "\n";
  }
  const auto rows = load_landmark_annotations(path);
  REQUIRE(rows.size() == 10);
  for (int k = 0; k < 10; ++k) CHECK(rows[k].image_id == "img" + std::to_string(9 - k) + ".png");
  std::filesystem::remove(path);
}

TEST_CASE("crop_face: 178x218 source, box [40,60]x[50,90]") {
  const auto src = random_tensor({3, 218, 178}, 5);
  const LandmarkSet lm = LandmarkSet::from_flat(std::array<double, 10>{40, 50, 60, 50, 50, 70, 42, 90, 58, 90});
  for (double margin : {0.0, 0.25, 0.5, 1.0}) {
    const auto rec = crop_face(src, lm, margin, "x");
    CHECK(rec.hr_image.shape() == Shape{3, 128, 128});
    for (const auto& p : rec.landmarks_hr.points) {
      CHECK(p.x >= 0.0);
      CHECK(p.x < 128.0);
      CHECK(p.y >= 0.0);
      CHECK(p.y < 128.0);
    }
    for (double v : rec.hr_image.values()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("crop_face: zero margin crops the tight landmark box") {
  // A source whose value encodes the pixel position, so the crop extent is readable.
  Tensor<double> src({3, 100, 100});
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      for (int c = 0; c < 3; ++c) src(c, y, x) = (y * 100 + x) / 10000.0;
  const LandmarkSet lm = LandmarkSet::from_flat(std::array<double, 10>{20.2, 30.7, 51.9, 30.1, 35, 45, 22, 60.5, 50, 61.3});
  const CropBox box = landmark_crop_box(lm, 100, 100, 0.0);
  CHECK(box.x0 == 20);
  CHECK(box.x1 == 52);
  CHECK(box.y0 == 30);
  CHECK(box.y1 == 62);
  const auto rec = crop_face(src, lm, 0.0, "", box.width());  // no resize when out_size = width
  REQUIRE(box.width() == box.height());
  CHECK(rec.hr_image(0, 0, 0) == src(0, 30, 20));
  CHECK(rec.hr_image(0, 31, 31) == src(0, 61, 51));
}

TEST_CASE("crop_face: remapped landmarks equal the composed crop-offset and scale transform") {
  const auto src = random_tensor({3, 218, 178}, 9);
  const LandmarkSet lm = LandmarkSet::from_flat(std::array<double, 10>{70.3, 111.2, 108.9, 112.4, 90.1, 133.0, 74.6, 152.8, 105.2, 151.9});
  const double margin = 0.5;
  const auto rec = crop_face(src, lm, margin);
  // Independent box: tight pixel box, grown by margin*size per side, rounded outward, clamped.
  double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
  for (const auto& p : lm.points) {
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double bw = std::floor(xmax) + 1 - std::floor(xmin), bh = std::floor(ymax) + 1 - std::floor(ymin);
  const double x0 = std::max(0.0, std::floor(std::floor(xmin) - margin * bw));
  const double x1 = std::min(178.0, std::ceil(std::floor(xmax) + 1 + margin * bw));
  const double y0 = std::max(0.0, std::floor(std::floor(ymin) - margin * bh));
  const double y1 = std::min(218.0, std::ceil(std::floor(ymax) + 1 + margin * bh));
  for (int i = 0; i < kNumLandmarks; ++i) {
    const double ex = (lm[i].x - x0) * 128.0 / (x1 - x0);
    const double ey = (lm[i].y - y0) * 128.0 / (y1 - y0);
    CHECK_THAT(rec.landmarks_hr[i].x, WithinAbs(ex, 1e-12));
    CHECK_THAT(rec.landmarks_hr[i].y, WithinAbs(ey, 1e-12));
  }
}

TEST_CASE("crop_face: errors") {
  const auto src = random_tensor({3, 64, 64}, 1);
  const LandmarkSet ok = LandmarkSet::from_flat(std::array<double, 10>{10, 10, 30, 10, 20, 20, 12, 30, 28, 30});
  CHECK_THROWS(crop_face(src, ok, -0.1));
  LandmarkSet outside = ok;
  outside[2] = {70, 20};
  CHECK_THROWS(crop_face(src, outside, 0.5));
  LandmarkSet flat = ok;
  for (auto& p : flat.points) p.y = 10;
  CHECK_THROWS(crop_face(src, flat, 0.5));
}

TEST_CASE("crop_face: landmarks stay strictly inside [0,128)^2 (property)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 60 + static_cast<int>(u(rng) * 200), h = 60 + static_cast<int>(u(rng) * 200);
    LandmarkSet lm;
    for (auto& p : lm.points) p = {u(rng) * w, u(rng) * h};
    const double margin = u(rng);
    const CropBox box = landmark_crop_box(lm, w, h, margin);
    const auto r = remap_into_crop(lm, box, 128);
    for (const auto& p : r.points) {
      CHECK(p.x >= 0.0);
      CHECK(p.x < 128.0);
      CHECK(p.y >= 0.0);
      CHECK(p.y < 128.0);
    }
  }
}

TEST_CASE("bicubic_resample: constant image stays constant") {
  const Tensor<double> img({3, 37, 23}, 0.7);
  for (auto [h, w] : std::vector<std::pair<int, int>>{{5, 9}, {37, 23}, {80, 61}, {1, 1}, {128, 128}}) {
    const auto out = bicubic_resample(img, h, w);
    CHECK(out.shape() == Shape{3, h, w});
    for (double v : out.values()) CHECK_THAT(v, WithinAbs(0.7, 1e-12));
  }
}

TEST_CASE("bicubic_resample: 128x128 to 32x32 and 16x16") {
  const auto img = random_tensor({3, 128, 128}, 2);
  CHECK(bicubic_resample(img, 32, 32).shape() == Shape{3, 32, 32});
  CHECK(bicubic_resample(img, 16, 16).shape() == Shape{3, 16, 16});
}

TEST_CASE("bicubic_resample: single-row ramp upscaled 2x matches dense kernel sums") {
  const int n = 12;
  std::vector<double> ramp(n);
  Tensor<double> img({1, 1, n});
  for (int j = 0; j < n; ++j) img(0, 0, j) = ramp[j] = 0.1 + 0.06 * j;
  const auto out = bicubic_resample(img, 2, 2 * n);
  for (int r = 0; r < 2; ++r)
    for (int o = 0; o < 2 * n; ++o)
      CHECK_THAT(out(0, r, o), WithinAbs(std::clamp(dense_bicubic_1d(ramp, 2 * n, o), 0.0, 1.0), 1e-12));
}

TEST_CASE("bicubic_resample: antialiased downscale matches the dense separable oracle") {
  const auto img = random_tensor({2, 24, 20}, 4);
  const auto out = bicubic_resample(img, 6, 5);
  for (int c = 0; c < 2; ++c)
    for (int oy = 0; oy < 6; ++oy)
      for (int ox = 0; ox < 5; ++ox) {
        // Rows first, then the column: both passes use the dense reference.
        std::vector<double> column(24);
        for (int y = 0; y < 24; ++y) {
          std::vector<double> row(20);
          for (int x = 0; x < 20; ++x) row[x] = img(c, y, x);
          column[y] = dense_bicubic_1d(row, 5, ox);
        }
        const double expect = std::clamp(dense_bicubic_1d(column, 6, oy), 0.0, 1.0);
        CHECK_THAT(out(c, oy, ox), WithinAbs(expect, 1e-12));
      }
}

TEST_CASE("bicubic_resample: identical size returns the input") {
  const auto img = random_tensor({3, 17, 29}, 6);
  const auto out = bicubic_resample(img, 17, 29);
  CHECK(max_abs_diff(img, out) <= 1e-6);
}

TEST_CASE("bicubic_resample: invalid target size") {
  const auto img = random_tensor({3, 8, 8}, 6);
  CHECK_THROWS(bicubic_resample(img, 0, 4));
}

TEST_CASE("degrade: s=4, no kernel, sigma 0 is a pure bicubic downsample") {
  const auto rec = synthetic_record<double>(21);
  const auto d = degrade(rec, DegradationSpec{4, {}, 0.0}, 123);
  CHECK(bit_equal(d.lr_image, bicubic_resample(rec.hr_image, 32, 32)));
  for (int i = 0; i < kNumLandmarks; ++i) {
    CHECK(d.landmarks_lr[i].x == rec.landmarks_hr[i].x / 4);
    CHECK(d.landmarks_lr[i].y == rec.landmarks_hr[i].y / 4);
  }
  const auto d8 = degrade(rec, DegradationSpec{8, {}, 0.0}, 0);
  CHECK(d8.lr_image.shape() == Shape{3, 16, 16});
}

TEST_CASE("degrade: identity delta kernel equals plain bicubic") {
  const auto rec = synthetic_record<double>(22);
  const auto d = degrade(rec, DegradationSpec{4, BlurKernel::delta(), 0.0}, 0);
  CHECK(bit_equal(d.lr_image, bicubic_resample(rec.hr_image, 32, 32)));
  BlurKernel centered{3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0}};
  const auto d3 = degrade(rec, DegradationSpec{4, centered, 0.0}, 0);
  CHECK(bit_equal(d3.lr_image, d.lr_image));
}

TEST_CASE("degrade: noise mean absolute deviation is sigma*sqrt(2/pi)") {
  // Mid-grey HR so that clamping never engages.
  ImageRecord<double> rec{"grey", Tensor<double>({3, 128, 128}, 0.5), {}};
  const double sigma = 0.05;
  const auto clean = degrade(rec, DegradationSpec{4, {}, 0.0}, 0).lr_image;
  const auto noisy = degrade(rec, DegradationSpec{4, {}, sigma}, 77).lr_image;
  double mad = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) mad += std::abs(noisy[i] - clean[i]);
  mad /= static_cast<double>(clean.numel());
  const double expect = sigma * std::sqrt(2.0 / std::acos(-1.0));
  CHECK(std::abs(mad - expect) / expect < 0.05);
}

TEST_CASE("degrade: reproducible per seed, different across seeds") {
  const auto rec = synthetic_record<double>(23);
  const DegradationSpec spec{4, BlurKernel::gaussian(5, 1.0), 0.02};
  CHECK(bit_equal(degrade(rec, spec, 5).lr_image, degrade(rec, spec, 5).lr_image));
  CHECK_FALSE(bit_equal(degrade(rec, spec, 5).lr_image, degrade(rec, spec, 6).lr_image));
  const DegradationSpec clean{4, BlurKernel::gaussian(5, 1.0), 0.0};
  CHECK(bit_equal(degrade(rec, clean, 1).lr_image, degrade(rec, clean, 2).lr_image));
}

TEST_CASE("degrade: constant input stays constant for any kernel") {
  ImageRecord<double> rec{"c", Tensor<double>({3, 128, 128}, 0.3), {}};
  for (const auto& k : {BlurKernel::delta(), BlurKernel::gaussian(7, 2.0), BlurKernel{1, 3, {0.2, 0.5, 0.3}}}) {
    const auto lr = degrade(rec, DegradationSpec{8, k, 0.0}, 0).lr_image;
    for (double v : lr.values()) CHECK_THAT(v, WithinAbs(0.3, 1e-12));
  }
}

TEST_CASE("degrade: spec validation") {
  const auto rec = synthetic_record<double>(24);
  CHECK_THROWS(degrade(rec, DegradationSpec{3, {}, 0.0}, 0));
  CHECK_THROWS(degrade(rec, DegradationSpec{4, BlurKernel{1, 2, {0.5, 0.6}}, 0.0}, 0));
  CHECK_THROWS(degrade(rec, DegradationSpec{4, {}, -0.1}, 0));
}

TEST_CASE("manifest: write then parse roundtrip") {
  const auto dir = std::filesystem::temp_directory_path() / "swinifs_manifest_rt";
  std::filesystem::create_directories(dir / "hr");
  ManifestEntry e{"face_1", dir / "hr" / "face_1.png", dir / "lr" / "face_1.png",
                  LandmarkSet::from_flat(std::array<double, 10>{1.25, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 4};
  write_manifest(dir / "m.txt", {e});
  const auto back = load_manifest(dir / "m.txt");
  REQUIRE(back.size() == 1);
  CHECK(back[0].image_id == "face_1");
  CHECK(std::filesystem::equivalent(back[0].hr_path.parent_path(), dir / "hr"));
  CHECK(back[0].landmarks_lr == e.landmarks_lr);
  CHECK(back[0].scale == 4);
  std::istringstream bad("a.png b.png 1 2 3\n");
  CHECK_THROWS_AS(parse_manifest(bad, dir), ParseError);
  std::filesystem::remove_all(dir);
}
