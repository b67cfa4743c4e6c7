#include <cmath>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace swinifs;
using testing_support::random_tensor;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// conv(3->2, 3x3, pad 1) + relu on (x - 0.5) / 0.25 inputs, fixed weights.
std::unique_ptr<ConvFeatureNet<double>> tiny_net() {
  auto net = std::make_unique<ConvFeatureNet<double>>(
      "tiny", std::vector<LayerSpec>{LayerSpec::conv("conv", 3, 2), LayerSpec::relu("relu")},
      std::vector<std::string>{"relu"}, std::vector<double>{0.5, 0.5, 0.5}, std::vector<double>{0.25, 0.25, 0.25});
  net->set_conv("conv", random_tensor({2, 3, 3, 3}, 99, -0.5, 0.5), Tensor<double>({2}, {0.1, -0.2}));
  return net;
}

Tensor<double> longhand_features(const Tensor<double>& w, const Tensor<double>& b, const Tensor<double>& img) {
  const int h = img.dim(1), wd = img.dim(2);
  Tensor<double> out({2, h, wd});
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < wd; ++j) {
        double acc = b[o];
        for (int c = 0; c < 3; ++c)
          for (int ki = 0; ki < 3; ++ki)
            for (int kj = 0; kj < 3; ++kj) {
              const int y = i + ki - 1, x = j + kj - 1;
              if (y < 0 || y >= h || x < 0 || x >= wd) continue;
              acc += w[((o * 3 + c) * 3 + ki) * 3 + kj] * (img(c, y, x) - 0.5) / 0.25;
            }
        out(o, i, j) = std::max(acc, 0.0);
      }
  return out;
}

}  // namespace

TEST_CASE("l1_loss: identical inputs give 0, constant offset gives 0.1") {
  const auto a = random_tensor({3, 8, 8}, 1);
  CHECK(l1_loss(Var<double>(a), Var<double>(a)).item() == 0.0);
  auto b = a;
  for (auto& v : b.values()) v += 0.1;
  CHECK_THAT(l1_loss(Var<double>(b), Var<double>(a)).item(), WithinAbs(0.1, 1e-12));
}

TEST_CASE("l1_loss: random 2x3x4x4 pair equals a loop accumulation") {
  const auto a = random_tensor({2, 3, 4, 4}, 2), b = random_tensor({2, 3, 4, 4}, 3);
  double sum = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const std::size_t k = ((static_cast<std::size_t>(n) * 3 + c) * 4 + i) * 4 + j;
          sum += std::abs(a[k] - b[k]);
        }
  CHECK_THAT(l1_loss(Var<double>(a), Var<double>(b)).item(), WithinAbs(sum / 96.0, 1e-14));
}

TEST_CASE("l1_loss: shape mismatch is an error") {
  CHECK_THROWS(l1_loss(Var<double>(random_tensor({3, 4, 4}, 1)), Var<double>(random_tensor({3, 4, 5}, 1))));
}

TEST_CASE("l1_loss is symmetric and non-negative (property)") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_tensor({3, 5, 6}, rng()), b = random_tensor({3, 5, 6}, rng());
    const double ab = l1_loss(Var<double>(a), Var<double>(b)).item();
    CHECK(ab == l1_loss(Var<double>(b), Var<double>(a)).item());
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("perceptual_loss: identical inputs give 0") {
  const auto ext = make_random_test_extractor<double>();
  const auto a = random_tensor({3, 16, 16}, 5);
  CHECK(perceptual_loss(Var<double>(a), Var<double>(a), *ext).item() == 0.0);
}

TEST_CASE("perceptual_loss: identity extractor equals mean squared pixel error") {
  IdentityExtractor<double> id;
  const auto a = random_tensor({3, 9, 7}, 6), b = random_tensor({3, 9, 7}, 7);
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK_THAT(perceptual_loss(Var<double>(a), Var<double>(b), id).item(), WithinAbs(se / a.numel(), 1e-15));
}

TEST_CASE("perceptual_loss: small fixed-weight extractor matches a longhand feature computation") {
  auto net = tiny_net();
  const auto w = random_tensor({2, 3, 3, 3}, 99, -0.5, 0.5);
  const Tensor<double> b({2}, {0.1, -0.2});
  const auto x = random_tensor({3, 5, 6}, 8), y = random_tensor({3, 5, 6}, 9);
  const auto fx = longhand_features(w, b, x), fy = longhand_features(w, b, y);
  double se = 0.0;
  for (std::size_t i = 0; i < fx.numel(); ++i) se += (fx[i] - fy[i]) * (fx[i] - fy[i]);
  CHECK_THAT(perceptual_loss(Var<double>(x), Var<double>(y), *net).item(), WithinAbs(se / fx.numel(), 1e-12));
}

TEST_CASE("perceptual_loss: multiple taps are averaged") {
  const auto a = random_tensor({3, 16, 16}, 10), b = random_tensor({3, 16, 16}, 11);
  const auto both = make_random_test_extractor<double>({"relu1", "relu3"});
  const auto t1 = make_random_test_extractor<double>({"relu1"});
  const auto t3 = make_random_test_extractor<double>({"relu3"});
  const double l1 = perceptual_loss(Var<double>(a), Var<double>(b), *t1).item();
  const double l3 = perceptual_loss(Var<double>(a), Var<double>(b), *t3).item();
  CHECK_THAT(perceptual_loss(Var<double>(a), Var<double>(b), *both).item(), WithinRel(0.5 * (l1 + l3), 1e-12));
}

TEST_CASE("perceptual_loss: extractor failure names the extractor") {
  const auto ext = make_random_test_extractor<double>();
  const Var<double> a(random_tensor({1, 8, 8}, 1));
  CHECK_THROWS_WITH(perceptual_loss(a, a, *ext), Catch::Matchers::ContainsSubstring("random_test"));
}

TEST_CASE("extractor is deterministic: two instances give identical features") {
  const auto a = make_random_test_extractor<double>(), b = make_random_test_extractor<double>();
  const Var<double> x(random_tensor({3, 16, 16}, 12));
  CHECK(testing_support::bit_equal(a->features(x)[0].value(), b->features(x)[0].value()));
}

TEST_CASE("total_loss: default weights are (1.0, 0.1)") {
  const LossWeights w;
  CHECK(w.lambda_l1 == 1.0);
  CHECK(w.lambda_perc == 0.1);
  CHECK_THROWS(LossWeights{-1.0, 0.1}.validate());
}

TEST_CASE("total_loss: w = (1, 0) equals l1 exactly; w = (0, 0) gives 0") {
  const auto ext = make_random_test_extractor<double>();
  const Var<double> a(random_tensor({3, 16, 16}, 13)), b(random_tensor({3, 16, 16}, 14));
  CHECK(total_loss(a, b, *ext, {1.0, 0.0}).total.item() == l1_loss(a, b).item());
  CHECK(total_loss(a, b, *ext, {0.0, 0.0}).total.item() == 0.0);
}

TEST_CASE("total_loss: breakdown and linearity in each weight (property)") {
  const auto ext = make_random_test_extractor<double>();
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Var<double> a(random_tensor({3, 16, 16}, rng())), b(random_tensor({3, 16, 16}, rng()));
    const LossWeights w{u(rng), u(rng)};
    const auto r = total_loss(a, b, *ext, w);
    const auto r2 = total_loss(a, b, *ext, {w.lambda_l1, 2.0 * w.lambda_perc});
    CHECK_THAT(r2.weighted_perceptual, WithinRel(2.0 * r.weighted_perceptual, 1e-12));
    CHECK_THAT(r.total.item(), WithinAbs(w.lambda_l1 * r.l1 + w.lambda_perc * r.perceptual, 1e-12));
    CHECK(r.total.item() >= 0.0);
    CHECK(total_loss(a, a, *ext, w).total.item() == 0.0);
  }
}

TEST_CASE("loss gradients w.r.t. pred match central differences") {
  const auto ext = make_random_test_extractor<double>();
  const auto target = random_tensor({3, 8, 8}, 16);
  Var<double> pred(random_tensor({3, 8, 8}, 17), true);
  const std::vector<std::pair<std::string, Var<double>>> params{{"pred", pred}};
  SECTION("l1") {
    const auto r = testing_support::grad_check(params, [&] { return l1_loss(pred, Var<double>(target)); }, 1e-6, 20);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-3);
  }
  SECTION("perceptual") {
    const auto r = testing_support::grad_check(params, [&] { return perceptual_loss(pred, Var<double>(target), *ext); },
                                               1e-5, 20);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-3);
  }
  SECTION("total") {
    const auto r = testing_support::grad_check(
        params, [&] { return total_loss(pred, Var<double>(target), *ext, LossWeights{}).total; }, 1e-6, 20);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-3);
  }
}
