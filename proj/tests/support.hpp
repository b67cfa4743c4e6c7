#pragma once

// Shared helpers for the test binaries: random tensors, tiny datasets and a
// central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swinifs/swinifs.hpp"

namespace testing_support {

using swinifs::Shape;
using swinifs::Tensor;
using swinifs::Var;

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

// Eight synthetic faces with precomputed LR images (pure bicubic, no noise).
template <typename T>
std::vector<swinifs::Sample<T>> synthetic_samples(int n, int scale = 4, std::uint64_t first_seed = 100) {
  std::vector<swinifs::Sample<T>> out;
  for (int i = 0; i < n; ++i) {
    auto rec = swinifs::synthetic_record<T>(first_seed + i);
    auto lr = swinifs::degrade(rec, swinifs::DegradationSpec{scale, {}, 0.0}, 0);
    out.push_back({rec.image_id, rec.hr_image, lr.lr_image, lr.landmarks_lr});
  }
  return out;
}

// Step size and decay points for the micro-config overfit checks. The
// full-size default (1e-4) converges too slowly for a 2,000-iteration budget.
inline constexpr double kMicroOverfitLr = 1e-3;
inline const std::vector<long> kMicroOverfitMilestones{1000, 1500};

// Micro-config experiment on in-memory data: batch 2, random_test extractor,
// checkpointing off.
inline swinifs::ExperimentConfig micro_experiment(int scale = 4, double lr = 1e-4, std::uint64_t seed = 7) {
  swinifs::ExperimentConfig cfg;
  cfg.model = swinifs::ModelConfig::micro(scale);
  cfg.train.scale = scale;
  cfg.train.batch_size = 2;
  cfg.train.lr = lr;
  cfg.train.seed = seed;
  cfg.train.checkpoint_every = 0;
  cfg.loss.extractor = "random_test";
  return cfg;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

// Compares d(loss)/d(param) against central differences on a sample of
// entries per parameter: `per_param` random entries plus the entry with the
// largest analytic gradient. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const std::vector<std::pair<std::string, Var<double>>>& params,
                                  const std::function<Var<double>()>& loss, double eps = 1e-5, int per_param = 4,
                                  std::uint64_t seed = 1, double floor = 1e-6) {
  for (auto [name, p] : params) p.zero_grad();
  swinifs::backward(loss());
  std::vector<Tensor<double>> analytic;
  for (const auto& [name, p] : params) analytic.push_back(p.grad());

  GradCheckResult res;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Var<double> p = params[k].second;
    const std::size_t n = p.value().numel();
    std::vector<std::size_t> idx;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int i = 0; i < per_param && static_cast<std::size_t>(i) < n; ++i) idx.push_back(pick(rng));
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(analytic[k][i]) > std::abs(analytic[k][arg])) arg = i;
    idx.push_back(arg);
    for (std::size_t i : idx) {
      auto& v = p.mutable_value()[i];
      const double orig = v;
      swinifs::NoGradGuard guard;
      v = orig + eps;
      const double up = loss().item();
      v = orig - eps;
      const double down = loss().item();
      v = orig;
      const double num = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        std::ostringstream os;
        os << params[k].first << "[" << i << "] analytic=" << std::scientific << std::setprecision(3) << a
           << " numeric=" << num;
        res.worst = os.str();
      }
    }
  }
  return res;
}

}  // namespace testing_support
