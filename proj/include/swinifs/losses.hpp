#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "swinifs/autograd.hpp"
#include "swinifs/feature_net.hpp"
#include "swinifs/ops.hpp"

namespace swinifs {

struct LossWeights {
  double lambda_l1 = 1.0;
  double lambda_perc = 0.1;

  void validate() const {
    if (!(lambda_l1 >= 0.0) || !(lambda_perc >= 0.0)) throw std::invalid_argument("LossWeights: weights must be non-negative");
  }
};

// Mean absolute error over every element (batch, channel, pixel).
template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  return ops::mean_abs_diff(pred, target);
}

// Mean squared feature difference, averaged over the extractor's taps.
template <typename T>
Var<T> perceptual_loss(const Var<T>& pred, const Var<T>& target, const FeatureExtractor<T>& extractor) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("perceptual_loss: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  std::vector<Var<T>> fp, ft;
  try {
    fp = extractor.features(pred);
    NoGradGuard no_grad;
    ft = extractor.features(target);
  } catch (const std::exception& e) {
    throw std::runtime_error("feature extractor '" + extractor.id() + "' failed: " + e.what());
  }
  if (fp.empty() || fp.size() != ft.size()) throw std::runtime_error("feature extractor '" + extractor.id() + "' returned no features");
  Var<T> acc = ops::mean_sq_diff(fp[0], ft[0]);
  for (std::size_t i = 1; i < fp.size(); ++i) acc = ops::add(acc, ops::mean_sq_diff(fp[i], ft[i]));
  return fp.size() == 1 ? acc : ops::scale(acc, T(1) / static_cast<T>(fp.size()));
}

template <typename T>
struct LossBreakdown {
  Var<T> total;
  double l1 = 0.0;
  double perceptual = 0.0;           // unweighted term
  double weighted_l1 = 0.0;          // lambda_l1 * l1
  double weighted_perceptual = 0.0;  // lambda_perc * perceptual
};

// lambda_l1 * l1 + lambda_perc * perceptual. The perceptual term is skipped
// entirely when its weight is zero.
template <typename T>
LossBreakdown<T> total_loss(const Var<T>& pred, const Var<T>& target, const FeatureExtractor<T>& extractor,
                            const LossWeights& w) {
  w.validate();
  LossBreakdown<T> out;
  const Var<T> l1 = l1_loss(pred, target);
  out.l1 = static_cast<double>(l1.item());
  out.weighted_l1 = static_cast<double>(static_cast<T>(w.lambda_l1) * l1.item());
  out.total = ops::scale(l1, static_cast<T>(w.lambda_l1));
  if (w.lambda_perc > 0.0) {
    const Var<T> perc = perceptual_loss(pred, target, extractor);
    out.perceptual = static_cast<double>(perc.item());
    const Var<T> wp = ops::scale(perc, static_cast<T>(w.lambda_perc));
    out.weighted_perceptual = static_cast<double>(wp.item());
    out.total = ops::add(out.total, wp);
  }
  return out;
}

}  // namespace swinifs
