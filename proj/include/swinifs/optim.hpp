#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinifs/autograd.hpp"
#include "swinifs/tensor.hpp"

namespace swinifs {

// Piecewise-constant schedule: lr0 * decay^k where k counts milestones strictly
// below the (1-based) iteration.
inline double multistep_lr(double base_lr, long iteration, const std::vector<long>& milestones, double decay) {
  double lr = base_lr;
  for (long m : milestones)
    if (iteration > m) lr *= decay;
  return lr;
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction; state is keyed by parameter name.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  const AdamOptions& options() const { return opts_; }
  long step_count() const { return step_; }

  void step(const std::vector<std::pair<std::string, Var<T>>>& params, double lr) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    const T step_size = static_cast<T>(lr / bc1);
    const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
    const T b1 = static_cast<T>(opts_.beta1), b2 = static_cast<T>(opts_.beta2), eps = static_cast<T>(opts_.eps);
    for (const auto& [name, param] : params) {
      Var<T> p = param;  // shares the node
      auto& st = state_[name];
      auto& value = p.mutable_value();
      const auto& g = p.mutable_grad();
      if (st.m.numel() != value.numel()) {
        st.m = Tensor<T>(value.shape());
        st.v = Tensor<T>(value.shape());
      }
      for (std::size_t i = 0; i < value.numel(); ++i) {
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * g[i];
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * g[i] * g[i];
        value[i] -= step_size * st.m[i] / (std::sqrt(st.v[i]) / sqrt_bc2 + eps);
      }
    }
  }

  struct Moments {
    Tensor<T> m;
    Tensor<T> v;
  };
  const std::map<std::string, Moments>& state() const { return state_; }
  void restore(long step, std::map<std::string, Moments> state) {
    step_ = step;
    state_ = std::move(state);
  }

 private:
  AdamOptions opts_;
  long step_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace swinifs
