#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geniu/tensor.hpp"

namespace geniu {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
std::vector<Tensor<T>> tensors_of(const ParamList<T>& params) {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::uint64_t fingerprint(const ParamList<float>& params);

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter '" + param + "'"), param_(param) {}
  const std::string& param() const noexcept { return param_; }

 private:
  std::string param_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

namespace detail {

template <typename T>
void check_update_inputs(const ParamList<T>& params, std::span<const Tensor<T>> grads) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("optimizer[" + params[i].name + "]", params[i].value.shape(), grads[i].shape());
    }
    if (!grads[i].all_finite()) throw NonFiniteGradient(params[i].name);
  }
}

}  // namespace detail

// Bias-corrected Adam. Weight decay is added to the gradient (L2) before the
// moment updates.
template <typename T>
void adam_step(ParamList<T>& params, std::span<const Tensor<T>> grads, AdamState<T>& state) {
  detail::check_update_inputs(params, grads);
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.shape(), T{0});
      state.second_moment.emplace_back(p.value.shape(), T{0});
    }
  } else if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state was built for a different parameter set");
  }
  const auto& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const T bc1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T lr = static_cast<T>(c.lr), eps = static_cast<T>(c.eps), wd = static_cast<T>(c.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].value;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.shape() != theta.shape()) throw ShapeError("adam_step[" + params[i].name + "]", theta.shape(), m.shape());
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const T g = grads[i][j] + wd * theta[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// Plain SGD with L2 weight decay: theta -= lr * (g + wd * theta).
template <typename T>
void sgd_step(ParamList<T>& params, std::span<const Tensor<T>> grads, double lr, double weight_decay) {
  detail::check_update_inputs(params, grads);
  const T step = static_cast<T>(lr), wd = static_cast<T>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].value;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= step * (grads[i][j] + wd * theta[j]);
  }
}

}  // namespace geniu
