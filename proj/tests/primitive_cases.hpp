#pragma once

// Randomised instances of every autodiff primitive, reduced to a scalar by a
// random linear functional so every output element contributes a gradient.

#include <random>
#include <string>
#include <vector>

#include "geniu/autograd.hpp"
#include "oracles/gradcheck.hpp"

namespace geniu::testing {

struct CaseInstance {
  Fn fn;
  std::vector<TensorD> inputs;
};

struct PrimitiveCase {
  std::string name;
  std::function<CaseInstance(std::mt19937_64&)> make;
};

inline Shape random_shape(std::mt19937_64& rng, std::size_t min_rank = 1, std::size_t max_rank = 3) {
  std::uniform_int_distribution<std::size_t> rank_d(min_rank, max_rank), dim_d(1, 4);
  Shape s(rank_d(rng));
  for (auto& d : s) d = dim_d(rng);
  return s;
}

// Values in +-[0.1, 1]: keeps finite differences away from relu/clamp kinks.
inline TensorD away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  TensorD t(shape);
  for (auto& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

inline Var<double> project(const Var<double>& y, const TensorD& c) {
  return ag::sum(ag::mul(y, Var<double>::constant(c)));
}

// Wraps an op whose output shape is known from its inputs by a dry run.
inline CaseInstance projected(std::function<Var<double>(const std::vector<Var<double>>&)> op,
                              std::vector<TensorD> inputs, std::mt19937_64& rng) {
  std::vector<Var<double>> consts;
  for (const auto& t : inputs) consts.push_back(Var<double>::constant(t));
  const Shape out_shape = op(consts).shape();
  TensorD c = random_tensor(out_shape, rng);
  return {[op, c](const std::vector<Var<double>>& p) { return project(op(p), c); }, std::move(inputs)};
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using V = std::vector<Var<double>>;
  std::vector<PrimitiveCase> cases;
  auto binary = [&](std::string name, auto op, bool positive_rhs) {
    cases.push_back({name, [op, positive_rhs](std::mt19937_64& rng) {
                       const Shape s = random_shape(rng);
                       TensorD a = random_tensor(s, rng);
                       TensorD b = positive_rhs ? random_tensor(s, rng, 0.5, 2.0) : random_tensor(s, rng);
                       return projected([op](const V& p) { return op(p[0], p[1]); }, {a, b}, rng);
                     }});
  };
  binary("add", [](auto& a, auto& b) { return ag::add(a, b); }, false);
  binary("sub", [](auto& a, auto& b) { return ag::sub(a, b); }, false);
  binary("mul", [](auto& a, auto& b) { return ag::mul(a, b); }, false);
  binary("div", [](auto& a, auto& b) { return ag::div(a, b); }, true);

  auto unary = [&](std::string name, auto op, int domain) {
    cases.push_back({name, [op, domain](std::mt19937_64& rng) {
                       const Shape s = random_shape(rng);
                       TensorD x = domain == 1 ? random_tensor(s, rng, 0.5, 2.0)
                                   : domain == 2 ? away_from_zero(s, rng)
                                                 : random_tensor(s, rng, -2.0, 2.0);
                       return projected([op](const V& p) { return op(p[0]); }, {x}, rng);
                     }});
  };
  unary("scale", [](auto& x) { return ag::scale(x, -1.7); }, 0);
  unary("add_scalar", [](auto& x) { return ag::add_scalar(x, 0.3); }, 0);
  unary("neg", [](auto& x) { return ag::neg(x); }, 0);
  unary("log", [](auto& x) { return ag::log(x); }, 1);
  unary("exp", [](auto& x) { return ag::exp(x); }, 0);
  unary("square", [](auto& x) { return ag::square(x); }, 0);
  unary("relu", [](auto& x) { return ag::relu(x); }, 2);
  unary("sigmoid", [](auto& x) { return ag::sigmoid(x); }, 0);
  unary("reciprocal", [](auto& x) { return ag::reciprocal(x); }, 1);
  unary("clamp_min", [](auto& x) { return ag::clamp_min(x, 0.0); }, 2);
  unary("reshape", [](auto& x) { return ag::reshape(x, Shape{x.value().size()}); }, 0);
  unary("sum", [](auto& x) { return ag::sum(x); }, 0);
  unary("mean", [](auto& x) { return ag::mean(x); }, 0);

  cases.push_back({"matmul", [](std::mt19937_64& rng) {
                     std::uniform_int_distribution<std::size_t> d(1, 5);
                     const std::size_t m = d(rng), k = d(rng), n = d(rng);
                     return projected([](const V& p) { return ag::matmul(p[0], p[1]); },
                                      {random_tensor({m, k}, rng), random_tensor({k, n}, rng)}, rng);
                   }});
  cases.push_back({"add_bias", [](std::mt19937_64& rng) {
                     Shape s = random_shape(rng, 2, 4);
                     return projected([](const V& p) { return ag::add_bias(p[0], p[1]); },
                                      {random_tensor(s, rng), random_tensor({s[1]}, rng)}, rng);
                   }});
  cases.push_back({"flatten", [](std::mt19937_64& rng) {
                     return projected([](const V& p) { return ag::flatten(p[0]); },
                                      {random_tensor(random_shape(rng, 2, 4), rng)}, rng);
                   }});
  cases.push_back({"conv2d", [](std::mt19937_64& rng) {
                     std::uniform_int_distribution<std::size_t> small(1, 3), spatial(3, 6), k(1, 3), stride(1, 2),
                         pad(0, 1);
                     const std::size_t n = small(rng), c = small(rng), o = small(rng), h = spatial(rng),
                                       w = spatial(rng), kh = k(rng), kw = k(rng);
                     ag::Conv2dOptions opt{stride(rng), pad(rng)};
                     return projected([opt](const V& p) { return ag::conv2d(p[0], p[1], opt); },
                                      {random_tensor({n, c, h, w}, rng), random_tensor({o, c, kh, kw}, rng)}, rng);
                   }});
  cases.push_back({"upsample_nearest2d", [](std::mt19937_64& rng) {
                     std::uniform_int_distribution<std::size_t> small(1, 3), out(2, 7);
                     const std::size_t ho = out(rng), wo = out(rng);
                     return projected([ho, wo](const V& p) { return ag::upsample_nearest2d(p[0], ho, wo); },
                                      {random_tensor({small(rng), small(rng), small(rng), small(rng)}, rng)}, rng);
                   }});
  cases.push_back({"global_avg_pool", [](std::mt19937_64& rng) {
                     return projected([](const V& p) { return ag::global_avg_pool(p[0]); },
                                      {random_tensor(random_shape(rng, 4, 4), rng)}, rng);
                   }});
  cases.push_back({"softmax_cross_entropy", [](std::mt19937_64& rng) {
                     std::uniform_int_distribution<std::size_t> d(1, 5), kd(2, 6);
                     const std::size_t n = d(rng), k = kd(rng);
                     std::uniform_int_distribution<int> label(0, static_cast<int>(k) - 1);
                     std::vector<int> labels(n);
                     for (auto& l : labels) l = label(rng);
                     return projected(
                         [labels](const V& p) { return ag::softmax_cross_entropy(p[0], labels); },
                         {random_tensor({n, k}, rng, -3, 3)}, rng);
                   }});
  cases.push_back({"mse", [](std::mt19937_64& rng) {
                     const Shape s = random_shape(rng);
                     return projected([](const V& p) { return ag::mse(p[0], p[1]); },
                                      {random_tensor(s, rng), random_tensor(s, rng)}, rng);
                   }});
  return cases;
}

// x -> relu(x W1 + b1) W2 + b2 -> mean softmax cross-entropy.
inline CaseInstance two_layer_net_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(2, 6);
  const std::size_t n = d(rng), in = d(rng), hidden = d(rng), k = d(rng);
  std::uniform_int_distribution<int> label(0, static_cast<int>(k) - 1);
  std::vector<int> labels(n);
  for (auto& l : labels) l = label(rng);
  const TensorD x = random_tensor({n, in}, rng, -2, 2);
  Fn fn = [x, labels](const std::vector<Var<double>>& p) {
    auto h = ag::relu(ag::add_bias(ag::matmul(Var<double>::constant(x), p[0]), p[1]));
    auto logits = ag::add_bias(ag::matmul(h, p[2]), p[3]);
    return ag::mean(ag::softmax_cross_entropy(logits, labels));
  };
  return {fn,
          {random_tensor({in, hidden}, rng), random_tensor({hidden}, rng, 0.2, 0.6), random_tensor({hidden, k}, rng),
           random_tensor({k}, rng)}};
}

}  // namespace geniu::testing
