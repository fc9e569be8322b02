#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "geniu/tensor.hpp"

namespace geniu {

// Reverse-mode autodiff over dynamically built graphs. A graph is built by
// calling the ops below on Var handles; backward() walks it once in reverse
// topological order. Nodes with no grad-requiring ancestor carry no closure.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Tensor<T>& g);
  Tensor<T>& grad_buffer();
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value);
  static Var leaf(Tensor<T> value);

  const Tensor<T>& value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Runs reverse accumulation from a single-element loss. Throws
// std::invalid_argument when the loss is not scalar.
template <typename T>
void backward(const Var<T>& loss);

template <typename T>
struct ValueAndGrad {
  T loss;
  std::vector<Tensor<T>> grads;
};

// Evaluates fn on fresh leaves built from params and returns the loss together
// with d(loss)/d(param) for every param, in order.
template <typename T>
ValueAndGrad<T> value_and_grad(const std::function<Var<T>(const std::vector<Var<T>>&)>& fn,
                               std::span<const Tensor<T>> params);

namespace ag {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> scale(const Var<T>& x, T s);
template <typename T> Var<T> add_scalar(const Var<T>& x, T s);
template <typename T> Var<T> neg(const Var<T>& x);
template <typename T> Var<T> log(const Var<T>& x);
template <typename T> Var<T> exp(const Var<T>& x);
template <typename T> Var<T> square(const Var<T>& x);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> reciprocal(const Var<T>& x);
// max(x, floor) elementwise; gradient flows only where x > floor.
template <typename T> Var<T> clamp_min(const Var<T>& x, T floor);

// [m,k] x [k,n] -> [m,n]
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x [N,C,...] + bias [C], broadcast along axis 1.
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& bias);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};
// x [N,C,H,W], w [O,C,kh,kw] -> [N,O,Ho,Wo]; no dilation.
template <typename T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, Conv2dOptions opt = {});
// Nearest-neighbour resize of [N,C,H,W] to [N,C,out_h,out_w].
template <typename T> Var<T> upsample_nearest2d(const Var<T>& x, std::size_t out_h, std::size_t out_w);
// [N,C,H,W] -> [N,C]
template <typename T> Var<T> global_avg_pool(const Var<T>& x);

template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
// [N,...] -> [N, prod(...)]
template <typename T> Var<T> flatten(const Var<T>& x);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);

// Per-row softmax cross-entropy: logits [N,K], labels in [0,K) -> [N].
template <typename T> Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels);
// Mean over all elements of (a-b)^2 -> scalar.
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);

}  // namespace ag

// Row-wise softmax on plain tensors; [N,K] -> [N,K].
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace geniu
