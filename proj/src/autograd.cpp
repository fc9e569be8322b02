#include "geniu/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace geniu {

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad = Tensor<T>(value.shape(), T{0});
  return grad;
}

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
  if (!requires_grad) return;
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var(std::move(n));
}

template <typename T>
Var<T> Var<T>::leaf(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss) throw std::invalid_argument("backward: empty loss");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; reversed it is a valid reverse-topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer().fill(T{1});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

template <typename T>
ValueAndGrad<T> value_and_grad(const std::function<Var<T>(const std::vector<Var<T>>&)>& fn,
                               std::span<const Tensor<T>> params) {
  std::vector<Var<T>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(Var<T>::leaf(p));
  Var<T> loss = fn(leaves);
  if (loss.value().size() != 1) {
    throw std::invalid_argument("value_and_grad: loss must be scalar, got shape " +
                                shape_string(loss.shape()));
  }
  backward(loss);
  ValueAndGrad<T> out{loss.value()[0], {}};
  out.grads.reserve(leaves.size());
  for (auto& l : leaves) {
    out.grads.push_back(l.grad().empty() ? Tensor<T>(l.shape(), T{0}) : l.grad());
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows", "expected [N,K], got " + shape_string(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    T* o = out.data() + i * k;
    T mx = *std::max_element(row, row + k);
    T total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp(row[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= total;
  }
  return out;
}

namespace ag {
namespace {

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    n->requires_grad = true;
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward_fn = std::move(fn);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

template <typename T, typename F>
Var<T> unary(const Var<T>& x, F&& f, std::function<T(T x, T y)> dfdx) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(std::move(out), {x}, [dfdx](Node<T>& self) {
    Node<T>& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
  });
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += G[m,n] * B[k,n]^T
template <typename T>
void gemm_nt(const T* g, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
template <typename T>
void gemm_tn(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

struct ConvGeom {
  std::size_t n, c, h, w, o, kh, kw, ho, wo, stride, pad;
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((ci * g.kh + ki) * g.kw + kj) * hw;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long yi = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long xj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            const bool inside = yi >= 0 && xj >= 0 && yi < static_cast<long>(g.h) && xj < static_cast<long>(g.w);
            row[oi * g.wo + oj] = inside ? x[(ci * g.h + yi) * g.w + xj] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* dx) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((ci * g.kh + ki) * g.kw + kj) * hw;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long yi = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          if (yi < 0 || yi >= static_cast<long>(g.h)) continue;
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long xj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            if (xj < 0 || xj >= static_cast<long>(g.w)) continue;
            dx[(ci * g.h + yi) * g.w + xj] += row[oi * g.wo + oj];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    self.parents[0]->accumulate(self.grad);
    self.parents[1]->accumulate(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape("sub", a, b);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    self.parents[0]->accumulate(self.grad);
    Node<T>& rhs = *self.parents[1];
    if (!rhs.requires_grad) return;
    auto& g = rhs.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& l = *self.parents[0];
    Node<T>& r = *self.parents[1];
    if (l.requires_grad) {
      auto& g = l.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * r.value[i];
    }
    if (r.requires_grad) {
      auto& g = r.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * l.value[i];
    }
  });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  require_same_shape("div", a, b);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& l = *self.parents[0];
    Node<T>& r = *self.parents[1];
    if (l.requires_grad) {
      auto& g = l.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / r.value[i];
    }
    if (r.requires_grad) {
      auto& g = r.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / r.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return unary<T>(x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return unary<T>(x, [s](T v) { return v + s; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return scale(x, T{-1});
}

template <typename T>
Var<T> log(const Var<T>& x) {
  return unary<T>(x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return unary<T>(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return unary<T>(x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(x, [](T v) { return v > T{0} ? v : T{0}; }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> reciprocal(const Var<T>& x) {
  return unary<T>(x, [](T v) { return T{1} / v; }, [](T, T y) { return -y * y; });
}

template <typename T>
Var<T> clamp_min(const Var<T>& x, T floor) {
  return unary<T>(x, [floor](T v) { return v > floor ? v : floor; },
                  [floor](T v, T) { return v > floor ? T{1} : T{0}; });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor<T> out({m, n});
  gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return make_result<T>(std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    Node<T>& l = *self.parents[0];
    Node<T>& r = *self.parents[1];
    if (l.requires_grad) gemm_nt(self.grad.data(), r.value.data(), l.grad_buffer().data(), m, n, k);
    if (r.requires_grad) gemm_tn(l.value.data(), self.grad.data(), r.grad_buffer().data(), m, k, n);
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  if (x.value().rank() < 2 || bias.value().rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_bias", x.shape(), bias.shape());
  }
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  const std::size_t inner = x.value().size() / (n * c);
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      T* p = out.data() + (i * c + j) * inner;
      for (std::size_t q = 0; q < inner; ++q) p[q] += bias.value()[j];
    }
  return make_result<T>(std::move(out), {x, bias}, [n, c, inner](Node<T>& self) {
    self.parents[0]->accumulate(self.grad);
    Node<T>& b = *self.parents[1];
    if (!b.requires_grad) return;
    auto& g = b.grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const T* p = self.grad.data() + (i * c + j) * inner;
        T acc = 0;
        for (std::size_t q = 0; q < inner; ++q) acc += p[q];
        g[j] += acc;
      }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, Conv2dOptions opt) {
  if (x.value().rank() != 4 || w.value().rank() != 4 || x.shape()[1] != w.shape()[1]) {
    throw ShapeError("conv2d", x.shape(), w.shape());
  }
  if (opt.stride == 0) throw ShapeError("conv2d", "stride must be positive");
  ConvGeom g{};
  g.n = x.shape()[0];
  g.c = x.shape()[1];
  g.h = x.shape()[2];
  g.w = x.shape()[3];
  g.o = w.shape()[0];
  g.kh = w.shape()[2];
  g.kw = w.shape()[3];
  g.stride = opt.stride;
  g.pad = opt.padding;
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) throw ShapeError("conv2d", x.shape(), w.shape());
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  const std::size_t ckk = g.c * g.kh * g.kw, hw = g.ho * g.wo;
  Tensor<T> out({g.n, g.o, g.ho, g.wo});
  std::vector<T> cols(ckk * hw);
  for (std::size_t i = 0; i < g.n; ++i) {
    im2col(x.value().data() + i * g.c * g.h * g.w, g, cols.data());
    gemm_nn(w.value().data(), cols.data(), out.data() + i * g.o * hw, g.o, ckk, hw);
  }
  return make_result<T>(std::move(out), {x, w}, [g, ckk, hw](Node<T>& self) {
    Node<T>& xin = *self.parents[0];
    Node<T>& win = *self.parents[1];
    std::vector<T> cols(ckk * hw);
    std::vector<T> dcols(ckk * hw);
    for (std::size_t i = 0; i < g.n; ++i) {
      const T* dout = self.grad.data() + i * g.o * hw;
      if (win.requires_grad) {
        im2col(xin.value.data() + i * g.c * g.h * g.w, g, cols.data());
        gemm_nt(dout, cols.data(), win.grad_buffer().data(), g.o, hw, ckk);
      }
      if (xin.requires_grad) {
        std::fill(dcols.begin(), dcols.end(), T{0});
        gemm_tn(win.value.data(), dout, dcols.data(), g.o, ckk, hw);
        col2im(dcols.data(), g, xin.grad_buffer().data() + i * g.c * g.h * g.w);
      }
    }
  });
}

template <typename T>
Var<T> upsample_nearest2d(const Var<T>& x, std::size_t ho, std::size_t wo) {
  if (x.value().rank() != 4 || ho == 0 || wo == 0) {
    throw ShapeError("upsample_nearest2d", "expected [N,C,H,W] input and positive output size");
  }
  const std::size_t nc = x.shape()[0] * x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  Tensor<T> out({x.shape()[0], x.shape()[1], ho, wo});
  for (std::size_t p = 0; p < nc; ++p)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j)
        out[(p * ho + i) * wo + j] = x.value()[(p * h + i * h / ho) * w + j * w / wo];
  return make_result<T>(std::move(out), {x}, [nc, h, w, ho, wo](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t p = 0; p < nc; ++p)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j)
          g[(p * h + i * h / ho) * w + j * w / wo] += self.grad[(p * ho + i) * wo + j];
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  if (x.value().rank() != 4) throw ShapeError("global_avg_pool", "expected [N,C,H,W], got " + shape_string(x.shape()));
  const std::size_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  Tensor<T> out({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    T acc = 0;
    for (std::size_t q = 0; q < hw; ++q) acc += x.value()[p * hw + q];
    out[p] = acc / static_cast<T>(hw);
  }
  return make_result<T>(std::move(out), {x}, [n, c, hw](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t p = 0; p < n * c; ++p) {
      const T share = self.grad[p] / static_cast<T>(hw);
      for (std::size_t q = 0; q < hw; ++q) g[p * hw + q] += share;
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) { self.parents[0]->accumulate(self.grad); });
}

template <typename T>
Var<T> flatten(const Var<T>& x) {
  if (x.value().rank() < 1) throw ShapeError("flatten", "scalar input");
  const std::size_t n = x.shape()[0];
  return reshape(x, Shape{n, x.value().size() / n});
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (auto v : x.value().values()) acc += v;
  return make_result<T>(Tensor<T>::scalar(acc), {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const T s = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels) {
  if (logits.value().rank() != 2) {
    throw ShapeError("softmax_cross_entropy", "expected [N,K] logits, got " + shape_string(logits.shape()));
  }
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy", logits.shape(), Shape{labels.size()});
  std::vector<int> y(labels.begin(), labels.end());
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    }
  }
  Tensor<T> probs = softmax_rows(logits.value());
  Tensor<T> out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.value().data() + i * k;
    const T mx = *std::max_element(row, row + k);
    T total = 0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    out[i] = mx + std::log(total) - row[y[i]];
  }
  return make_result<T>(std::move(out), {logits}, [probs = std::move(probs), y = std::move(y), n, k](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const T gi = self.grad[i];
      for (std::size_t j = 0; j < k; ++j) {
        const T onehot = static_cast<std::size_t>(y[i]) == j ? T{1} : T{0};
        g[i * k + j] += gi * (probs[i * k + j] - onehot);
      }
    }
  });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  return mean(square(sub(a, b)));
}

#define GENIU_INSTANTIATE_OPS(T)                                                       \
  template Var<T> add(const Var<T>&, const Var<T>&);                                   \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                   \
  template Var<T> div(const Var<T>&, const Var<T>&);                                   \
  template Var<T> scale(const Var<T>&, T);                                             \
  template Var<T> add_scalar(const Var<T>&, T);                                        \
  template Var<T> neg(const Var<T>&);                                                  \
  template Var<T> log(const Var<T>&);                                                  \
  template Var<T> exp(const Var<T>&);                                                  \
  template Var<T> square(const Var<T>&);                                               \
  template Var<T> relu(const Var<T>&);                                                 \
  template Var<T> sigmoid(const Var<T>&);                                              \
  template Var<T> reciprocal(const Var<T>&);                                           \
  template Var<T> clamp_min(const Var<T>&, T);                                         \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                              \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, Conv2dOptions);                 \
  template Var<T> upsample_nearest2d(const Var<T>&, std::size_t, std::size_t);         \
  template Var<T> global_avg_pool(const Var<T>&);                                      \
  template Var<T> reshape(const Var<T>&, Shape);                                       \
  template Var<T> flatten(const Var<T>&);                                              \
  template Var<T> sum(const Var<T>&);                                                  \
  template Var<T> mean(const Var<T>&);                                                 \
  template Var<T> softmax_cross_entropy(const Var<T>&, std::span<const int>);          \
  template Var<T> mse(const Var<T>&, const Var<T>&);

GENIU_INSTANTIATE_OPS(float)
GENIU_INSTANTIATE_OPS(double)
#undef GENIU_INSTANTIATE_OPS

}  // namespace ag

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template void backward(const Var<float>&);
template void backward(const Var<double>&);
template ValueAndGrad<float> value_and_grad(const std::function<Var<float>(const std::vector<Var<float>>&)>&,
                                            std::span<const Tensor<float>>);
template ValueAndGrad<double> value_and_grad(const std::function<Var<double>(const std::vector<Var<double>>&)>&,
                                             std::span<const Tensor<double>>);
template Tensor<float> softmax_rows(const Tensor<float>&);
template Tensor<double> softmax_rows(const Tensor<double>&);

}  // namespace geniu
