#include "locref/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace locref::nn {

namespace {

thread_local bool g_grad_enabled = true;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
using StrideMapRM = Eigen::Map<MatRM, 0, Eigen::OuterStride<>>;
using CStrideMapRM = Eigen::Map<const MatRM, 0, Eigen::OuterStride<>>;

// Column chunking bound for im2col buffers (doubles).
constexpr long long kChunkBudget = 6LL * 1024 * 1024;

Var make_result(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> backward) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& n = out.node();
  n->requires_grad = true;
  n->parents.reserve(inputs.size());
  for (const auto& in : inputs) n->parents.push_back(in.node());
  n->backward_fn = std::move(backward);
  return out;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                                b.value().shape_str());
}

// dx += dy * f(x) elementwise
template <typename F>
Var unary_op(const Var& x, Tensor value, F dfn) {
  auto xn = x.node();
  return make_result(std::move(value), {x}, [xn, dfn](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    const long long n = self.value.numel();
    for (long long i = 0; i < n; ++i) gx[i] += self.grad[i] * dfn(xn->value[i], self.value[i]);
  });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void Var::backward() const {
  if (!n_) throw std::logic_error("backward on empty Var");
  if (n_->value.numel() != 1) throw std::logic_error("backward requires a scalar output");

  // Iterative post-order DFS; reverse gives topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  visited.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  n_->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.defined()) node->backward_fn(*node);
  }
}

Var Var::detach() const {
  Var out;
  out.n_ = std::make_shared<Node>();
  out.n_->value = n_->value;  // shares the buffer
  return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var relu(const Var& x) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = x.value()[i] > 0.0 ? x.value()[i] : 0.0;
  return unary_op(x, std::move(y), [](double xi, double) { return xi > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
  return unary_op(x, std::move(y), [](double, double yi) { return yi * (1.0 - yi); });
}

Var vlog(const Var& x) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = std::log(x.value()[i]);
  return unary_op(x, std::move(y), [](double xi, double) { return 1.0 / xi; });
}

Var vabs(const Var& x) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = std::abs(x.value()[i]);
  return unary_op(x, std::move(y), [](double xi, double) { return xi > 0.0 ? 1.0 : (xi < 0.0 ? -1.0 : 0.0); });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = std::min(std::max(x.value()[i], lo), hi);
  return unary_op(x, std::move(y), [lo, hi](double xi, double) { return (xi >= lo && xi <= hi) ? 1.0 : 0.0; });
}

Var affine(const Var& x, double a, double b) {
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = a * x.value()[i] + b;
  return unary_op(x, std::move(y), [a](double, double) { return a; });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor y(a.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = a.value()[i] + b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_result(std::move(y), {a, b}, [an, bn](Node& self) {
    const long long n = self.value.numel();
    if (an->requires_grad) {
      Tensor& g = an->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      Tensor& g = bn->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor y(a.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = a.value()[i] - b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_result(std::move(y), {a, b}, [an, bn](Node& self) {
    const long long n = self.value.numel();
    if (an->requires_grad) {
      Tensor& g = an->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      Tensor& g = bn->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor y(a.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = a.value()[i] * b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_result(std::move(y), {a, b}, [an, bn](Node& self) {
    const long long n = self.value.numel();
    if (an->requires_grad) {
      Tensor& g = an->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      Tensor& g = bn->ensure_grad();
      for (long long i = 0; i < n; ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Var mul_const(const Var& x, const Tensor& t) {
  if (!x.value().same_shape(t)) throw std::invalid_argument("mul_const: shape mismatch");
  Tensor y(x.value().dims());
  const long long n = y.numel();
  for (long long i = 0; i < n; ++i) y[i] = x.value()[i] * t[i];
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, t](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const long long n = self.value.numel();
    for (long long i = 0; i < n; ++i) g[i] += self.grad[i] * t[i];
  });
}

Var mul_map(const Var& x, const Var& map) {
  const Tensor& xv = x.value();
  const Tensor& mv = map.value();
  if (xv.rank() != 4 || mv.rank() != 4 || mv.dim(1) != 1 || xv.dim(0) != mv.dim(0) || xv.dim(2) != mv.dim(2) ||
      xv.dim(3) != mv.dim(3))
    throw std::invalid_argument("mul_map: expected (N,C,H,W) and (N,1,H,W)");
  const int N = xv.dim(0), C = xv.dim(1);
  const long long hw = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  Tensor y(xv.dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xs = xv.data() + (static_cast<long long>(n) * C + c) * hw;
      const double* ms = mv.data() + static_cast<long long>(n) * hw;
      double* ys = y.data() + (static_cast<long long>(n) * C + c) * hw;
      for (long long i = 0; i < hw; ++i) ys[i] = xs[i] * ms[i];
    }
  auto xn = x.node(), mn = map.node();
  return make_result(std::move(y), {x, map}, [xn, mn, N, C, hw](Node& self) {
    if (xn->requires_grad) {
      Tensor& g = xn->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double* gs = g.data() + (static_cast<long long>(n) * C + c) * hw;
          const double* ms = mn->value.data() + static_cast<long long>(n) * hw;
          const double* ds = self.grad.data() + (static_cast<long long>(n) * C + c) * hw;
          for (long long i = 0; i < hw; ++i) gs[i] += ds[i] * ms[i];
        }
    }
    if (mn->requires_grad) {
      Tensor& g = mn->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double* gs = g.data() + static_cast<long long>(n) * hw;
          const double* xs = xn->value.data() + (static_cast<long long>(n) * C + c) * hw;
          const double* ds = self.grad.data() + (static_cast<long long>(n) * C + c) * hw;
          for (long long i = 0; i < hw; ++i) gs[i] += ds[i] * xs[i];
        }
    }
  });
}

Var mul_channel(const Var& x, const Var& w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(2) != 1 || wv.dim(3) != 1 || xv.dim(0) != wv.dim(0) ||
      xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("mul_channel: expected (N,C,H,W) and (N,C,1,1)");
  const int N = xv.dim(0), C = xv.dim(1);
  const long long hw = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  Tensor y(xv.dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double s = wv[static_cast<long long>(n) * C + c];
      const double* xs = xv.data() + (static_cast<long long>(n) * C + c) * hw;
      double* ys = y.data() + (static_cast<long long>(n) * C + c) * hw;
      for (long long i = 0; i < hw; ++i) ys[i] = xs[i] * s;
    }
  auto xn = x.node(), wn = w.node();
  return make_result(std::move(y), {x, w}, [xn, wn, N, C, hw](Node& self) {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const double* ds = self.grad.data() + (static_cast<long long>(n) * C + c) * hw;
        if (xn->requires_grad) {
          const double s = wn->value[static_cast<long long>(n) * C + c];
          double* gs = xn->ensure_grad().data() + (static_cast<long long>(n) * C + c) * hw;
          for (long long i = 0; i < hw; ++i) gs[i] += ds[i] * s;
        }
        if (wn->requires_grad) {
          const double* xs = xn->value.data() + (static_cast<long long>(n) * C + c) * hw;
          double acc = 0.0;
          for (long long i = 0; i < hw; ++i) acc += ds[i] * xs[i];
          wn->ensure_grad()[static_cast<long long>(n) * C + c] += acc;
        }
      }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var sum_all(const Var& x) {
  double s = 0.0;
  const long long n = x.value().numel();
  for (long long i = 0; i < n; ++i) s += x.value()[i];
  auto xn = x.node();
  return make_result(Tensor::scalar(s), {x}, [xn](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const double d = self.grad[0];
    const long long n = g.numel();
    for (long long i = 0; i < n; ++i) g[i] += d;
  });
}

Var mean_all(const Var& x) { return affine(sum_all(x), 1.0 / static_cast<double>(x.value().numel()), 0.0); }

Var dot_const(const Var& x, const Tensor& t) {
  if (!x.value().same_shape(t)) throw std::invalid_argument("dot_const: shape mismatch");
  double s = 0.0;
  const long long n = t.numel();
  for (long long i = 0; i < n; ++i) s += x.value()[i] * t[i];
  auto xn = x.node();
  return make_result(Tensor::scalar(s), {x}, [xn, t](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const double d = self.grad[0];
    const long long n = g.numel();
    for (long long i = 0; i < n; ++i) g[i] += d * t[i];
  });
}

namespace {

Var channel_reduce(const Var& x, bool take_max) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("channel reduce: expected rank-4");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const long long hw = static_cast<long long>(H) * W;
  Tensor y({N, 1, H, W});
  auto argmax = take_max ? std::make_shared<std::vector<int>>(static_cast<size_t>(N) * hw) : nullptr;
  for (int n = 0; n < N; ++n)
    for (long long i = 0; i < hw; ++i) {
      const double* base = xv.data() + static_cast<long long>(n) * C * hw + i;
      if (take_max) {
        double best = base[0];
        int besti = 0;
        for (int c = 1; c < C; ++c) {
          const double v = base[static_cast<long long>(c) * hw];
          if (v > best) {
            best = v;
            besti = c;
          }
        }
        y[static_cast<long long>(n) * hw + i] = best;
        (*argmax)[static_cast<size_t>(n * hw + i)] = besti;
      } else {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += base[static_cast<long long>(c) * hw];
        y[static_cast<long long>(n) * hw + i] = s / C;
      }
    }
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, argmax, take_max, N, C, hw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (long long i = 0; i < hw; ++i) {
        const double d = self.grad[static_cast<long long>(n) * hw + i];
        if (take_max) {
          const int c = (*argmax)[static_cast<size_t>(n * hw + i)];
          g[(static_cast<long long>(n) * C + c) * hw + i] += d;
        } else {
          const double dc = d / C;
          for (int c = 0; c < C; ++c) g[(static_cast<long long>(n) * C + c) * hw + i] += dc;
        }
      }
  });
}

Var spatial_reduce(const Var& x, bool take_max) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("spatial reduce: expected rank-4");
  const int N = xv.dim(0), C = xv.dim(1);
  const long long hw = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  Tensor y({N, C, 1, 1});
  auto argmax = take_max ? std::make_shared<std::vector<long long>>(static_cast<size_t>(N) * C) : nullptr;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* base = xv.data() + (static_cast<long long>(n) * C + c) * hw;
      if (take_max) {
        double best = base[0];
        long long besti = 0;
        for (long long i = 1; i < hw; ++i)
          if (base[i] > best) {
            best = base[i];
            besti = i;
          }
        y[static_cast<long long>(n) * C + c] = best;
        (*argmax)[static_cast<size_t>(n) * C + c] = besti;
      } else {
        double s = 0.0;
        for (long long i = 0; i < hw; ++i) s += base[i];
        y[static_cast<long long>(n) * C + c] = s / static_cast<double>(hw);
      }
    }
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, argmax, take_max, N, C, hw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const double d = self.grad[static_cast<long long>(n) * C + c];
        double* gs = g.data() + (static_cast<long long>(n) * C + c) * hw;
        if (take_max) {
          gs[(*argmax)[static_cast<size_t>(n) * C + c]] += d;
        } else {
          const double di = d / static_cast<double>(hw);
          for (long long i = 0; i < hw; ++i) gs[i] += di;
        }
      }
  });
}

}  // namespace

Var channel_max(const Var& x) { return channel_reduce(x, true); }
Var channel_mean(const Var& x) { return channel_reduce(x, false); }
Var spatial_max(const Var& x) { return spatial_reduce(x, true); }
Var spatial_mean(const Var& x) { return spatial_reduce(x, false); }

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 4 || bv.rank() != 4 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
    throw std::invalid_argument("concat_channels: incompatible shapes");
  const int N = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1);
  const long long hw = static_cast<long long>(av.dim(2)) * av.dim(3);
  Tensor y({N, Ca + Cb, av.dim(2), av.dim(3)});
  for (int n = 0; n < N; ++n) {
    std::copy_n(av.data() + static_cast<long long>(n) * Ca * hw, Ca * hw,
                y.data() + static_cast<long long>(n) * (Ca + Cb) * hw);
    std::copy_n(bv.data() + static_cast<long long>(n) * Cb * hw, Cb * hw,
                y.data() + static_cast<long long>(n) * (Ca + Cb) * hw + Ca * hw);
  }
  auto an = a.node(), bn = b.node();
  return make_result(std::move(y), {a, b}, [an, bn, N, Ca, Cb, hw](Node& self) {
    if (an->requires_grad) {
      Tensor& g = an->ensure_grad();
      for (int n = 0; n < N; ++n) {
        const double* ds = self.grad.data() + static_cast<long long>(n) * (Ca + Cb) * hw;
        double* gs = g.data() + static_cast<long long>(n) * Ca * hw;
        for (long long i = 0; i < Ca * hw; ++i) gs[i] += ds[i];
      }
    }
    if (bn->requires_grad) {
      Tensor& g = bn->ensure_grad();
      for (int n = 0; n < N; ++n) {
        const double* ds = self.grad.data() + static_cast<long long>(n) * (Ca + Cb) * hw + Ca * hw;
        double* gs = g.data() + static_cast<long long>(n) * Cb * hw;
        for (long long i = 0; i < Cb * hw; ++i) gs[i] += ds[i];
      }
    }
  });
}

Var slice_batch(const Var& x, int n) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || n < 0 || n >= xv.dim(0)) throw std::invalid_argument("slice_batch: bad index");
  const long long chw = xv.numel() / xv.dim(0);
  Tensor y({1, xv.dim(1), xv.dim(2), xv.dim(3)});
  std::copy_n(xv.data() + static_cast<long long>(n) * chw, chw, y.data());
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, n, chw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    double* gs = g.data() + static_cast<long long>(n) * chw;
    for (long long i = 0; i < chw; ++i) gs[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

Var maxpool2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("maxpool2: expected rank-4");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (H % 2 || W % 2) throw std::invalid_argument("maxpool2: odd spatial dims");
  const int Ho = H / 2, Wo = W / 2;
  Tensor y({N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<long long>>(static_cast<size_t>(y.numel()));
  long long o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long long plane = (static_cast<long long>(n) * C + c) * H * W;
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j, ++o) {
          double best = -1e308;
          long long besti = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              const long long idx = plane + static_cast<long long>(2 * i + a) * W + (2 * j + b);
              if (xv[idx] > best) {
                best = xv[idx];
                besti = idx;
              }
            }
          y[o] = best;
          (*argmax)[static_cast<size_t>(o)] = besti;
        }
    }
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, argmax](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const long long n = self.value.numel();
    for (long long i = 0; i < n; ++i) g[(*argmax)[static_cast<size_t>(i)]] += self.grad[i];
  });
}

Var avgpool(const Var& x, int k) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("avgpool: expected rank-4");
  if (k <= 0) throw std::invalid_argument("avgpool: kernel must be positive");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (H % k || W % k) throw std::invalid_argument("avgpool: dims not divisible by kernel");
  const int Ho = H / k, Wo = W / k;
  const double inv = 1.0 / (static_cast<double>(k) * k);
  Tensor y({N, C, Ho, Wo});
  long long o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long long plane = (static_cast<long long>(n) * C + c) * H * W;
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j, ++o) {
          double s = 0.0;
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) s += xv[plane + static_cast<long long>(k * i + a) * W + (k * j + b)];
          y[o] = s * inv;
        }
    }
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, k, inv, N, C, H, W, Ho, Wo](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    long long o = 0;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const long long plane = (static_cast<long long>(n) * C + c) * H * W;
        for (int i = 0; i < Ho; ++i)
          for (int j = 0; j < Wo; ++j, ++o) {
            const double d = self.grad[o] * inv;
            for (int a = 0; a < k; ++a)
              for (int b = 0; b < k; ++b) g[plane + static_cast<long long>(k * i + a) * W + (k * j + b)] += d;
          }
      }
  });
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  int N, Cin, H, W, Cout, k, Ho, Wo;
  long long K, L;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4) throw std::invalid_argument("conv2d: expected rank-4 input and weight");
  if (x.dim(1) != w.dim(1)) throw std::invalid_argument("conv2d: channel mismatch");
  if (w.dim(2) != w.dim(3)) throw std::invalid_argument("conv2d: non-square kernel");
  ConvDims d;
  d.N = x.dim(0);
  d.Cin = x.dim(1);
  d.H = x.dim(2);
  d.W = x.dim(3);
  d.Cout = w.dim(0);
  d.k = w.dim(2);
  d.Ho = (d.H + 2 * pad - d.k) / stride + 1;
  d.Wo = (d.W + 2 * pad - d.k) / stride + 1;
  if (d.Ho <= 0 || d.Wo <= 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  d.K = static_cast<long long>(d.Cin) * d.k * d.k;
  d.L = static_cast<long long>(d.Ho) * d.Wo;
  return d;
}

// col is (K x cols) row-major for output positions [c0, c0+cols).
void im2col_chunk(const Tensor& x, const ConvDims& d, int n, int stride, int pad, long long c0, long long cols,
                  double* col) {
  for (int ci = 0; ci < d.Cin; ++ci) {
    const double* plane = x.data() + (static_cast<long long>(n) * d.Cin + ci) * d.H * d.W;
    for (int ka = 0; ka < d.k; ++ka)
      for (int kb = 0; kb < d.k; ++kb) {
        double* row = col + ((static_cast<long long>(ci) * d.k + ka) * d.k + kb) * cols;
        for (long long j = 0; j < cols; ++j) {
          const long long l = c0 + j;
          const int oh = static_cast<int>(l / d.Wo);
          const int ow = static_cast<int>(l % d.Wo);
          const int ih = oh * stride - pad + ka;
          const int iw = ow * stride - pad + kb;
          row[j] = (ih >= 0 && ih < d.H && iw >= 0 && iw < d.W) ? plane[static_cast<long long>(ih) * d.W + iw] : 0.0;
        }
      }
  }
}

void col2im_chunk(Tensor& gx, const ConvDims& d, int n, int stride, int pad, long long c0, long long cols,
                  const double* col) {
  for (int ci = 0; ci < d.Cin; ++ci) {
    double* plane = gx.data() + (static_cast<long long>(n) * d.Cin + ci) * d.H * d.W;
    for (int ka = 0; ka < d.k; ++ka)
      for (int kb = 0; kb < d.k; ++kb) {
        const double* row = col + ((static_cast<long long>(ci) * d.k + ka) * d.k + kb) * cols;
        for (long long j = 0; j < cols; ++j) {
          const long long l = c0 + j;
          const int oh = static_cast<int>(l / d.Wo);
          const int ow = static_cast<int>(l % d.Wo);
          const int ih = oh * stride - pad + ka;
          const int iw = ow * stride - pad + kb;
          if (ih >= 0 && ih < d.H && iw >= 0 && iw < d.W) plane[static_cast<long long>(ih) * d.W + iw] += row[j];
        }
      }
  }
}

long long chunk_cols(long long K, long long L) {
  const long long c = std::max<long long>(1, kChunkBudget / std::max<long long>(K, 1));
  return std::min(L, c);
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const ConvDims d = conv_dims(x.value(), w.value(), stride, pad);
  if (b.value().numel() != d.Cout) throw std::invalid_argument("conv2d: bias size mismatch");

  Tensor y({d.N, d.Cout, d.Ho, d.Wo});
  const long long cc = chunk_cols(d.K, d.L);
  std::vector<double> col(static_cast<size_t>(d.K * cc));
  CMapRM wmat(w.value().data(), d.Cout, d.K);
  for (int n = 0; n < d.N; ++n) {
    double* yplane = y.data() + static_cast<long long>(n) * d.Cout * d.L;
    for (long long c0 = 0; c0 < d.L; c0 += cc) {
      const long long cols = std::min(cc, d.L - c0);
      im2col_chunk(x.value(), d, n, stride, pad, c0, cols, col.data());
      CMapRM colmap(col.data(), d.K, cols);
      StrideMapRM ymap(yplane + c0, d.Cout, cols, Eigen::OuterStride<>(d.L));
      ymap.noalias() = wmat * colmap;
    }
    for (int co = 0; co < d.Cout; ++co) {
      const double bias = b.value()[co];
      double* row = yplane + static_cast<long long>(co) * d.L;
      for (long long l = 0; l < d.L; ++l) row[l] += bias;
    }
  }

  auto xn = x.node(), wn = w.node(), bn = b.node();
  return make_result(std::move(y), {x, w, b}, [xn, wn, bn, d, stride, pad](Node& self) {
    const long long cc = chunk_cols(d.K, d.L);
    std::vector<double> col(static_cast<size_t>(d.K * cc));
    std::vector<double> dcol(xn->requires_grad ? static_cast<size_t>(d.K * cc) : 0);
    CMapRM wmat(wn->value.data(), d.Cout, d.K);

    if (bn->requires_grad) {
      Tensor& gb = bn->ensure_grad();
      for (int n = 0; n < d.N; ++n)
        for (int co = 0; co < d.Cout; ++co) {
          const double* row = self.grad.data() + (static_cast<long long>(n) * d.Cout + co) * d.L;
          double s = 0.0;
          for (long long l = 0; l < d.L; ++l) s += row[l];
          gb[co] += s;
        }
    }

    for (int n = 0; n < d.N; ++n) {
      const double* dyplane = self.grad.data() + static_cast<long long>(n) * d.Cout * d.L;
      for (long long c0 = 0; c0 < d.L; c0 += cc) {
        const long long cols = std::min(cc, d.L - c0);
        CStrideMapRM dymap(dyplane + c0, d.Cout, cols, Eigen::OuterStride<>(d.L));
        if (wn->requires_grad || xn->requires_grad) im2col_chunk(xn->value, d, n, stride, pad, c0, cols, col.data());
        if (wn->requires_grad) {
          Tensor& gw = wn->ensure_grad();
          MapRM gwmat(gw.data(), d.Cout, d.K);
          CMapRM colmap(col.data(), d.K, cols);
          gwmat.noalias() += dymap * colmap.transpose();
        }
        if (xn->requires_grad) {
          Tensor& gx = xn->ensure_grad();
          MapRM dcolmap(dcol.data(), d.K, cols);
          dcolmap.noalias() = wmat.transpose() * dymap;
          col2im_chunk(gx, d, n, stride, pad, c0, cols, dcol.data());
        }
      }
    }
  });
}

Var conv_transpose2(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(2) != 2 || wv.dim(3) != 2)
    throw std::invalid_argument("conv_transpose2: expected (N,Cin,H,W) and (Cin,Cout,2,2)");
  if (xv.dim(1) != wv.dim(0)) throw std::invalid_argument("conv_transpose2: channel mismatch");
  const int N = xv.dim(0), Cin = xv.dim(1), H = xv.dim(2), W = xv.dim(3), Cout = wv.dim(1);
  if (b.value().numel() != Cout) throw std::invalid_argument("conv_transpose2: bias size mismatch");
  const long long L = static_cast<long long>(H) * W;

  // (Cout*4 x Cin) view of the weight, q = 2a+b.
  MatRM m(Cout * 4, Cin);
  for (int ci = 0; ci < Cin; ++ci)
    for (int co = 0; co < Cout; ++co)
      for (int q = 0; q < 4; ++q) m(co * 4 + q, ci) = wv[((static_cast<long long>(ci) * Cout + co) * 2 + q / 2) * 2 + q % 2];

  Tensor y({N, Cout, 2 * H, 2 * W});
  const long long cc = chunk_cols(Cout * 4, L);
  MatRM outcols(Cout * 4, cc);
  for (int n = 0; n < N; ++n) {
    for (long long c0 = 0; c0 < L; c0 += cc) {
      const long long cols = std::min(cc, L - c0);
      CStrideMapRM xmap(xv.data() + static_cast<long long>(n) * Cin * L + c0, Cin, cols, Eigen::OuterStride<>(L));
      outcols.leftCols(cols).noalias() = m * xmap;
      for (int co = 0; co < Cout; ++co) {
        const double bias = b.value()[co];
        double* plane = y.data() + (static_cast<long long>(n) * Cout + co) * 4 * L;
        for (long long j = 0; j < cols; ++j) {
          const long long l = c0 + j;
          const int i = static_cast<int>(l / W), jj = static_cast<int>(l % W);
          for (int q = 0; q < 4; ++q) {
            const int oh = 2 * i + q / 2, ow = 2 * jj + q % 2;
            plane[static_cast<long long>(oh) * 2 * W + ow] = outcols(co * 4 + q, j) + bias;
          }
        }
      }
    }
  }

  auto xn = x.node(), wn = w.node(), bn = b.node();
  return make_result(std::move(y), {x, w, b}, [xn, wn, bn, N, Cin, Cout, H, W, L, m](Node& self) {
    const long long cc = chunk_cols(Cout * 4, L);
    MatRM dout(Cout * 4, cc);
    MatRM dm = MatRM::Zero(Cout * 4, Cin);
    const bool need_dm = wn->requires_grad;

    if (bn->requires_grad) {
      Tensor& gb = bn->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
          const double* plane = self.grad.data() + (static_cast<long long>(n) * Cout + co) * 4 * L;
          double s = 0.0;
          for (long long i = 0; i < 4 * L; ++i) s += plane[i];
          gb[co] += s;
        }
    }

    for (int n = 0; n < N; ++n) {
      for (long long c0 = 0; c0 < L; c0 += cc) {
        const long long cols = std::min(cc, L - c0);
        for (int co = 0; co < Cout; ++co) {
          const double* plane = self.grad.data() + (static_cast<long long>(n) * Cout + co) * 4 * L;
          for (long long j = 0; j < cols; ++j) {
            const long long l = c0 + j;
            const int i = static_cast<int>(l / W), jj = static_cast<int>(l % W);
            for (int q = 0; q < 4; ++q)
              dout(co * 4 + q, j) = plane[static_cast<long long>(2 * i + q / 2) * 2 * W + (2 * jj + q % 2)];
          }
        }
        CStrideMapRM xmap(xn->value.data() + static_cast<long long>(n) * Cin * L + c0, Cin, cols,
                          Eigen::OuterStride<>(L));
        if (need_dm) dm.noalias() += dout.leftCols(cols) * xmap.transpose();
        if (xn->requires_grad) {
          Tensor& gx = xn->ensure_grad();
          StrideMapRM gxmap(gx.data() + static_cast<long long>(n) * Cin * L + c0, Cin, cols, Eigen::OuterStride<>(L));
          gxmap.noalias() += m.transpose() * dout.leftCols(cols);
        }
      }
    }
    if (need_dm) {
      Tensor& gw = wn->ensure_grad();
      for (int ci = 0; ci < Cin; ++ci)
        for (int co = 0; co < Cout; ++co)
          for (int q = 0; q < 4; ++q)
            gw[((static_cast<long long>(ci) * Cout + co) * 2 + q / 2) * 2 + q % 2] += dm(co * 4 + q, ci);
    }
  });
}

Var depthwise_down2(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 3 || wv.dim(1) != 2 || wv.dim(2) != 2)
    throw std::invalid_argument("depthwise_down2: expected (N,C,H,W) and (C,2,2)");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (wv.dim(0) != C) throw std::invalid_argument("depthwise_down2: channel mismatch");
  if (b.value().numel() != C) throw std::invalid_argument("depthwise_down2: bias size mismatch");
  if (H % 2 || W % 2) throw std::invalid_argument("depthwise_down2: odd spatial dims");
  const int Ho = H / 2, Wo = W / 2;

  Tensor y({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double w00 = wv[static_cast<long long>(c) * 4], w01 = wv[static_cast<long long>(c) * 4 + 1];
      const double w10 = wv[static_cast<long long>(c) * 4 + 2], w11 = wv[static_cast<long long>(c) * 4 + 3];
      const double bias = b.value()[c];
      const double* in = xv.data() + (static_cast<long long>(n) * C + c) * H * W;
      double* out = y.data() + (static_cast<long long>(n) * C + c) * Ho * Wo;
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          const double* p = in + static_cast<long long>(2 * i) * W + 2 * j;
          out[static_cast<long long>(i) * Wo + j] = w00 * p[0] + w01 * p[1] + w10 * p[W] + w11 * p[W + 1] + bias;
        }
    }

  auto xn = x.node(), wn = w.node(), bn = b.node();
  return make_result(std::move(y), {x, w, b}, [xn, wn, bn, N, C, H, W, Ho, Wo](Node& self) {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const double* dy = self.grad.data() + (static_cast<long long>(n) * C + c) * Ho * Wo;
        const double* in = xn->value.data() + (static_cast<long long>(n) * C + c) * H * W;
        const double w00 = wn->value[static_cast<long long>(c) * 4], w01 = wn->value[static_cast<long long>(c) * 4 + 1];
        const double w10 = wn->value[static_cast<long long>(c) * 4 + 2],
                     w11 = wn->value[static_cast<long long>(c) * 4 + 3];
        double dw00 = 0, dw01 = 0, dw10 = 0, dw11 = 0, db = 0;
        double* gx = xn->requires_grad ? xn->ensure_grad().data() + (static_cast<long long>(n) * C + c) * H * W : nullptr;
        for (int i = 0; i < Ho; ++i)
          for (int j = 0; j < Wo; ++j) {
            const double d = dy[static_cast<long long>(i) * Wo + j];
            const double* p = in + static_cast<long long>(2 * i) * W + 2 * j;
            dw00 += d * p[0];
            dw01 += d * p[1];
            dw10 += d * p[W];
            dw11 += d * p[W + 1];
            db += d;
            if (gx) {
              double* q = gx + static_cast<long long>(2 * i) * W + 2 * j;
              q[0] += d * w00;
              q[1] += d * w01;
              q[W] += d * w10;
              q[W + 1] += d * w11;
            }
          }
        if (wn->requires_grad) {
          Tensor& gw = wn->ensure_grad();
          gw[static_cast<long long>(c) * 4] += dw00;
          gw[static_cast<long long>(c) * 4 + 1] += dw01;
          gw[static_cast<long long>(c) * 4 + 2] += dw10;
          gw[static_cast<long long>(c) * 4 + 3] += dw11;
        }
        if (bn->requires_grad) bn->ensure_grad()[c] += db;
      }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               bool training, double momentum, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("batch_norm: expected rank-4");
  const int N = xv.dim(0), C = xv.dim(1);
  const long long hw = static_cast<long long>(xv.dim(2)) * xv.dim(3);
  const long long M = static_cast<long long>(N) * hw;
  if (gamma.value().numel() != C || beta.value().numel() != C || running_mean.numel() != C || running_var.numel() != C)
    throw std::invalid_argument("batch_norm: channel mismatch");

  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(C), 0.0);
  auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double mu, var;
    if (training) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = xv.data() + (static_cast<long long>(n) * C + c) * hw;
        for (long long i = 0; i < hw; ++i) s += p[i];
      }
      mu = s / static_cast<double>(M);
      double sv = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = xv.data() + (static_cast<long long>(n) * C + c) * hw;
        for (long long i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          sv += d * d;
        }
      }
      var = sv / static_cast<double>(M);
      const double var_unbiased = M > 1 ? sv / static_cast<double>(M - 1) : var;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var_unbiased;
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    (*mean)[static_cast<size_t>(c)] = mu;
    (*invstd)[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + eps);
  }

  Tensor y(xv.dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double mu = (*mean)[static_cast<size_t>(c)];
      const double is = (*invstd)[static_cast<size_t>(c)];
      const double g = gamma.value()[c], bt = beta.value()[c];
      const double* p = xv.data() + (static_cast<long long>(n) * C + c) * hw;
      double* q = y.data() + (static_cast<long long>(n) * C + c) * hw;
      for (long long i = 0; i < hw; ++i) q[i] = g * (p[i] - mu) * is + bt;
    }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result(std::move(y), {x, gamma, beta}, [xn, gn, bn, mean, invstd, training, N, C, hw, M](Node& self) {
    for (int c = 0; c < C; ++c) {
      const double mu = (*mean)[static_cast<size_t>(c)];
      const double is = (*invstd)[static_cast<size_t>(c)];
      const double g = gn->value[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* dy = self.grad.data() + (static_cast<long long>(n) * C + c) * hw;
        const double* xp = xn->value.data() + (static_cast<long long>(n) * C + c) * hw;
        for (long long i = 0; i < hw; ++i) {
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * (xp[i] - mu) * is;
        }
      }
      if (gn->requires_grad) gn->ensure_grad()[c] += sum_dy_xhat;
      if (bn->requires_grad) bn->ensure_grad()[c] += sum_dy;
      if (xn->requires_grad) {
        Tensor& gx = xn->ensure_grad();
        const double mean_dy = sum_dy / static_cast<double>(M);
        const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(M);
        for (int n = 0; n < N; ++n) {
          const double* dy = self.grad.data() + (static_cast<long long>(n) * C + c) * hw;
          const double* xp = xn->value.data() + (static_cast<long long>(n) * C + c) * hw;
          double* gp = gx.data() + (static_cast<long long>(n) * C + c) * hw;
          if (training) {
            for (long long i = 0; i < hw; ++i) {
              const double xhat = (xp[i] - mu) * is;
              gp[i] += g * is * (dy[i] - mean_dy - xhat * mean_dy_xhat);
            }
          } else {
            for (long long i = 0; i < hw; ++i) gp[i] += g * is * dy[i];
          }
        }
      }
    }
  });
}

}  // namespace locref::nn
