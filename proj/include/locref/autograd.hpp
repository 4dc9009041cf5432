#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "locref/tensor.hpp"

namespace locref::nn {

// Reverse-mode autodiff over Tensor. Ops record a backward closure when grad
// mode is on and any input requires grad; Var::backward() walks the graph in
// reverse topological order. Single-threaded by design: every op has a fixed
// accumulation order, so runs with the same seed are bit-identical.

bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.dims());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false) : n_(std::make_shared<Node>()) {
    n_->value = std::move(value);
    n_->requires_grad = requires_grad;
  }

  bool defined() const { return n_ != nullptr; }
  const Tensor& value() const { return n_->value; }
  Tensor& value() { return n_->value; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  Tensor& grad() { return n_->ensure_grad(); }
  const Tensor* grad_ptr() const { return n_ && n_->grad.defined() ? &n_->grad : nullptr; }
  void zero_grad() {
    if (n_ && n_->grad.defined()) n_->grad.zero_();
  }

  // Seeds d(out)/d(out) = 1; out must be a single element.
  void backward() const;

  Var detach() const;

  std::shared_ptr<Node>& node() { return n_; }
  const std::shared_ptr<Node>& node() const { return n_; }

 private:
  std::shared_ptr<Node> n_;
};

// ---- elementwise ----
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var vlog(const Var& x);
Var vabs(const Var& x);
Var clamp(const Var& x, double lo, double hi);
Var affine(const Var& x, double a, double b);  // a*x + b
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var mul_const(const Var& x, const Tensor& t);
// (N,C,H,W) scaled by a single-channel map (N,1,H,W).
Var mul_map(const Var& x, const Var& map);
// (N,C,H,W) scaled by per-channel weights (N,C,1,1).
Var mul_channel(const Var& x, const Var& w);

// ---- reductions ----
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var dot_const(const Var& x, const Tensor& t);  // scalar sum(x*t)
Var channel_max(const Var& x);                 // (N,C,H,W) -> (N,1,H,W)
Var channel_mean(const Var& x);
Var spatial_max(const Var& x);  // (N,C,H,W) -> (N,C,1,1)
Var spatial_mean(const Var& x);

// ---- structure ----
Var concat_channels(const Var& a, const Var& b);
Var slice_batch(const Var& x, int n);  // (N,C,H,W) -> (1,C,H,W)

// ---- spatial ----
Var maxpool2(const Var& x);            // kernel 2, stride 2
Var avgpool(const Var& x, int k);      // kernel k, stride k, no padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var conv_transpose2(const Var& x, const Var& w, const Var& b);  // kernel 2, stride 2
// Per-channel 2x2 stride-2 aggregation; w is (C,2,2), b is (C).
Var depthwise_down2(const Var& x, const Var& w, const Var& b);
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               bool training, double momentum = 0.1, double eps = 1e-5);

}  // namespace locref::nn
