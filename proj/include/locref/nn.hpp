#pragma once

#include <memory>
#include <string>
#include <vector>

#include "locref/autograd.hpp"
#include "locref/rng.hpp"
#include "locref/tensor.hpp"

namespace locref::nn {

struct NamedParam {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

// Owns parameters and non-trainable state (batch-norm running stats), and
// exposes both as flat name->tensor lists for checkpoints and counting.
class Module {
 public:
  virtual ~Module() = default;

  std::vector<NamedParam> named_parameters() const;
  std::vector<NamedBuffer> named_buffers() const;
  std::vector<Var> parameters() const;
  long long parameter_count() const;

  void set_training(bool t);
  bool training() const { return training_; }

 protected:
  Var register_param(const std::string& name, Tensor init);
  void register_buffer(const std::string& name, Tensor* t);
  void register_child(const std::string& name, Module* m);

 private:
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) const;

  std::vector<NamedParam> params_;
  std::vector<NamedBuffer> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
};

Tensor he_normal(std::vector<int> dims, long long fan_in, Rng& rng);

class Conv2d : public Module {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng);
  Var forward(const Var& x) const { return conv2d(x, w_, b_, stride_, pad_); }
  const Var& weight() const { return w_; }
  const Var& bias() const { return b_; }

 private:
  Var w_, b_;
  int stride_, pad_;
};

class ConvTranspose2x2 : public Module {
 public:
  ConvTranspose2x2(int in_ch, int out_ch, Rng& rng);
  Var forward(const Var& x) const { return conv_transpose2(x, w_, b_); }

 private:
  Var w_, b_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int channels);
  Var forward(const Var& x) { return batch_norm(x, gamma_, beta_, running_mean_, running_var_, training()); }

 private:
  Var gamma_, beta_;
  Tensor running_mean_, running_var_;
};

// conv -> batch norm -> ReLU, the standard block unit here.
class ConvBnRelu : public Module {
 public:
  ConvBnRelu(int in_ch, int out_ch, int kernel, int pad, Rng& rng);
  Var forward(const Var& x) { return relu(bn_.forward(conv_.forward(x))); }

 private:
  Conv2d conv_;
  BatchNorm2d bn_;
};

// Trainable per-channel 2x2 stride-2 aggregation. Average-pool initialised:
// every kernel cell 0.25, bias 0, so an untrained instance is exactly 2x2
// average pooling.
class LearnedPool : public Module {
 public:
  explicit LearnedPool(int channels);
  Var forward(const Var& x) const { return depthwise_down2(x, w_, b_); }
  const Var& weight() const { return w_; }
  const Var& bias() const { return b_; }

 private:
  Var w_, b_;
};

class Adam {
 public:
  Adam(std::vector<Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();

  double lr() const { return lr_; }
  long long step_count() const { return t_; }
  // Moment tensors in parameter order, exposed for checkpointing.
  std::vector<Tensor>& m() { return m_; }
  std::vector<Tensor>& v() { return v_; }
  void set_step_count(long long t) { t_ = t; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace locref::nn
