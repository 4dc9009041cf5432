#include "locref/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace locref::nn {

std::vector<NamedParam> Module::named_parameters() const {
  std::vector<NamedParam> out;
  collect_params("", out);
  return out;
}

std::vector<NamedBuffer> Module::named_buffers() const {
  std::vector<NamedBuffer> out;
  collect_buffers("", out);
  return out;
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& np : named_parameters()) out.push_back(np.var);
  return out;
}

long long Module::parameter_count() const {
  long long n = 0;
  for (const auto& np : named_parameters()) n += np.var.value().numel();
  return n;
}

void Module::set_training(bool t) {
  training_ = t;
  for (auto& [name, child] : children_) child->set_training(t);
}

Var Module::register_param(const std::string& name, Tensor init) {
  Var v(std::move(init), /*requires_grad=*/true);
  params_.push_back({name, v});
  return v;
}

void Module::register_buffer(const std::string& name, Tensor* t) { buffers_.push_back({name, t}); }

void Module::register_child(const std::string& name, Module* m) { children_.emplace_back(name, m); }

void Module::collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
  for (const auto& p : params_) out.push_back({prefix + p.name, p.var});
  for (const auto& [name, child] : children_) child->collect_params(prefix + name + ".", out);
}

void Module::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) const {
  for (const auto& b : buffers_) out.push_back({prefix + b.name, b.tensor});
  for (const auto& [name, child] : children_) child->collect_buffers(prefix + name + ".", out);
}

Tensor he_normal(std::vector<int> dims, long long fan_in, Rng& rng) {
  Tensor t(std::move(dims));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  const long long n = t.numel();
  for (long long i = 0; i < n; ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng) : stride_(stride), pad_(pad) {
  w_ = register_param("weight", he_normal({out_ch, in_ch, kernel, kernel},
                                          static_cast<long long>(in_ch) * kernel * kernel, rng));
  b_ = register_param("bias", Tensor::zeros({out_ch}));
}

ConvTranspose2x2::ConvTranspose2x2(int in_ch, int out_ch, Rng& rng) {
  w_ = register_param("weight", he_normal({in_ch, out_ch, 2, 2}, static_cast<long long>(in_ch) * 4, rng));
  b_ = register_param("bias", Tensor::zeros({out_ch}));
}

BatchNorm2d::BatchNorm2d(int channels) : running_mean_(Tensor::zeros({channels})), running_var_(Tensor::full({channels}, 1.0)) {
  gamma_ = register_param("weight", Tensor::full({channels}, 1.0));
  beta_ = register_param("bias", Tensor::zeros({channels}));
  register_buffer("running_mean", &running_mean_);
  register_buffer("running_var", &running_var_);
}

ConvBnRelu::ConvBnRelu(int in_ch, int out_ch, int kernel, int pad, Rng& rng)
    : conv_(in_ch, out_ch, kernel, 1, pad, rng), bn_(out_ch) {
  register_child("conv", &conv_);
  register_child("bn", &bn_);
}

LearnedPool::LearnedPool(int channels) {
  w_ = register_param("weight", Tensor::full({channels, 2, 2}, 0.25));
  b_ = register_param("bias", Tensor::zeros({channels}));
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.value().dims()));
    v_.push_back(Tensor::zeros(p.value().dims()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor* g = params_[i].grad_ptr();
    if (!g) continue;
    Tensor& value = params_[i].value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const long long n = value.numel();
    for (long long j = 0; j < n; ++j) {
      const double gj = (*g)[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      value[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace locref::nn
