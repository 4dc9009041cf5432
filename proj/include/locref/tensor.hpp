#pragma once

#include <cassert>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace locref {

// Dense row-major double tensor. Feature maps use NCHW order throughout.
// Copies share the buffer; clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    data_ = std::make_shared<std::vector<double>>(count(dims_), 0.0);
  }

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  static Tensor full(std::vector<int> dims, double v) {
    Tensor t(std::move(dims));
    t.fill(v);
    return t;
  }

  static Tensor scalar(double v) { return full({1}, v); }

  static Tensor from(std::vector<int> dims, std::vector<double> vals) {
    if (count(dims) != static_cast<long long>(vals.size()))
      throw std::invalid_argument("Tensor::from: value count does not match shape");
    Tensor t;
    t.dims_ = std::move(dims);
    t.data_ = std::make_shared<std::vector<double>>(std::move(vals));
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
  const std::vector<int>& dims() const { return dims_; }
  long long numel() const { return data_ ? static_cast<long long>(data_->size()) : 0; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }

  double& operator[](long long i) { return (*data_)[static_cast<size_t>(i)]; }
  double operator[](long long i) const { return (*data_)[static_cast<size_t>(i)]; }

  double& at(int n, int c, int h, int w) {
    return (*data_)[static_cast<size_t>(((static_cast<long long>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w)];
  }
  double at(int n, int c, int h, int w) const { return const_cast<Tensor*>(this)->at(n, c, h, w); }

  double& at(int c, int h, int w) {
    return (*data_)[static_cast<size_t>((static_cast<long long>(c) * dims_[1] + h) * dims_[2] + w)];
  }
  double at(int c, int h, int w) const { return const_cast<Tensor*>(this)->at(c, h, w); }

  double& at(int i, int j) { return (*data_)[static_cast<size_t>(static_cast<long long>(i) * dims_[1] + j)]; }
  double at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }

  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
    return (*data_)[0];
  }

  Tensor clone() const {
    Tensor t;
    t.dims_ = dims_;
    t.data_ = data_ ? std::make_shared<std::vector<double>>(*data_) : nullptr;
    return t;
  }

  void fill(double v) {
    for (auto& x : *data_) x = v;
  }
  void zero_() { fill(0.0); }

  // Overwrites this tensor's buffer with src's contents, keeping aliases valid.
  void copy_from(const Tensor& src) {
    if (!same_shape(src)) throw std::invalid_argument("Tensor::copy_from: shape mismatch " + shape_str() + " vs " + src.shape_str());
    *data_ = *src.data_;
  }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  static long long count(const std::vector<int>& dims) {
    long long n = 1;
    for (int d : dims) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int> dims_;
  std::shared_ptr<std::vector<double>> data_;
};

}  // namespace locref
