#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsnet {

// Dense row-major float tensor. Feature maps use NHWC order, convolution
// weights use (kh, kw, in_channels, out_channels).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    buf_.assign(static_cast<size_t>(numel_of(dims_)), 0.0f);
  }
  Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  const std::vector<int>& dims() const { return dims_; }
  int dim(int i) const { return dims_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(dims_.size()); }
  int64_t numel() const { return static_cast<int64_t>(buf_.size()); }
  bool empty() const { return buf_.empty(); }

  float* data() { return buf_.data(); }
  const float* data() const { return buf_.data(); }
  std::vector<float>& storage() { return buf_; }
  const std::vector<float>& storage() const { return buf_; }

  float& operator[](int64_t i) { return buf_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return buf_[static_cast<size_t>(i)]; }

  void fill(float v) { buf_.assign(buf_.size(), v); }
  void zero() { fill(0.0f); }

  void reshape(std::vector<int> dims) {
    if (numel_of(dims) != numel()) {
      throw std::invalid_argument("Tensor::reshape: element count mismatch");
    }
    dims_ = std::move(dims);
  }

  // Reallocates if the total size changes; contents are zeroed either way.
  void resize(std::vector<int> dims) {
    dims_ = std::move(dims);
    buf_.assign(static_cast<size_t>(numel_of(dims_)), 0.0f);
  }

  static int64_t numel_of(const std::vector<int>& dims) {
    int64_t n = 1;
    for (int d : dims) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return dims.empty() ? 0 : n;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> dims_;
  std::vector<float> buf_;
};

inline bool same_dims(const Tensor& a, const Tensor& b) { return a.dims() == b.dims(); }

}  // namespace dsnet
