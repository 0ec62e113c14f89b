#include "dsnet/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace dsnet {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapRowVec = Eigen::Map<Eigen::Matrix<float, 1, Eigen::Dynamic>>;
using CMapRowVec = Eigen::Map<const Eigen::Matrix<float, 1, Eigen::Dynamic>>;

int static_channels_of(const Node* n) {
  const auto& d = n->out().dims();
  if (!d.empty()) return d.back();
  throw std::logic_error("node '" + n->name() + "' has no static channel count yet");
}

}  // namespace

// Static channel propagation: every node keeps a placeholder (0,0,0,C) shape
// until bind() fills in the geometry, so downstream layers can size their
// weights at construction time.
static void set_static_channels(Tensor& t, int c) { t.resize({0, 0, 0, c}); }

// ---------------------------------------------------------------------------
// InputNode

void InputNode::bind(Network& net) {
  out_.resize({net.bound_batch(), net.bound_height(), net.bound_width(), channels_});
}

// ---------------------------------------------------------------------------
// Conv2dNode

Conv2dNode::Conv2dNode(Network& net, const std::string& name, Node* x, int out_channels,
                       int kernel, int stride, bool with_bias)
    : Node(name, {x}), cout_(out_channels), kernel_(kernel), stride_(stride),
      with_bias_(with_bias) {
  if (out_channels < 1 || kernel < 1 || stride < 1) {
    throw std::invalid_argument("conv2d '" + name + "': bad geometry");
  }
  cin_ = static_channels_of(x);
  const int64_t fan_in = static_cast<int64_t>(kernel) * kernel * cin_;
  w_ = net.add_param(name + ".w", {kernel, kernel, cin_, cout_}, true, InitKind::he_normal,
                     fan_in);
  if (with_bias_) {
    b_ = net.add_param(name + ".b", {cout_}, true, InitKind::zeros, fan_in);
  }
  params_ = {w_};
  if (b_) params_.push_back(b_);
  set_static_channels(out_, cout_);
}

void Conv2dNode::bind(Network& net) {
  const auto& d = in_[0]->out().dims();
  const int n = d[0], h = d[1], w = d[2];
  if (d[3] != cin_) throw std::logic_error("conv2d '" + name_ + "': channel mismatch");
  pad_ = same_pad(h, w, kernel_, stride_);
  oh_ = same_out_dim(h, stride_);
  ow_ = same_out_dim(w, stride_);
  out_.resize({n, oh_, ow_, cout_});
  if (!(kernel_ == 1 && stride_ == 1)) {
    const int64_t cols = static_cast<int64_t>(kernel_) * kernel_ * cin_;
    const int64_t rows = static_cast<int64_t>(n) * oh_ * ow_;
    net.request_scratch(rows * cols, rows * cols);
  }
}

void Conv2dNode::im2col(const float* x, float* cols) const {
  const auto& d = in_[0]->out().dims();
  const int n = d[0], ih = d[1], iw = d[2];
  const int K = kernel_, C = cin_;
  const int64_t row_len = static_cast<int64_t>(K) * K * C;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh_; ++oy) {
      float* dst = cols + ((static_cast<int64_t>(b) * oh_ + oy) * ow_) * row_len;
      for (int ox = 0; ox < ow_; ++ox) {
        for (int kh = 0; kh < K; ++kh) {
          const int iy = oy * stride_ + kh - pad_.top;
          const bool row_ok = iy >= 0 && iy < ih;
          const float* src_row =
              row_ok ? x + ((static_cast<int64_t>(b) * ih + iy) * iw) * C : nullptr;
          for (int kw = 0; kw < K; ++kw) {
            const int ix = ox * stride_ + kw - pad_.left;
            if (row_ok && ix >= 0 && ix < iw) {
              std::memcpy(dst, src_row + static_cast<int64_t>(ix) * C, sizeof(float) * C);
            } else {
              std::memset(dst, 0, sizeof(float) * C);
            }
            dst += C;
          }
        }
      }
    }
  }
}

void Conv2dNode::col2im_add(const float* cols, float* gx) const {
  const auto& d = in_[0]->out().dims();
  const int n = d[0], ih = d[1], iw = d[2];
  const int K = kernel_, C = cin_;
  const int64_t row_len = static_cast<int64_t>(K) * K * C;
  // Windows overlap inside one image, so parallelism stays at batch level.
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh_; ++oy) {
      const float* src = cols + ((static_cast<int64_t>(b) * oh_ + oy) * ow_) * row_len;
      for (int ox = 0; ox < ow_; ++ox) {
        for (int kh = 0; kh < K; ++kh) {
          const int iy = oy * stride_ + kh - pad_.top;
          const bool row_ok = iy >= 0 && iy < ih;
          float* dst_row =
              row_ok ? gx + ((static_cast<int64_t>(b) * ih + iy) * iw) * C : nullptr;
          for (int kw = 0; kw < K; ++kw) {
            const int ix = ox * stride_ + kw - pad_.left;
            if (row_ok && ix >= 0 && ix < iw) {
              float* dst = dst_row + static_cast<int64_t>(ix) * C;
              for (int c = 0; c < C; ++c) dst[c] += src[c];
            }
            src += C;
          }
        }
      }
    }
  }
}

void Conv2dNode::forward(Network& net, bool) {
  const Tensor& x = in_[0]->out();
  const int64_t rows = static_cast<int64_t>(x.dim(0)) * oh_ * ow_;
  MapMat O(out_.data(), rows, cout_);
  if (kernel_ == 1 && stride_ == 1) {
    CMapMat X(x.data(), rows, cin_);
    CMapMat W(w_->value.data(), cin_, cout_);
    O.noalias() = X * W;
  } else {
    const int64_t row_len = static_cast<int64_t>(kernel_) * kernel_ * cin_;
    im2col(x.data(), net.scratch_a());
    CMapMat P(net.scratch_a(), rows, row_len);
    CMapMat W(w_->value.data(), row_len, cout_);
    O.noalias() = P * W;
  }
  if (with_bias_) {
    O.rowwise() += CMapRowVec(b_->value.data(), cout_);
  }
}

void Conv2dNode::backward(Network& net) {
  const Tensor& x = in_[0]->out();
  Tensor& gx = in_[0]->grad();
  const int64_t rows = static_cast<int64_t>(x.dim(0)) * oh_ * ow_;
  CMapMat G(grad_.data(), rows, cout_);

  w_->ensure_grad();
  if (with_bias_) {
    b_->ensure_grad();
    MapRowVec db(b_->grad.data(), cout_);
    db += G.colwise().sum();
  }

  if (kernel_ == 1 && stride_ == 1) {
    CMapMat X(x.data(), rows, cin_);
    CMapMat W(w_->value.data(), cin_, cout_);
    MapMat dW(w_->grad.data(), cin_, cout_);
    dW.noalias() += X.transpose() * G;
    MapMat GX(gx.data(), rows, cin_);
    GX.noalias() += G * W.transpose();
  } else {
    const int64_t row_len = static_cast<int64_t>(kernel_) * kernel_ * cin_;
    im2col(x.data(), net.scratch_a());
    CMapMat P(net.scratch_a(), rows, row_len);
    CMapMat W(w_->value.data(), row_len, cout_);
    MapMat dW(w_->grad.data(), row_len, cout_);
    dW.noalias() += P.transpose() * G;
    MapMat T(net.scratch_b(), rows, row_len);
    T.noalias() = G * W.transpose();
    col2im_add(net.scratch_b(), gx.data());
  }
}

// ---------------------------------------------------------------------------
// DepthwiseConv2dNode

DepthwiseConv2dNode::DepthwiseConv2dNode(Network& net, const std::string& name, Node* x,
                                         int kernel)
    : Node(name, {x}), kernel_(kernel) {
  if (kernel < 1) throw std::invalid_argument("depthwise_conv2d '" + name + "': bad kernel");
  c_ = static_channels_of(x);
  const int64_t fan_in = static_cast<int64_t>(kernel) * kernel;
  w_ = net.add_param(name + ".w", {kernel, kernel, c_}, true, InitKind::he_normal, fan_in);
  params_ = {w_};
  set_static_channels(out_, c_);
}

void DepthwiseConv2dNode::bind(Network&) {
  const auto& d = in_[0]->out().dims();
  if (d[3] != c_) throw std::logic_error("depthwise_conv2d '" + name_ + "': channel mismatch");
  pad_ = same_pad(d[1], d[2], kernel_, 1);
  out_.resize(d);
}

void DepthwiseConv2dNode::forward(Network&, bool) {
  const Tensor& x = in_[0]->out();
  const int n = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  const int K = kernel_, C = c_;
  const float* xd = x.data();
  const float* wd = w_->value.data();
  float* od = out_.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < ih; ++oy) {
      float* orow = od + ((static_cast<int64_t>(b) * ih + oy) * iw) * C;
      std::memset(orow, 0, sizeof(float) * static_cast<size_t>(iw) * C);
      for (int kh = 0; kh < K; ++kh) {
        const int iy = oy + kh - pad_.top;
        if (iy < 0 || iy >= ih) continue;
        const float* xrow = xd + ((static_cast<int64_t>(b) * ih + iy) * iw) * C;
        for (int kw = 0; kw < K; ++kw) {
          const float* wk = wd + (static_cast<int64_t>(kh) * K + kw) * C;
          const int ox_lo = std::max(0, pad_.left - kw);
          const int ox_hi = std::min(iw, iw + pad_.left - kw);
          for (int ox = ox_lo; ox < ox_hi; ++ox) {
            const float* xr = xrow + static_cast<int64_t>(ox - pad_.left + kw) * C;
            float* o = orow + static_cast<int64_t>(ox) * C;
#pragma omp simd
            for (int c = 0; c < C; ++c) o[c] += xr[c] * wk[c];
          }
        }
      }
    }
  }
}

void DepthwiseConv2dNode::backward(Network&) {
  const Tensor& x = in_[0]->out();
  Tensor& gx = in_[0]->grad();
  const int n = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  const int K = kernel_, C = c_;
  const float* xd = x.data();
  const float* gd = grad_.data();
  const float* wd = w_->value.data();
  float* gxd = gx.data();
  w_->ensure_grad();
  float* gwd = w_->grad.data();

#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < ih; ++oy) {
      const float* grow = gd + ((static_cast<int64_t>(b) * ih + oy) * iw) * C;
      for (int kh = 0; kh < K; ++kh) {
        const int iy = oy + kh - pad_.top;
        if (iy < 0 || iy >= ih) continue;
        float* gxrow = gxd + ((static_cast<int64_t>(b) * ih + iy) * iw) * C;
        for (int kw = 0; kw < K; ++kw) {
          const float* wk = wd + (static_cast<int64_t>(kh) * K + kw) * C;
          const int ox_lo = std::max(0, pad_.left - kw);
          const int ox_hi = std::min(iw, iw + pad_.left - kw);
          for (int ox = ox_lo; ox < ox_hi; ++ox) {
            float* gxr = gxrow + static_cast<int64_t>(ox - pad_.left + kw) * C;
            const float* g = grow + static_cast<int64_t>(ox) * C;
#pragma omp simd
            for (int c = 0; c < C; ++c) gxr[c] += g[c] * wk[c];
          }
        }
      }
    }
  }

  // Weight gradient kept serial: every (b, oy) touches the same K*K*C slots.
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < ih; ++oy) {
      const float* grow = gd + ((static_cast<int64_t>(b) * ih + oy) * iw) * C;
      for (int kh = 0; kh < K; ++kh) {
        const int iy = oy + kh - pad_.top;
        if (iy < 0 || iy >= ih) continue;
        const float* xrow = xd + ((static_cast<int64_t>(b) * ih + iy) * iw) * C;
        for (int kw = 0; kw < K; ++kw) {
          float* gw = gwd + (static_cast<int64_t>(kh) * K + kw) * C;
          const int ox_lo = std::max(0, pad_.left - kw);
          const int ox_hi = std::min(iw, iw + pad_.left - kw);
          for (int ox = ox_lo; ox < ox_hi; ++ox) {
            const float* xr = xrow + static_cast<int64_t>(ox - pad_.left + kw) * C;
            const float* g = grow + static_cast<int64_t>(ox) * C;
#pragma omp simd
            for (int c = 0; c < C; ++c) gw[c] += xr[c] * g[c];
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ConvTranspose2dNode

ConvTranspose2dNode::ConvTranspose2dNode(Network& net, const std::string& name, Node* x,
                                         int out_channels, int kernel, int stride)
    : Node(name, {x}), cout_(out_channels), kernel_(kernel), stride_(stride), pad_(0) {
  if (out_channels < 1 || kernel < 1 || stride < 1 || kernel < stride ||
      (kernel - stride) % 2 != 0) {
    throw std::invalid_argument("conv_transpose2d '" + name +
                                "': kernel must be >= stride with even difference");
  }
  pad_ = (kernel - stride) / 2;  // output dims = stride * input dims
  cin_ = static_channels_of(x);
  const int64_t fan_in = static_cast<int64_t>(kernel) * kernel * cin_;
  w_ = net.add_param(name + ".w", {kernel, kernel, cin_, cout_}, true, InitKind::he_normal,
                     fan_in);
  params_ = {w_};
  set_static_channels(out_, cout_);
}

void ConvTranspose2dNode::bind(Network& net) {
  const auto& d = in_[0]->out().dims();
  if (d[3] != cin_) throw std::logic_error("conv_transpose2d '" + name_ + "': channel mismatch");
  ih_ = d[1];
  iw_ = d[2];
  out_.resize({d[0], ih_ * stride_, iw_ * stride_, cout_});
  const int64_t rows = static_cast<int64_t>(d[0]) * ih_ * iw_;
  net.request_scratch(rows * std::max(cin_, cout_), 0);
}

void ConvTranspose2dNode::forward(Network& net, bool) {
  const Tensor& x = in_[0]->out();
  const int n = x.dim(0);
  const int oh = out_.dim(1), ow = out_.dim(2);
  const int64_t rows = static_cast<int64_t>(n) * ih_ * iw_;
  out_.zero();
  CMapMat X(x.data(), rows, cin_);
  float* tmp = net.scratch_a();
  for (int kh = 0; kh < kernel_; ++kh) {
    for (int kw = 0; kw < kernel_; ++kw) {
      CMapMat Wk(w_->value.data() + (static_cast<int64_t>(kh) * kernel_ + kw) * cin_ * cout_,
                 cin_, cout_);
      MapMat T(tmp, rows, cout_);
      T.noalias() = X * Wk;
#pragma omp parallel for collapse(2) schedule(static)
      for (int b = 0; b < n; ++b) {
        for (int iy = 0; iy < ih_; ++iy) {
          const int oy = iy * stride_ + kh - pad_;
          if (oy < 0 || oy >= oh) continue;
          const float* src = tmp + ((static_cast<int64_t>(b) * ih_ + iy) * iw_) * cout_;
          float* dst_row = out_.data() + ((static_cast<int64_t>(b) * oh + oy) * ow) * cout_;
          for (int ix = 0; ix < iw_; ++ix) {
            const int ox = ix * stride_ + kw - pad_;
            if (ox < 0 || ox >= ow) continue;
            float* dst = dst_row + static_cast<int64_t>(ox) * cout_;
            const float* s = src + static_cast<int64_t>(ix) * cout_;
            for (int c = 0; c < cout_; ++c) dst[c] += s[c];
          }
        }
      }
    }
  }
}

void ConvTranspose2dNode::backward(Network& net) {
  const Tensor& x = in_[0]->out();
  Tensor& gx = in_[0]->grad();
  const int n = x.dim(0);
  const int oh = out_.dim(1), ow = out_.dim(2);
  const int64_t rows = static_cast<int64_t>(n) * ih_ * iw_;
  CMapMat X(x.data(), rows, cin_);
  MapMat GX(gx.data(), rows, cin_);
  w_->ensure_grad();
  float* tmp = net.scratch_a();

  for (int kh = 0; kh < kernel_; ++kh) {
    for (int kw = 0; kw < kernel_; ++kw) {
      // Gather the output-gradient rows this kernel offset contributed to.
      MapMat Tg(tmp, rows, cout_);
#pragma omp parallel for collapse(2) schedule(static)
      for (int b = 0; b < n; ++b) {
        for (int iy = 0; iy < ih_; ++iy) {
          float* dst = tmp + ((static_cast<int64_t>(b) * ih_ + iy) * iw_) * cout_;
          const int oy = iy * stride_ + kh - pad_;
          const bool row_ok = oy >= 0 && oy < oh;
          const float* grow =
              row_ok ? grad_.data() + ((static_cast<int64_t>(b) * oh + oy) * ow) * cout_
                     : nullptr;
          for (int ix = 0; ix < iw_; ++ix) {
            const int ox = ix * stride_ + kw - pad_;
            if (row_ok && ox >= 0 && ox < ow) {
              std::memcpy(dst, grow + static_cast<int64_t>(ox) * cout_,
                          sizeof(float) * cout_);
            } else {
              std::memset(dst, 0, sizeof(float) * cout_);
            }
            dst += cout_;
          }
        }
      }
      const int64_t off = (static_cast<int64_t>(kh) * kernel_ + kw) * cin_ * cout_;
      CMapMat Wk(w_->value.data() + off, cin_, cout_);
      MapMat dWk(w_->grad.data() + off, cin_, cout_);
      dWk.noalias() += X.transpose() * Tg;
      GX.noalias() += Tg * Wk.transpose();
    }
  }
}

// ---------------------------------------------------------------------------
// BatchNormNode

BatchNormNode::BatchNormNode(Network& net, const std::string& name, Node* x) : Node(name, {x}) {
  c_ = static_channels_of(x);
  gamma_ = net.add_param(name + ".gamma", {c_}, true, InitKind::ones, 0);
  beta_ = net.add_param(name + ".beta", {c_}, true, InitKind::zeros, 0);
  run_mean_ = net.add_param(name + ".running_mean", {c_}, false, InitKind::zeros, 0);
  run_var_ = net.add_param(name + ".running_var", {c_}, false, InitKind::ones, 0);
  params_ = {gamma_, beta_, run_mean_, run_var_};
  set_static_channels(out_, c_);
}

void BatchNormNode::bind(Network&) {
  out_.resize(in_[0]->out().dims());
  saved_mean_.assign(c_, 0.0);
  saved_invstd_.assign(c_, 0.0);
}

void BatchNormNode::forward(Network&, bool train) {
  const Tensor& x = in_[0]->out();
  const int64_t m = x.numel() / c_;
  const float* xd = x.data();
  float* od = out_.data();
  last_forward_train_ = train;

  if (train) {
    std::vector<double> sum(c_, 0.0), sumsq(c_, 0.0);
    for (int64_t i = 0; i < m; ++i) {
      const float* row = xd + i * c_;
      for (int c = 0; c < c_; ++c) {
        const double v = row[c];
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
    for (int c = 0; c < c_; ++c) {
      const double mean = sum[c] / static_cast<double>(m);
      double var = sumsq[c] / static_cast<double>(m) - mean * mean;
      if (var < 0.0) var = 0.0;
      saved_mean_[c] = mean;
      saved_invstd_[c] = 1.0 / std::sqrt(var + kEps);
      run_mean_->value[c] = static_cast<float>((1.0 - kMomentum) * run_mean_->value[c] +
                                               kMomentum * mean);
      run_var_->value[c] = static_cast<float>((1.0 - kMomentum) * run_var_->value[c] +
                                              kMomentum * var);
    }
  } else {
    for (int c = 0; c < c_; ++c) {
      saved_mean_[c] = run_mean_->value[c];
      saved_invstd_[c] = 1.0 / std::sqrt(static_cast<double>(run_var_->value[c]) + kEps);
    }
  }

  std::vector<float> scale(c_), shift(c_);
  for (int c = 0; c < c_; ++c) {
    scale[c] = static_cast<float>(gamma_->value[c] * saved_invstd_[c]);
    shift[c] = static_cast<float>(beta_->value[c] - saved_mean_[c] * scale[c]);
  }
  const float* sc = scale.data();
  const float* sh = shift.data();
  const int C = c_;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const float* row = xd + i * C;
    float* orow = od + i * C;
#pragma omp simd
    for (int c = 0; c < C; ++c) orow[c] = row[c] * sc[c] + sh[c];
  }
}

void BatchNormNode::backward(Network&) {
  const Tensor& x = in_[0]->out();
  Tensor& gx = in_[0]->grad();
  const int64_t m = x.numel() / c_;
  const float* xd = x.data();
  const float* gd = grad_.data();
  float* gxd = gx.data();
  gamma_->ensure_grad();
  beta_->ensure_grad();

  std::vector<double> dg(c_, 0.0), db(c_, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const float* xrow = xd + i * c_;
    const float* grow = gd + i * c_;
    for (int c = 0; c < c_; ++c) {
      const double xh = (xrow[c] - saved_mean_[c]) * saved_invstd_[c];
      dg[c] += grow[c] * xh;
      db[c] += grow[c];
    }
  }
  for (int c = 0; c < c_; ++c) {
    gamma_->grad[c] += static_cast<float>(dg[c]);
    beta_->grad[c] += static_cast<float>(db[c]);
  }

  const int C = c_;
  if (last_forward_train_) {
    std::vector<double> k1(c_), k2(c_), k3(c_);
    for (int c = 0; c < c_; ++c) {
      const double a = gamma_->value[c] * saved_invstd_[c];
      k1[c] = a;
      k2[c] = a * dg[c] / static_cast<double>(m);
      k3[c] = a * db[c] / static_cast<double>(m);
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      const float* xrow = xd + i * C;
      const float* grow = gd + i * C;
      float* gxrow = gxd + i * C;
      for (int c = 0; c < C; ++c) {
        const double xh = (xrow[c] - saved_mean_[c]) * saved_invstd_[c];
        gxrow[c] += static_cast<float>(k1[c] * grow[c] - xh * k2[c] - k3[c]);
      }
    }
  } else {
    std::vector<float> a(c_);
    for (int c = 0; c < c_; ++c)
      a[c] = static_cast<float>(gamma_->value[c] * saved_invstd_[c]);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      const float* grow = gd + i * C;
      float* gxrow = gxd + i * C;
#pragma omp simd
      for (int c = 0; c < C; ++c) gxrow[c] += grow[c] * a[c];
    }
  }
}

// ---------------------------------------------------------------------------
// ReluNode / SigmoidNode

void ReluNode::bind(Network&) { out_.resize(in_[0]->out().dims()); }

void ReluNode::forward(Network&, bool) {
  const Tensor& x = in_[0]->out();
  const float* xd = x.data();
  float* od = out_.data();
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) od[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
}

void ReluNode::backward(Network&) {
  Tensor& gx = in_[0]->grad();
  const float* od = out_.data();
  const float* gd = grad_.data();
  float* gxd = gx.data();
  const int64_t n = out_.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) gxd[i] += od[i] > 0.0f ? gd[i] : 0.0f;
}

void SigmoidNode::bind(Network&) { out_.resize(in_[0]->out().dims()); }

void SigmoidNode::forward(Network&, bool) {
  const Tensor& x = in_[0]->out();
  const float* xd = x.data();
  float* od = out_.data();
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) od[i] = 1.0f / (1.0f + std::exp(-xd[i]));
}

void SigmoidNode::backward(Network&) {
  Tensor& gx = in_[0]->grad();
  const float* od = out_.data();
  const float* gd = grad_.data();
  float* gxd = gx.data();
  const int64_t n = out_.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) gxd[i] += gd[i] * od[i] * (1.0f - od[i]);
}

// ---------------------------------------------------------------------------
// MaxPoolNode

void MaxPoolNode::bind(Network&) {
  const auto& d = in_[0]->out().dims();
  c_ = d[3];
  pad_ = same_pad(d[1], d[2], kernel_, stride_);
  oh_ = same_out_dim(d[1], stride_);
  ow_ = same_out_dim(d[2], stride_);
  out_.resize({d[0], oh_, ow_, c_});
  argmax_.assign(static_cast<size_t>(out_.numel()), -1);
}

void MaxPoolNode::forward(Network&, bool) {
  const Tensor& x = in_[0]->out();
  const int n = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  const float* xd = x.data();
  float* od = out_.data();
  int64_t* am = argmax_.data();
  const int C = c_;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh_; ++oy) {
      const int64_t orow = ((static_cast<int64_t>(b) * oh_ + oy) * ow_) * C;
      for (int ox = 0; ox < ow_; ++ox) {
        for (int c = 0; c < C; ++c) {
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_i = -1;
          for (int kh = 0; kh < kernel_; ++kh) {
            const int iy = oy * stride_ + kh - pad_.top;
            if (iy < 0 || iy >= ih) continue;
            for (int kw = 0; kw < kernel_; ++kw) {
              const int ix = ox * stride_ + kw - pad_.left;
              if (ix < 0 || ix >= iw) continue;
              const int64_t idx = ((static_cast<int64_t>(b) * ih + iy) * iw + ix) * C + c;
              if (xd[idx] > best) {
                best = xd[idx];
                best_i = idx;
              }
            }
          }
          const int64_t o = orow + static_cast<int64_t>(ox) * C + c;
          od[o] = best;
          am[o] = best_i;
        }
      }
    }
  }
}

void MaxPoolNode::backward(Network&) {
  Tensor& gx = in_[0]->grad();
  float* gxd = gx.data();
  const float* gd = grad_.data();
  const int64_t n = out_.numel();
  for (int64_t i = 0; i < n; ++i) {
    if (argmax_[i] >= 0) gxd[argmax_[i]] += gd[i];
  }
}

// ---------------------------------------------------------------------------
// AvgPoolNode

void AvgPoolNode::bind(Network&) {
  const auto& d = in_[0]->out().dims();
  if (kernel_ != stride_ || d[1] % stride_ != 0 || d[2] % stride_ != 0) {
    throw std::logic_error("avg_pool '" + name_ + "': requires exact non-overlapping tiling");
  }
  c_ = d[3];
  oh_ = d[1] / stride_;
  ow_ = d[2] / stride_;
  out_.resize({d[0], oh_, ow_, c_});
}

void AvgPoolNode::forward(Network&, bool) {
  const Tensor& x = in_[0]->out();
  const int n = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  const float inv = 1.0f / static_cast<float>(kernel_ * kernel_);
  const float* xd = x.data();
  float* od = out_.data();
  const int C = c_;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh_; ++oy) {
      float* orow = od + ((static_cast<int64_t>(b) * oh_ + oy) * ow_) * C;
      std::memset(orow, 0, sizeof(float) * static_cast<size_t>(ow_) * C);
      for (int kh = 0; kh < kernel_; ++kh) {
        const int iy = oy * stride_ + kh;
        const float* xrow = xd + ((static_cast<int64_t>(b) * ih + iy) * iw) * C;
        for (int ox = 0; ox < ow_; ++ox) {
          float* o = orow + static_cast<int64_t>(ox) * C;
          for (int kw = 0; kw < kernel_; ++kw) {
            const float* xr = xrow + (static_cast<int64_t>(ox) * stride_ + kw) * C;
#pragma omp simd
            for (int c = 0; c < C; ++c) o[c] += xr[c] * inv;
          }
        }
      }
    }
  }
}

void AvgPoolNode::backward(Network&) {
  Tensor& gx = in_[0]->grad();
  const Tensor& x = in_[0]->out();
  const int n = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  const float inv = 1.0f / static_cast<float>(kernel_ * kernel_);
  const float* gd = grad_.data();
  float* gxd = gx.data();
  const int C = c_;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh_; ++oy) {
      const float* grow = gd + ((static_cast<int64_t>(b) * oh_ + oy) * ow_) * C;
      for (int kh = 0; kh < kernel_; ++kh) {
        const int iy = oy * stride_ + kh;
        float* gxrow = gxd + ((static_cast<int64_t>(b) * ih + iy) * iw) * C;
        for (int ox = 0; ox < ow_; ++ox) {
          const float* g = grow + static_cast<int64_t>(ox) * C;
          for (int kw = 0; kw < kernel_; ++kw) {
            float* gxr = gxrow + (static_cast<int64_t>(ox) * stride_ + kw) * C;
#pragma omp simd
            for (int c = 0; c < C; ++c) gxr[c] += g[c] * inv;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ConcatNode

void ConcatNode::bind(Network&) {
  const auto& d0 = in_[0]->out().dims();
  int c = 0;
  for (const Node* n : in_) {
    const auto& d = n->out().dims();
    if (d[0] != d0[0] || d[1] != d0[1] || d[2] != d0[2]) {
      throw std::logic_error("concat '" + name_ + "': spatial dims differ (" +
                             in_[0]->name() + " vs " + n->name() + ")");
    }
    c += d[3];
  }
  out_.resize({d0[0], d0[1], d0[2], c});
}

void ConcatNode::forward(Network&, bool) {
  const int64_t pixels = out_.numel() / out_.dim(3);
  const int ctot = out_.dim(3);
  float* od = out_.data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < pixels; ++p) {
    float* dst = od + p * ctot;
    for (const Node* n : in_) {
      const int ci = n->out().dim(3);
      std::memcpy(dst, n->out().data() + p * ci, sizeof(float) * ci);
      dst += ci;
    }
  }
}

void ConcatNode::backward(Network&) {
  const int64_t pixels = out_.numel() / out_.dim(3);
  const int ctot = out_.dim(3);
  const float* gd = grad_.data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < pixels; ++p) {
    const float* src = gd + p * ctot;
    for (Node* n : in_) {
      const int ci = n->out().dim(3);
      float* dst = n->grad().data() + p * ci;
#pragma omp simd
      for (int c = 0; c < ci; ++c) dst[c] += src[c];
      src += ci;
    }
  }
}


// ---------------------------------------------------------------------------
// AddNode

void AddNode::bind(Network&) {
  const auto& d0 = in_[0]->out().dims();
  for (const Node* n : in_) {
    if (n->out().dims() != d0) {
      throw std::logic_error("add '" + name_ + "': input shapes differ");
    }
  }
  out_.resize(d0);
}

void AddNode::forward(Network&, bool) {
  const int64_t n = out_.numel();
  float* od = out_.data();
  std::memcpy(od, in_[0]->out().data(), sizeof(float) * static_cast<size_t>(n));
  for (size_t k = 1; k < in_.size(); ++k) {
    const float* xd = in_[k]->out().data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) od[i] += xd[i];
  }
}

void AddNode::backward(Network&) {
  const int64_t n = out_.numel();
  const float* gd = grad_.data();
  for (Node* src : in_) {
    float* gxd = src->grad().data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) gxd[i] += gd[i];
  }
}

}  // namespace dsnet
