#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dsnet/graph.hpp"

namespace dsnet {

struct Pad {
  int top = 0, left = 0, bottom = 0, right = 0;
};

inline int same_out_dim(int in, int stride) { return (in + stride - 1) / stride; }

// SAME padding split: total = max((out-1)*stride + kernel - in, 0), with the
// extra pixel on the bottom/right when the total is odd.
inline Pad same_pad(int in_h, int in_w, int kernel, int stride) {
  const int oh = same_out_dim(in_h, stride);
  const int ow = same_out_dim(in_w, stride);
  const int ph = std::max((oh - 1) * stride + kernel - in_h, 0);
  const int pw = std::max((ow - 1) * stride + kernel - in_w, 0);
  return {ph / 2, pw / 2, ph - ph / 2, pw - pw / 2};
}

// Channel count known at construction time (spatial dims come at bind).
inline int node_channels(const Node* n) {
  const auto& d = n->out().dims();
  return d.empty() ? 0 : d.back();
}

class InputNode final : public Node {
 public:
  InputNode(int channels) : Node("input", {}), channels_(channels) {
    out().resize({0, 0, 0, channels});
  }
  const char* type() const override { return "input"; }
  void bind(Network& net) override;
  void forward(Network&, bool) override {}
  void backward(Network&) override {}
  int channels() const { return channels_; }

 private:
  int channels_;
};

// Standard convolution, SAME padding; weights (k, k, cin, cout).
class Conv2dNode final : public Node {
 public:
  Conv2dNode(Network& net, const std::string& name, Node* x, int out_channels, int kernel,
             int stride, bool with_bias);
  const char* type() const override { return "conv2d"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }

 private:
  void im2col(const float* x, float* cols) const;
  void col2im_add(const float* cols, float* gx) const;

  int cout_, kernel_, stride_;
  bool with_bias_;
  Param* w_ = nullptr;
  Param* b_ = nullptr;
  int cin_ = 0, oh_ = 0, ow_ = 0;
  Pad pad_;
};

// Per-channel spatial convolution, stride 1, SAME padding; weights (k, k, c).
class DepthwiseConv2dNode final : public Node {
 public:
  DepthwiseConv2dNode(Network& net, const std::string& name, Node* x, int kernel);
  const char* type() const override { return "depthwise_conv2d"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

  int kernel() const { return kernel_; }
  int channels() const { return c_; }

 private:
  int kernel_;
  Param* w_ = nullptr;
  int c_ = 0;
  Pad pad_;
};

// Learned upsampling; output spatial dims are exactly stride times the input
// dims (requires kernel >= stride and kernel - stride even). Weights
// (k, k, cin, cout).
class ConvTranspose2dNode final : public Node {
 public:
  ConvTranspose2dNode(Network& net, const std::string& name, Node* x, int out_channels,
                      int kernel, int stride);
  const char* type() const override { return "conv_transpose2d"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  bool kernel_divisible_by_stride() const { return kernel_ % stride_ == 0; }
  // Overlapping contributions (kernel wider than the step) are what produces
  // checkerboard artifacts in the upsampled maps.
  bool overlapping() const { return kernel_ > stride_; }

 private:
  int cout_, kernel_, stride_, pad_;
  Param* w_ = nullptr;
  int cin_ = 0, ih_ = 0, iw_ = 0;
};

class BatchNormNode final : public Node {
 public:
  BatchNormNode(Network& net, const std::string& name, Node* x);
  const char* type() const override { return "batch_norm"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  Param* gamma_ = nullptr;
  Param* beta_ = nullptr;
  Param* run_mean_ = nullptr;
  Param* run_var_ = nullptr;
  int c_ = 0;
  bool last_forward_train_ = false;
  std::vector<double> saved_mean_, saved_invstd_;
};

class ReluNode final : public Node {
 public:
  ReluNode(const std::string& name, Node* x) : Node(name, {x}) {
    out().resize({0, 0, 0, node_channels(x)});
  }
  const char* type() const override { return "relu"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;
};

class SigmoidNode final : public Node {
 public:
  SigmoidNode(const std::string& name, Node* x) : Node(name, {x}) {
    out().resize({0, 0, 0, node_channels(x)});
  }
  const char* type() const override { return "sigmoid"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;
};

class MaxPoolNode final : public Node {
 public:
  MaxPoolNode(const std::string& name, Node* x, int kernel, int stride)
      : Node(name, {x}), kernel_(kernel), stride_(stride) {
    out().resize({0, 0, 0, node_channels(x)});
  }
  const char* type() const override { return "max_pool"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

 private:
  int kernel_, stride_;
  Pad pad_;
  int c_ = 0, oh_ = 0, ow_ = 0;
  std::vector<int64_t> argmax_;
};

// Non-overlapping average pooling; input dims must divide exactly.
class AvgPoolNode final : public Node {
 public:
  AvgPoolNode(const std::string& name, Node* x, int kernel, int stride)
      : Node(name, {x}), kernel_(kernel), stride_(stride) {
    out().resize({0, 0, 0, node_channels(x)});
  }
  const char* type() const override { return "avg_pool"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;

 private:
  int kernel_, stride_;
  int c_ = 0, oh_ = 0, ow_ = 0;
};

class ConcatNode final : public Node {
 public:
  ConcatNode(const std::string& name, std::vector<Node*> xs) : Node(name, std::move(xs)) {
    int c = 0;
    for (const Node* n : inputs()) c += node_channels(n);
    out().resize({0, 0, 0, c});
  }
  const char* type() const override { return "concat"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;
};

// Elementwise sum of same-shaped inputs (score-map fusion).
class AddNode final : public Node {
 public:
  AddNode(const std::string& name, std::vector<Node*> xs) : Node(name, std::move(xs)) {
    out().resize({0, 0, 0, node_channels(inputs()[0])});
  }
  const char* type() const override { return "add"; }
  void bind(Network& net) override;
  void forward(Network& net, bool train) override;
  void backward(Network& net) override;
};

}  // namespace dsnet
