#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsnet/tensor.hpp"

namespace dsnet {

class Network;

enum class InitKind { he_normal, zeros, ones };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;  // allocated on first training pass
  bool trainable = true;
  InitKind init = InitKind::he_normal;
  int64_t fan_in = 0;  // input units feeding one output unit, for he-normal

  void ensure_grad() {
    if (grad.dims() != value.dims()) grad.resize(value.dims());
  }
};

class Node {
 public:
  Node(std::string name, std::vector<Node*> inputs)
      : name_(std::move(name)), in_(std::move(inputs)) {}
  virtual ~Node() = default;

  virtual const char* type() const = 0;
  // Derives the output shape from the inputs' shapes (already inferred) and
  // resizes buffers; called by Network::bind in topological order.
  virtual void bind(Network& net) = 0;
  virtual void forward(Network& net, bool train) = 0;
  virtual void backward(Network& net) = 0;

  const std::string& name() const { return name_; }
  const std::vector<Node*>& inputs() const { return in_; }
  const std::vector<Param*>& params() const { return params_; }

  const Tensor& out() const { return out_; }
  Tensor& out() { return out_; }
  Tensor& grad() { return grad_; }

  void ensure_grad_buffer() {
    if (grad_.dims() != out_.dims()) grad_.resize(out_.dims());
  }
  void drop_grad_buffer() { grad_ = Tensor(); }

  int64_t param_count(bool trainable_only = true) const {
    int64_t n = 0;
    for (const Param* p : params_)
      if (p->trainable || !trainable_only) n += p->value.numel();
    return n;
  }

 protected:
  std::string name_;
  std::vector<Node*> in_;
  std::vector<Param*> params_;
  Tensor out_;
  Tensor grad_;

  friend class Network;
};

// Feed-forward DAG over NHWC tensors. Nodes run in insertion order; backward
// runs in reverse with gradient accumulation at fan-out points. A Network is
// confined to one execution context at a time.
class Network {
 public:
  Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  // ---- construction ----
  Node* input(int channels);
  Node* conv2d(const std::string& name, Node* x, int out_channels, int kernel, int stride,
               bool with_bias);
  Node* depthwise_conv2d(const std::string& name, Node* x, int kernel);
  Node* conv_transpose2d(const std::string& name, Node* x, int out_channels, int kernel,
                         int stride);
  Node* batch_norm(const std::string& name, Node* x);
  Node* relu(const std::string& name, Node* x);
  Node* sigmoid(const std::string& name, Node* x);
  Node* max_pool(const std::string& name, Node* x, int kernel, int stride);
  Node* avg_pool(const std::string& name, Node* x, int kernel, int stride);
  Node* concat(const std::string& name, std::vector<Node*> xs);
  Node* add(const std::string& name, std::vector<Node*> xs);
  void set_output(Node* n) { output_ = n; }

  Node* input_node() const { return input_; }
  Node* output_node() const { return output_; }
  const std::vector<std::unique_ptr<Node>>& nodes() const { return nodes_; }

  // ---- parameters ----
  Param* add_param(const std::string& name, std::vector<int> dims, bool trainable,
                   InitKind init, int64_t fan_in);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  Param* find_param(const std::string& name);
  void init_params(uint64_t seed);
  void zero_param_grads();

  // ---- execution ----
  // Fixes the batch geometry: runs shape inference and allocates activation
  // and scratch buffers. Must be called before forward; rebinding with a new
  // geometry reallocates.
  void bind(int batch, int height, int width);
  bool bound() const { return bound_; }
  int bound_batch() const { return bn_; }
  int bound_height() const { return bh_; }
  int bound_width() const { return bw_; }
  int input_channels() const { return in_channels_; }

  const Tensor& forward(const Tensor& x, bool train = false);
  // Backpropagates d(loss)/d(output); requires a prior forward(train=true).
  void backward(const Tensor& grad_out);

  // ---- shared scratch ----
  void request_scratch(int64_t a_elems, int64_t b_elems);
  float* scratch_a() { return scratch_a_.data(); }
  float* scratch_b() { return scratch_b_.data(); }

 private:
  Node* add_node(std::unique_ptr<Node> n);

  std::vector<std::unique_ptr<Node>> nodes_;
  std::deque<Param> params_;
  std::unordered_map<std::string, Param*> param_index_;
  Node* input_ = nullptr;
  Node* output_ = nullptr;
  int in_channels_ = 0;
  int bn_ = 0, bh_ = 0, bw_ = 0;
  bool bound_ = false;
  bool grad_buffers_ready_ = false;
  bool forward_was_train_ = false;
  std::vector<float> scratch_a_, scratch_b_;
  int64_t scratch_a_need_ = 0, scratch_b_need_ = 0;

  friend class Node;
};

}  // namespace dsnet
