#include "dsnet/graph.hpp"

#include <stdexcept>

#include "dsnet/layers.hpp"
#include "dsnet/rng.hpp"

namespace dsnet {

Node* Network::add_node(std::unique_ptr<Node> n) {
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

Node* Network::input(int channels) {
  if (input_) throw std::logic_error("Network: input already defined");
  if (channels < 1) throw std::invalid_argument("Network: input channels must be >= 1");
  in_channels_ = channels;
  input_ = add_node(std::make_unique<InputNode>(channels));
  return input_;
}

Node* Network::conv2d(const std::string& name, Node* x, int out_channels, int kernel,
                      int stride, bool with_bias) {
  return add_node(std::make_unique<Conv2dNode>(*this, name, x, out_channels, kernel, stride,
                                               with_bias));
}

Node* Network::depthwise_conv2d(const std::string& name, Node* x, int kernel) {
  return add_node(std::make_unique<DepthwiseConv2dNode>(*this, name, x, kernel));
}

Node* Network::conv_transpose2d(const std::string& name, Node* x, int out_channels,
                                int kernel, int stride) {
  return add_node(
      std::make_unique<ConvTranspose2dNode>(*this, name, x, out_channels, kernel, stride));
}

Node* Network::batch_norm(const std::string& name, Node* x) {
  return add_node(std::make_unique<BatchNormNode>(*this, name, x));
}

Node* Network::relu(const std::string& name, Node* x) {
  return add_node(std::make_unique<ReluNode>(name, x));
}

Node* Network::sigmoid(const std::string& name, Node* x) {
  return add_node(std::make_unique<SigmoidNode>(name, x));
}

Node* Network::max_pool(const std::string& name, Node* x, int kernel, int stride) {
  return add_node(std::make_unique<MaxPoolNode>(name, x, kernel, stride));
}

Node* Network::avg_pool(const std::string& name, Node* x, int kernel, int stride) {
  return add_node(std::make_unique<AvgPoolNode>(name, x, kernel, stride));
}

Node* Network::concat(const std::string& name, std::vector<Node*> xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  return add_node(std::make_unique<ConcatNode>(name, std::move(xs)));
}

Node* Network::add(const std::string& name, std::vector<Node*> xs) {
  if (xs.empty()) throw std::invalid_argument("add: no inputs");
  return add_node(std::make_unique<AddNode>(name, std::move(xs)));
}

Param* Network::add_param(const std::string& name, std::vector<int> dims, bool trainable,
                          InitKind init, int64_t fan_in) {
  if (param_index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  params_.emplace_back();
  Param& p = params_.back();
  p.name = name;
  p.value.resize(std::move(dims));
  p.trainable = trainable;
  p.init = init;
  p.fan_in = fan_in;
  param_index_[name] = &p;
  return &p;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Param* Network::find_param(const std::string& name) {
  auto it = param_index_.find(name);
  return it == param_index_.end() ? nullptr : it->second;
}

void Network::init_params(uint64_t seed) {
  for (auto& p : params_) {
    // Each tensor gets its own stream keyed by name, so initialization does
    // not depend on registration order.
    switch (p.init) {
      case InitKind::he_normal: {
        Rng rng(mix_seed(seed, hash_str(p.name)));
        init_he_normal(std::span<float>(p.value.data(), static_cast<size_t>(p.value.numel())),
                       p.fan_in, rng);
        break;
      }
      case InitKind::zeros:
        p.value.zero();
        break;
      case InitKind::ones:
        p.value.fill(1.0f);
        break;
    }
  }
}

void Network::zero_param_grads() {
  for (auto& p : params_) {
    if (!p.trainable) continue;
    p.ensure_grad();
    p.grad.zero();
  }
}

void Network::request_scratch(int64_t a_elems, int64_t b_elems) {
  scratch_a_need_ = std::max(scratch_a_need_, a_elems);
  scratch_b_need_ = std::max(scratch_b_need_, b_elems);
}

void Network::bind(int batch, int height, int width) {
  if (!input_) throw std::logic_error("Network: no input node");
  if (!output_) throw std::logic_error("Network: no output node");
  if (batch < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("Network::bind: geometry must be positive");
  }
  bn_ = batch;
  bh_ = height;
  bw_ = width;
  scratch_a_need_ = scratch_b_need_ = 0;
  bound_ = true;  // nodes read the geometry during bind
  for (auto& n : nodes_) n->bind(*this);
  scratch_a_.assign(static_cast<size_t>(scratch_a_need_), 0.0f);
  scratch_b_.assign(static_cast<size_t>(scratch_b_need_), 0.0f);
  grad_buffers_ready_ = false;
}

const Tensor& Network::forward(const Tensor& x, bool train) {
  if (!bound_) throw std::logic_error("Network::forward: bind() first");
  const std::vector<int> want = {bn_, bh_, bw_, in_channels_};
  if (x.dims() != want) {
    throw std::invalid_argument("Network::forward: input shape " + x.shape_str() +
                                " does not match bound shape " +
                                Tensor::zeros(want).shape_str());
  }
  input_->out() = x;
  for (auto& n : nodes_) n->forward(*this, train);
  forward_was_train_ = train;
  return output_->out();
}

void Network::backward(const Tensor& grad_out) {
  if (!bound_) throw std::logic_error("Network::backward: bind() first");
  if (!forward_was_train_) {
    throw std::logic_error("Network::backward: requires a prior forward(train=true)");
  }
  if (grad_out.dims() != output_->out().dims()) {
    throw std::invalid_argument("Network::backward: gradient shape mismatch");
  }
  if (!grad_buffers_ready_) {
    for (auto& n : nodes_) n->ensure_grad_buffer();
    grad_buffers_ready_ = true;
  }
  for (auto& n : nodes_) n->grad().zero();
  output_->grad() = grad_out;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward(*this);
}

}  // namespace dsnet
