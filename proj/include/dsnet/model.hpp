#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsnet/costs.hpp"
#include "dsnet/graph.hpp"
#include "dsnet/spec.hpp"

namespace dsnet {

enum class NetworkKind { dsnet, unet, fcn8s };

const char* network_kind_name(NetworkKind k);
NetworkKind network_kind_from_name(const std::string& s);

std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& json_text);

struct TapShape {
  int h = 0, w = 0, c = 0;
};

struct DenseLayerInfo {
  int block = 0;          // 1-based
  int layer = 0;          // 1-based within the block
  int input_channels = 0; // channels entering the layer's composite function
  const Node* concat_input = nullptr;
};

// A built network plus the spec it was built from and the structural
// bookkeeping used for verification and reporting.
struct Model {
  NetworkKind kind = NetworkKind::dsnet;
  NetworkSpec spec;
  Network net;
  std::map<std::string, TapShape> tap_shapes;  // at spec input size
  TapShape bottleneck;                          // encoder terminal map (dsnet)
  std::vector<DenseLayerInfo> dense_layers;     // dsnet only

  // Runs a batch (B, H, W, C) through the network, binding as needed. Spatial
  // dims must match the spec; throws before execution otherwise.
  const Tensor& forward(const Tensor& images, bool train = false);
};

// DSNet: dense-block encoder with stem conv/pool taps, depth-wise separable
// decoder with skip concatenations, sigmoid head. Decoder weights are
// initialized he-normal; encoder weights come from the optional archive
// (validated by name and shape) or he-normal when absent.
Model build_dsnet(const NetworkSpec& spec, uint64_t seed = 0,
                  const std::optional<std::filesystem::path>& encoder_weights = {});

// Five-level U-Net baseline with the same input/output contract.
Model build_unet(const NetworkSpec& spec_overrides = {}, uint64_t seed = 0);

// VGG16-backbone FCN-8s baseline with fused stride-8/16/32 score maps.
Model build_fcn8s(const NetworkSpec& spec_overrides = {}, uint64_t seed = 0);

struct ParamCounts {
  int64_t total = 0;           // trainable scalars
  int64_t conv_weights = 0;    // formula-comparable convolution weights
  int64_t biases = 0;
  int64_t batch_norm = 0;      // gammas and betas
  int64_t non_trainable = 0;   // running statistics
};

ParamCounts count_parameters(const Network& net);
inline ParamCounts count_parameters(const Model& m) { return count_parameters(m.net); }

struct LayerSummaryRow {
  std::string name;
  std::string type;
  std::vector<int> out_shape;  // empty when the network is unbound
  int64_t params = 0;
};

struct UpsampleSummaryRow {
  std::string name;
  int kernel = 0;
  int stride = 0;
  bool kernel_divisible_by_stride = false;
  bool overlapping = false;  // kernel wider than stride: checkerboard-prone
};

struct ModelSummary {
  std::string network;
  std::vector<LayerSummaryRow> layers;
  std::vector<UpsampleSummaryRow> upsampling;
  bool checkerboard_prone = false;
  ParamCounts counts;
};

ModelSummary summarize(const Model& m);
std::string summary_text(const ModelSummary& s);
std::string summary_json(const ModelSummary& s);  // machine-readable form

}  // namespace dsnet
