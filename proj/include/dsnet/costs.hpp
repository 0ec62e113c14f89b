#pragma once

#include <cstdint>
#include <stdexcept>

namespace dsnet {

// Weight-cost query for a single convolution layer: n_filters filters over an
// input of input_depth channels with a square kernel_size x kernel_size kernel.
struct LayerCostQuery {
  int64_t n_filters = 0;
  int64_t input_depth = 0;
  int64_t kernel_size = 0;

  void validate() const {
    if (n_filters < 1 || input_depth < 1 || kernel_size < 1) {
      throw std::invalid_argument("LayerCostQuery: all fields must be >= 1");
    }
  }
};

// Weights of a standard convolution, biases excluded: N_F * M_D * K^2.
inline int64_t params_standard_conv(const LayerCostQuery& q) {
  q.validate();
  return q.n_filters * q.input_depth * q.kernel_size * q.kernel_size;
}

// Weights of a depth-wise separable convolution (depth-wise spatial pass plus
// 1x1 point-wise projection), biases excluded: M_D * (N_F + K^2).
inline int64_t params_depthwise_separable(const LayerCostQuery& q) {
  q.validate();
  return q.input_depth * (q.n_filters + q.kernel_size * q.kernel_size);
}

// Channel count entering layer n (1-based) of a dense block whose input has
// block_input_depth channels and whose layers each add growth_rate channels.
inline int64_t dense_layer_input_depth(int64_t layer_index, int64_t growth_rate,
                                       int64_t block_input_depth) {
  if (layer_index < 1 || growth_rate < 1 || block_input_depth < 1) {
    throw std::invalid_argument("dense_layer_input_depth: arguments must be >= 1");
  }
  return block_input_depth + (layer_index - 1) * growth_rate;
}

// Block output depth after all layers have been concatenated.
inline int64_t dense_block_output_depth(int64_t n_layers, int64_t growth_rate,
                                        int64_t block_input_depth) {
  if (n_layers < 1 || growth_rate < 1 || block_input_depth < 1) {
    throw std::invalid_argument("dense_block_output_depth: arguments must be >= 1");
  }
  return block_input_depth + n_layers * growth_rate;
}

}  // namespace dsnet
