#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dsnet {

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class DecoderConvKind { standard, depthwise_separable };

// Declarative description of the segmentation network. The defaults give the
// DSNet configuration: a DenseNet-121 style encoder and five decoder stages
// built from depth-wise separable convolutions.
struct NetworkSpec {
  int input_height = 192;
  int input_width = 256;
  int input_channels = 3;
  int growth_rate = 32;
  std::vector<int> block_layout = {6, 12, 24, 16};
  double compression = 0.5;
  std::vector<int> decoder_widths = {512, 256, 128, 64, 32};
  std::vector<std::string> tap_names = {"conv1", "pool1", "pool2", "pool3"};
  DecoderConvKind decoder_conv_kind = DecoderConvKind::depthwise_separable;

  int stem_channels() const { return 2 * growth_rate; }
  int tap_levels() const { return static_cast<int>(tap_names.size()); }
  // Every tap level halves the grid once, plus the final stage back to full
  // resolution: dims must divide 2^(taps + 1).
  int required_divisor() const { return 1 << (tap_levels() + 1); }

  void validate() const {
    if (input_channels < 1) throw SpecError("spec: input_channels must be >= 1");
    if (growth_rate < 1) throw SpecError("spec: growth_rate must be >= 1");
    if (block_layout.empty()) throw SpecError("spec: block_layout must not be empty");
    for (int l : block_layout) {
      if (l < 1) throw SpecError("spec: every block_layout entry must be >= 1");
    }
    if (!(compression > 0.0 && compression <= 1.0)) {
      throw SpecError("spec: compression must be in (0, 1]");
    }
    const int div = required_divisor();
    if (input_height < div || input_width < div || input_height % div != 0 ||
        input_width % div != 0) {
      throw SpecError("spec: input dims " + std::to_string(input_height) + "x" +
                      std::to_string(input_width) + " must be positive multiples of " +
                      std::to_string(div));
    }
    if (decoder_widths.size() != tap_names.size() + 1) {
      throw SpecError("spec: decoder stage count must equal tap count + 1");
    }
    for (int w : decoder_widths) {
      if (w < 1) throw SpecError("spec: decoder widths must be >= 1");
    }
  }
};

}  // namespace dsnet
