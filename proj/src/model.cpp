#include "dsnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dsnet/checkpoint.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

const char* network_kind_name(NetworkKind k) {
  switch (k) {
    case NetworkKind::dsnet:
      return "dsnet";
    case NetworkKind::unet:
      return "unet";
    case NetworkKind::fcn8s:
      return "fcn8s";
  }
  return "dsnet";
}

NetworkKind network_kind_from_name(const std::string& s) {
  if (s == "dsnet") return NetworkKind::dsnet;
  if (s == "unet") return NetworkKind::unet;
  if (s == "fcn8s") return NetworkKind::fcn8s;
  throw std::invalid_argument("unknown network: '" + s + "'");
}

std::string network_spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["input_height"] = spec.input_height;
  j["input_width"] = spec.input_width;
  j["input_channels"] = spec.input_channels;
  j["growth_rate"] = spec.growth_rate;
  j["block_layout"] = spec.block_layout;
  j["compression"] = spec.compression;
  j["decoder_widths"] = spec.decoder_widths;
  j["tap_names"] = spec.tap_names;
  j["decoder_conv_kind"] =
      spec.decoder_conv_kind == DecoderConvKind::standard ? "standard"
                                                          : "depthwise_separable";
  return j.dump();
}

NetworkSpec network_spec_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  NetworkSpec spec;
  spec.input_height = j.value("input_height", spec.input_height);
  spec.input_width = j.value("input_width", spec.input_width);
  spec.input_channels = j.value("input_channels", spec.input_channels);
  spec.growth_rate = j.value("growth_rate", spec.growth_rate);
  if (j.contains("block_layout")) spec.block_layout = j["block_layout"].get<std::vector<int>>();
  spec.compression = j.value("compression", spec.compression);
  if (j.contains("decoder_widths")) {
    spec.decoder_widths = j["decoder_widths"].get<std::vector<int>>();
  }
  if (j.contains("tap_names")) {
    spec.tap_names = j["tap_names"].get<std::vector<std::string>>();
  }
  if (j.value("decoder_conv_kind", "depthwise_separable") == std::string("standard")) {
    spec.decoder_conv_kind = DecoderConvKind::standard;
  }
  return spec;
}

const Tensor& Model::forward(const Tensor& images, bool train) {
  if (images.rank() != 4) {
    throw std::invalid_argument("forward: expected a (batch, height, width, channels) tensor");
  }
  if (images.dim(1) != spec.input_height || images.dim(2) != spec.input_width ||
      images.dim(3) != spec.input_channels) {
    throw std::invalid_argument("forward: input " + images.shape_str() +
                                " does not match the spec geometry " +
                                std::to_string(spec.input_height) + "x" +
                                std::to_string(spec.input_width) + "x" +
                                std::to_string(spec.input_channels));
  }
  if (!net.bound() || net.bound_batch() != images.dim(0) ||
      net.bound_height() != images.dim(1) || net.bound_width() != images.dim(2)) {
    net.bind(images.dim(0), images.dim(1), images.dim(2));
  }
  return net.forward(images, train);
}

// ---------------------------------------------------------------------------
// DSNet

Model build_dsnet(const NetworkSpec& spec, uint64_t seed,
                  const std::optional<std::filesystem::path>& encoder_weights) {
  spec.validate();
  if (spec.tap_names.size() != spec.block_layout.size()) {
    throw SpecError("spec: dyadic alignment requires one tap per dense block (stem conv, "
                    "stem pool, and all but the last transition)");
  }

  Model m;
  m.kind = NetworkKind::dsnet;
  m.spec = spec;
  Network& net = m.net;
  const int g = spec.growth_rate;
  const int stem = spec.stem_channels();

  Node* x = net.input(spec.input_channels);
  x = net.conv2d("encoder.conv1", x, stem, 7, 2, /*bias=*/false);
  x = net.batch_norm("encoder.bn1", x);
  x = net.relu("encoder.relu1", x);
  std::vector<Node*> taps = {x};                       // conv1 tap, half resolution
  x = net.max_pool("encoder.pool1", x, 3, 2);
  taps.push_back(x);                                   // pool1 tap, quarter resolution

  Node* cur = x;
  int channels = stem;
  const int blocks = static_cast<int>(spec.block_layout.size());
  for (int b = 1; b <= blocks; ++b) {
    const int layers = spec.block_layout[static_cast<size_t>(b - 1)];
    for (int i = 1; i <= layers; ++i) {
      m.dense_layers.push_back({b, i, channels, cur});
      const std::string base =
          "encoder.block" + std::to_string(b) + ".layer" + std::to_string(i);
      Node* y = net.batch_norm(base + ".bn1", cur);
      y = net.relu(base + ".relu1", y);
      y = net.conv2d(base + ".conv1", y, 4 * g, 1, 1, false);  // bottleneck
      y = net.batch_norm(base + ".bn2", y);
      y = net.relu(base + ".relu2", y);
      y = net.conv2d(base + ".conv2", y, g, 3, 1, false);
      cur = net.concat(base + ".concat", {cur, y});
      channels += g;
    }
    if (b < blocks) {
      const std::string base = "encoder.transition" + std::to_string(b);
      Node* t = net.batch_norm(base + ".bn", cur);
      t = net.relu(base + ".relu", t);
      const int compressed =
          std::max(1, static_cast<int>(std::floor(channels * spec.compression)));
      t = net.conv2d(base + ".conv", t, compressed, 1, 1, false);
      t = net.avg_pool(base + ".pool", t, 2, 2);
      cur = t;
      channels = compressed;
      if (b < blocks - 1) taps.push_back(cur);  // pool2, pool3, ... (last stays untapped)
    }
  }
  Node* enc = net.batch_norm("encoder.bn_final", cur);
  enc = net.relu("encoder.relu_final", enc);

  if (taps.size() != spec.tap_names.size()) {
    throw SpecError("spec: tap_names count does not match the encoder's exported maps");
  }
  for (size_t i = 0; i < taps.size(); ++i) {
    const int div = 1 << (i + 1);
    m.tap_shapes[spec.tap_names[i]] = {spec.input_height / div, spec.input_width / div,
                                       node_channels(taps[i])};
  }
  const int bot_div = spec.required_divisor();
  m.bottleneck = {spec.input_height / bot_div, spec.input_width / bot_div,
                  node_channels(enc)};

  // Decoder: learned 2x upsampling, tap concatenation, two convolution units
  // per stage, shallowest stage last (no tap at full resolution).
  std::vector<Node*> rev_taps(taps.rbegin(), taps.rend());
  Node* d = enc;
  for (size_t s = 0; s < spec.decoder_widths.size(); ++s) {
    const int width = spec.decoder_widths[s];
    const std::string base = "decoder.stage" + std::to_string(s + 1);
    d = net.conv_transpose2d(base + ".up", d, width, 2, 2);
    if (s < rev_taps.size()) d = net.concat(base + ".concat", {d, rev_taps[s]});
    for (int j = 1; j <= 2; ++j) {
      const std::string cb = base + ".conv" + std::to_string(j);
      if (spec.decoder_conv_kind == DecoderConvKind::depthwise_separable) {
        d = net.depthwise_conv2d(cb + ".dw", d, 3);
        d = net.conv2d(cb + ".pw", d, width, 1, 1, false);
      } else {
        d = net.conv2d(cb + ".conv", d, width, 3, 1, false);
      }
      d = net.batch_norm(cb + ".bn", d);
      d = net.relu(cb + ".relu", d);
    }
  }
  Node* head = net.conv2d("head.conv", d, 1, 1, 1, /*bias=*/true);
  head = net.sigmoid("head.sigmoid", head);
  net.set_output(head);

  net.init_params(seed);
  if (encoder_weights) {
    load_checkpoint(net, *encoder_weights, /*allow_subset=*/true);
  }
  return m;
}

// ---------------------------------------------------------------------------
// U-Net baseline

namespace {

Node* unet_conv_block(Network& net, const std::string& base, Node* x, int width) {
  for (int j = 1; j <= 2; ++j) {
    const std::string cb = base + ".conv" + std::to_string(j);
    x = net.conv2d(cb, x, width, 3, 1, false);
    x = net.batch_norm(cb + ".bn", x);
    x = net.relu(cb + ".relu", x);
  }
  return x;
}

}  // namespace

Model build_unet(const NetworkSpec& spec_overrides, uint64_t seed) {
  NetworkSpec spec = spec_overrides;
  spec.validate();

  Model m;
  m.kind = NetworkKind::unet;
  m.spec = spec;
  Network& net = m.net;

  const int base_width = 64;
  Node* x = net.input(spec.input_channels);
  std::vector<Node*> skips;
  int width = base_width;
  for (int level = 1; level <= 4; ++level) {
    x = unet_conv_block(net, "enc" + std::to_string(level), x, width);
    skips.push_back(x);
    x = net.max_pool("pool" + std::to_string(level), x, 2, 2);
    width *= 2;
  }
  x = unet_conv_block(net, "center", x, width);  // 1024 at 1/16 resolution

  for (int level = 4; level >= 1; --level) {
    const std::string base = "dec" + std::to_string(level);
    x = net.conv_transpose2d(base + ".up", x, node_channels(x), 2, 2);
    x = net.concat(base + ".concat", {x, skips[static_cast<size_t>(level - 1)]});
    width /= 2;
    x = unet_conv_block(net, base, x, width);
  }
  Node* head = net.conv2d("head.conv", x, 1, 1, 1, true);
  head = net.sigmoid("head.sigmoid", head);
  net.set_output(head);
  net.init_params(seed);
  return m;
}

// ---------------------------------------------------------------------------
// FCN-8s baseline

Model build_fcn8s(const NetworkSpec& spec_overrides, uint64_t seed) {
  NetworkSpec spec = spec_overrides;
  spec.validate();

  Model m;
  m.kind = NetworkKind::fcn8s;
  m.spec = spec;
  Network& net = m.net;

  Node* x = net.input(spec.input_channels);
  const int widths[5] = {64, 128, 256, 512, 512};
  const int depth[5] = {2, 2, 3, 3, 3};
  Node* pool3 = nullptr;
  Node* pool4 = nullptr;
  for (int b = 0; b < 5; ++b) {
    for (int j = 1; j <= depth[b]; ++j) {
      const std::string cb =
          "vgg.conv" + std::to_string(b + 1) + "_" + std::to_string(j);
      x = net.conv2d(cb, x, widths[b], 3, 1, true);
      x = net.relu(cb + ".relu", x);
    }
    x = net.max_pool("vgg.pool" + std::to_string(b + 1), x, 2, 2);
    if (b == 2) pool3 = x;
    if (b == 3) pool4 = x;
  }

  x = net.conv2d("fc6", x, 4096, 7, 1, true);
  x = net.relu("fc6.relu", x);
  x = net.conv2d("fc7", x, 4096, 1, 1, true);
  x = net.relu("fc7.relu", x);
  Node* score = net.conv2d("score_fr", x, 1, 1, 1, true);

  // Classic FCN-8s fusion; the 2x-stride upsampling kernels (4/2 and 16/8)
  // overlap, which the summary reports as checkerboard-prone.
  Node* up2 = net.conv_transpose2d("upscore2", score, 1, 4, 2);
  Node* score4 = net.conv2d("score_pool4", pool4, 1, 1, 1, true);
  Node* fuse4 = net.add("fuse_pool4", {up2, score4});
  Node* up4 = net.conv_transpose2d("upscore_pool4", fuse4, 1, 4, 2);
  Node* score3 = net.conv2d("score_pool3", pool3, 1, 1, 1, true);
  Node* fuse3 = net.add("fuse_pool3", {up4, score3});
  Node* up8 = net.conv_transpose2d("upscore8", fuse3, 1, 16, 8);
  Node* head = net.sigmoid("head.sigmoid", up8);
  net.set_output(head);
  net.init_params(seed);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter accounting and summaries

ParamCounts count_parameters(const Network& net) {
  ParamCounts c;
  for (const Param* p : net.params()) {
    const int64_t n = p->value.numel();
    if (!p->trainable) {
      c.non_trainable += n;
      continue;
    }
    c.total += n;
    if (p->name.ends_with(".w")) {
      c.conv_weights += n;
    } else if (p->name.ends_with(".b")) {
      c.biases += n;
    } else if (p->name.ends_with(".gamma") || p->name.ends_with(".beta")) {
      c.batch_norm += n;
    }
  }
  return c;
}

ModelSummary summarize(const Model& m) {
  ModelSummary s;
  s.network = network_kind_name(m.kind);
  for (const auto& node : m.net.nodes()) {
    LayerSummaryRow row;
    row.name = node->name();
    row.type = node->type();
    const auto& d = node->out().dims();
    if (!d.empty() && d[0] > 0) row.out_shape = d;
    row.params = node->param_count();
    s.layers.push_back(std::move(row));

    if (const auto* up = dynamic_cast<const ConvTranspose2dNode*>(node.get())) {
      s.upsampling.push_back({up->name(), up->kernel(), up->stride(),
                              up->kernel_divisible_by_stride(), up->overlapping()});
      s.checkerboard_prone = s.checkerboard_prone || up->overlapping();
    }
  }
  s.counts = count_parameters(m.net);
  return s;
}

std::string summary_text(const ModelSummary& s) {
  std::ostringstream os;
  os << "network: " << s.network << "\n";
  os << "layer                                     type                output            params\n";
  os << "------------------------------------------------------------------------------------\n";
  for (const auto& row : s.layers) {
    std::string shape = "-";
    if (!row.out_shape.empty()) {
      shape = "(";
      for (size_t i = 1; i < row.out_shape.size(); ++i) {
        if (i > 1) shape += ",";
        shape += std::to_string(row.out_shape[i]);
      }
      shape += ")";
    }
    os << row.name;
    for (size_t i = row.name.size(); i < 42; ++i) os << ' ';
    os << row.type;
    for (size_t i = row.type.size(); i < 20; ++i) os << ' ';
    os << shape;
    for (size_t i = shape.size(); i < 18; ++i) os << ' ';
    os << row.params << "\n";
  }
  os << "------------------------------------------------------------------------------------\n";
  os << "trainable parameters:      " << s.counts.total << "\n";
  os << "  convolution weights:     " << s.counts.conv_weights << "\n";
  os << "  biases:                  " << s.counts.biases << "\n";
  os << "  batch-norm scale/shift:  " << s.counts.batch_norm << "\n";
  os << "non-trainable (BN stats):  " << s.counts.non_trainable << "\n";
  os << "upsampling layers:\n";
  for (const auto& u : s.upsampling) {
    os << "  " << u.name << "  kernel " << u.kernel << " stride " << u.stride
       << "  divisible=" << (u.kernel_divisible_by_stride ? "yes" : "no")
       << "  overlapping=" << (u.overlapping ? "yes" : "no") << "\n";
  }
  os << "checkerboard_prone: " << (s.checkerboard_prone ? "yes" : "no") << "\n";
  return os.str();
}

std::string summary_json(const ModelSummary& s) {
  nlohmann::json j;
  j["network"] = s.network;
  j["layers"] = nlohmann::json::array();
  for (const auto& row : s.layers) {
    nlohmann::json r;
    r["name"] = row.name;
    r["type"] = row.type;
    r["output_shape"] = row.out_shape;
    r["params"] = row.params;
    j["layers"].push_back(std::move(r));
  }
  j["upsampling"] = nlohmann::json::array();
  for (const auto& u : s.upsampling) {
    nlohmann::json r;
    r["name"] = u.name;
    r["kernel"] = u.kernel;
    r["stride"] = u.stride;
    r["kernel_divisible_by_stride"] = u.kernel_divisible_by_stride;
    r["overlapping"] = u.overlapping;
    j["upsampling"].push_back(std::move(r));
  }
  j["checkerboard_prone"] = s.checkerboard_prone;
  j["parameters"] = {{"total", s.counts.total},
                     {"conv_weights", s.counts.conv_weights},
                     {"biases", s.counts.biases},
                     {"batch_norm", s.counts.batch_norm},
                     {"non_trainable", s.counts.non_trainable}};
  return j.dump(2);
}

}  // namespace dsnet
