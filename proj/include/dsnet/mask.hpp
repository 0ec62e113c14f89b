#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dsnet {

enum class MaskProvenance { ground_truth, raw_threshold, largest_component };

// Per-pixel {0,1} grid, row-major.
struct BinaryMask {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> v;
  MaskProvenance provenance = MaskProvenance::ground_truth;

  BinaryMask() = default;
  BinaryMask(int height, int width, MaskProvenance p = MaskProvenance::ground_truth)
      : h(height), w(width), v(static_cast<size_t>(height) * width, 0), provenance(p) {}

  uint8_t& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
  uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
  int64_t size() const { return static_cast<int64_t>(v.size()); }

  int64_t foreground_count() const {
    int64_t n = 0;
    for (uint8_t p : v) n += p;
    return n;
  }
};

// Read-only view of an H x W probability grid (values expected in [0,1]).
struct ProbMapView {
  int h = 0;
  int w = 0;
  std::span<const float> v;

  int64_t size() const { return static_cast<int64_t>(v.size()); }
};

}  // namespace dsnet
