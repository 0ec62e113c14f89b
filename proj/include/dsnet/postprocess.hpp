#pragma once

#include "dsnet/mask.hpp"

namespace dsnet {

struct ThresholdResult {
  double tau = 0.0;
  int iterations = 0;
  bool degenerate = false;  // one side of the split was empty (e.g. constant map)
  bool hit_cap = false;     // stopped at the iteration cap without converging
};

// Ridler-Calvard iterative threshold selection: starting from the global mean,
// move tau to the midpoint of the means of the two classes it induces until
// |delta| < 1e-6 or 100 iterations.
ThresholdResult isodata_threshold(const ProbMapView& m);

// Pixel is foreground iff value > tau (strict).
BinaryMask binarize(const ProbMapView& m, double tau);

// Keeps only the largest 8-connected foreground component; ties are broken by
// the component whose first pixel comes earliest in row-major order.
BinaryMask largest_connected_component(const BinaryMask& mask);

struct PostprocessResult {
  BinaryMask mask;
  ThresholdResult threshold;
  bool empty_prediction = false;
};

// isodata threshold -> binarize -> largest connected component.
PostprocessResult postprocess(const ProbMapView& m);

}  // namespace dsnet
