#include "dsnet/postprocess.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dsnet {

ThresholdResult isodata_threshold(const ProbMapView& m) {
  if (m.size() == 0) throw std::invalid_argument("isodata_threshold: empty map");

  double sum = 0.0;
  for (float v : m.v) sum += v;
  double tau = sum / static_cast<double>(m.size());

  ThresholdResult res;
  res.tau = tau;
  constexpr double kTol = 1e-6;
  constexpr int kMaxIter = 100;

  for (int it = 1; it <= kMaxIter; ++it) {
    double lo_sum = 0.0, hi_sum = 0.0;
    int64_t lo_n = 0, hi_n = 0;
    for (float v : m.v) {
      if (v <= tau) {
        lo_sum += v;
        ++lo_n;
      } else {
        hi_sum += v;
        ++hi_n;
      }
    }
    if (lo_n == 0 || hi_n == 0) {
      res.degenerate = true;
      res.iterations = it;
      return res;
    }
    const double next = 0.5 * (lo_sum / lo_n + hi_sum / hi_n);
    res.iterations = it;
    const double delta = std::fabs(next - tau);
    tau = next;
    res.tau = tau;
    if (delta < kTol) return res;
  }
  res.hit_cap = true;
  return res;
}

BinaryMask binarize(const ProbMapView& m, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("binarize: tau outside [0,1]");
  BinaryMask out(m.h, m.w, MaskProvenance::raw_threshold);
  for (int64_t i = 0; i < m.size(); ++i) out.v[i] = m.v[i] > tau ? 1 : 0;
  return out;
}

BinaryMask largest_connected_component(const BinaryMask& mask) {
  BinaryMask out(mask.h, mask.w, MaskProvenance::largest_component);
  const int h = mask.h, w = mask.w;
  std::vector<int32_t> label(mask.v.size(), -1);
  std::vector<int64_t> stack;

  int32_t best_label = -1;
  int64_t best_size = 0;
  int32_t next_label = 0;

  // Row-major scan; each component is seeded by its row-major-first pixel, so
  // keeping the earliest label on ties realizes the documented tie-break.
  for (int64_t start = 0; start < mask.size(); ++start) {
    if (mask.v[start] == 0 || label[start] >= 0) continue;
    const int32_t cur = next_label++;
    int64_t size = 0;
    stack.clear();
    stack.push_back(start);
    label[start] = cur;
    while (!stack.empty()) {
      const int64_t p = stack.back();
      stack.pop_back();
      ++size;
      const int r = static_cast<int>(p / w);
      const int c = static_cast<int>(p % w);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          const int64_t q = static_cast<int64_t>(nr) * w + nc;
          if (mask.v[q] != 0 && label[q] < 0) {
            label[q] = cur;
            stack.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = cur;
    }
  }

  if (best_label >= 0) {
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = label[i] == best_label ? 1 : 0;
  }
  return out;
}

PostprocessResult postprocess(const ProbMapView& m) {
  PostprocessResult res;
  res.threshold = isodata_threshold(m);
  const BinaryMask raw = binarize(m, res.threshold.tau);
  res.mask = largest_connected_component(raw);
  res.empty_prediction = res.mask.foreground_count() == 0;
  return res;
}

}  // namespace dsnet
