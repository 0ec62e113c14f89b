#include "dsnet/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dsnet {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.h != gt.h || pred.w != gt.w) {
    throw std::invalid_argument("confusion: mask shapes differ");
  }
  ConfusionCounts c;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0;
    const bool g = gt.v[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

namespace {
double ratio(int64_t num, int64_t den) {
  if (den == 0) return 1.0;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double iou_hard(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
double dice(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
double sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
double specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }

RocCurve roc_and_auc(std::span<const float> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc_and_auc: scores and labels length mismatch");
  }
  int64_t pos = 0;
  for (uint8_t l : labels) pos += (l != 0);
  const int64_t neg = static_cast<int64_t>(labels.size()) - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_and_auc: AUC undefined, labels contain a single class");
  }

  std::vector<uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  double auc = 0.0;
  int64_t tp = 0, fp = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    // Consume the whole tie group so ties contribute one diagonal segment.
    const float s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] != 0)
        ++tp;
      else
        ++fp;
      ++i;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    curve.points.push_back({fpr, tpr});
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  curve.auc = auc;
  return curve;
}

MetricsReport aggregate_report(std::vector<PerImageMetrics> per_image) {
  if (per_image.empty()) throw std::invalid_argument("aggregate_report: no per-image results");

  MetricsReport rep;
  rep.per_image = std::move(per_image);

  auto accumulate = [](MetricsBlock& b, const PerImageMetrics& m) {
    b.n += 1;
    b.miou += m.iou;
    b.mdice += m.dice;
    b.msn += m.sn;
    b.msp += m.sp;
  };
  auto finish = [](MetricsBlock& b) {
    if (b.n == 0) return;
    const double inv = 1.0 / b.n;
    b.miou *= inv;
    b.mdice *= inv;
    b.msn *= inv;
    b.msp *= inv;
  };

  for (const auto& m : rep.per_image) {
    accumulate(rep.overall, m);
    if (m.cls) accumulate(rep.per_class[*m.cls], m);
  }
  finish(rep.overall);
  for (auto& [cls, block] : rep.per_class) finish(block);
  return rep;
}

}  // namespace dsnet
