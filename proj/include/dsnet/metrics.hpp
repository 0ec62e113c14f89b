#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsnet/mask.hpp"
#include "dsnet/types.hpp"

namespace dsnet {

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }
};

// Exact pixel tallies of pred against gt. Throws on shape mismatch.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

// Ratio metrics; each returns 1 when its denominator is 0 (agreement on the
// empty case, mirroring the soft IoU convention).
double iou_hard(const ConfusionCounts& c);
double dice(const ConfusionCounts& c);
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), one step per distinct score
  double auc = 0.0;
};

// ROC over pooled pixel scores with trapezoidal AUC. Tied scores collapse to a
// single curve step, which credits each tie half a pairwise win. Throws when
// labels contain only one class.
RocCurve roc_and_auc(std::span<const float> scores, std::span<const uint8_t> labels);

struct PerImageMetrics {
  std::string id;
  std::optional<LesionClass> cls;
  double iou = 0.0;
  double dice = 0.0;
  double sn = 0.0;
  double sp = 0.0;
};

struct MetricsBlock {
  int n = 0;
  double miou = 0.0;
  double mdice = 0.0;
  double msn = 0.0;
  double msp = 0.0;
  std::optional<double> auc;  // pooled-pixel AUC, filled by the evaluation pass
};

struct MetricsReport {
  std::vector<PerImageMetrics> per_image;
  MetricsBlock overall;
  std::map<LesionClass, MetricsBlock> per_class;  // only classes that occur
  double mean_inference_seconds = 0.0;
  int empty_predictions = 0;
  int degenerate_thresholds = 0;
  std::string split;
  std::optional<double> mean_per_image_auc;  // alternative AUC aggregation
};

// Arithmetic means per class and over all images (the overall mean is over
// images, not over class means). Throws on empty input.
MetricsReport aggregate_report(std::vector<PerImageMetrics> per_image);

}  // namespace dsnet
