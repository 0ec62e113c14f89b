#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsnet/metrics.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Originally reported DSNet results, rendered as context rows in reports
// (never asserted; desk-scale runs cannot reach them).
struct ReferenceScores {
  static constexpr double isic_miou = 0.775;
  static constexpr double isic_msn = 0.875;
  static constexpr double isic_msp = 0.955;
  static constexpr double isic_auc = 0.953;
  static constexpr double ph2_miou = 0.870;
  static constexpr double ph2_msn = 0.929;
  static constexpr double ph2_msp = 0.969;
  static constexpr double ph2_auc = 0.987;
  // Published ISIC-2017 split class proportions (mel, sk, nev).
  static constexpr double isic_train_prop[3] = {0.188, 0.127, 0.685};
  static constexpr double isic_val_prop[3] = {0.200, 0.280, 0.520};
  static constexpr double isic_test_prop[3] = {0.195, 0.150, 0.655};
  static constexpr double ph2_prop_mel = 0.200;
  static constexpr double ph2_prop_nev = 0.800;
};

std::string per_image_csv(const MetricsReport& rep);

// Class-stratified aggregate table (columns nev, mel, sk, overall).
std::string aggregate_csv(const MetricsReport& rep);
std::string aggregate_text(const MetricsReport& rep, bool include_reference_rows = true);

// Two-column numeric text (fpr tpr), one point per line.
std::string roc_text(const RocCurve& curve);
RocCurve roc_from_text(const std::string& text);

struct ComparisonRow {
  std::string run;
  std::string network;
  int64_t parameters = 0;
  std::string loss;
  double miou = 0.0;
  double msn = 0.0;
  double msp = 0.0;
  std::optional<double> auc;
};

// Network/loss comparison table ranked by mIoU (descending).
std::string comparison_csv(std::vector<ComparisonRow> rows);
std::string comparison_text(std::vector<ComparisonRow> rows);

// TP -> green, FN -> red, FP -> yellow over the original image, with a header
// strip carrying Dice (top-left) and IoU (top-right) to 3 decimals. The header
// keeps annotation pixels out of the mask region so color tallies reconcile
// exactly with the confusion counts.
struct OverlaySpec {
  int header_px = 28;
  // RGB in [0,1]
  float tp_color[3] = {0.0f, 1.0f, 0.0f};
  float fn_color[3] = {1.0f, 0.0f, 0.0f};
  float fp_color[3] = {1.0f, 1.0f, 0.0f};
};

Tensor render_overlay(const Tensor& image_hw3, const BinaryMask& pred, const BinaryMask& gt,
                      const OverlaySpec& spec = {});

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

// Minimal static line plot written as a PNG (axes, ticks, legend, optional
// chance diagonal for ROC figures).
void write_line_plot_png(const std::filesystem::path& file, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series, bool unit_diagonal = false);

}  // namespace dsnet
