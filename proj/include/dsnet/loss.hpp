#pragma once

#include <span>
#include <string>
#include <vector>

namespace dsnet {

// Probability clamp used inside the logarithms of the cross-entropy term.
inline constexpr double kLossEps = 1e-7;

enum class LossKind { cross_entropy, iou, combined };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// Mean binary cross-entropy over pixels; predictions are clamped to
// [kLossEps, 1 - kLossEps] before the logs. Throws on length mismatch or
// empty input.
double bce(std::span<const double> y, std::span<const double> y_hat);

// Differentiable IoU surrogate: sum(y*yh) / (sum(y) + sum(yh) - sum(y*yh)).
// Returns 1 when both vectors are all-zero.
double soft_iou(std::span<const double> y, std::span<const double> y_hat);

// Segmentation loss: bce + (1 - soft_iou).
double l_seg(std::span<const double> y, std::span<const double> y_hat);

// Loss selected by kind: cross_entropy -> bce, iou -> 1 - soft_iou,
// combined -> l_seg.
double loss_value(LossKind kind, std::span<const double> y, std::span<const double> y_hat);

// Analytic gradient of loss_value with respect to y_hat. Positions where the
// clamp binds receive zero gradient from the cross-entropy term.
void loss_grad(LossKind kind, std::span<const double> y, std::span<const double> y_hat,
               std::span<double> grad_out);

inline void l_seg_grad(std::span<const double> y, std::span<const double> y_hat,
                       std::span<double> grad_out) {
  loss_grad(LossKind::combined, y, y_hat, grad_out);
}

// Float-input convenience for the training path; accumulation stays in double.
double loss_value_and_grad(LossKind kind, std::span<const float> y,
                           std::span<const float> y_hat, std::span<float> grad_out);

}  // namespace dsnet
