#include "dsnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsnet {

namespace {

void check_pair(size_t ny, size_t nyh) {
  if (ny != nyh) throw std::invalid_argument("loss: y and y_hat length mismatch");
  if (ny == 0) throw std::invalid_argument("loss: empty pixel vectors");
}

double clamp_prob(double p) { return std::clamp(p, kLossEps, 1.0 - kLossEps); }

struct IouSums {
  double inter = 0.0;  // sum(y * yh)
  double total = 0.0;  // sum(y) + sum(yh)
};

IouSums iou_sums(std::span<const double> y, std::span<const double> y_hat) {
  IouSums s;
  for (size_t i = 0; i < y.size(); ++i) {
    s.inter += y[i] * y_hat[i];
    s.total += y[i] + y_hat[i];
  }
  return s;
}

}  // namespace

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::cross_entropy:
      return "cross_entropy";
    case LossKind::iou:
      return "iou";
    case LossKind::combined:
      return "combined";
  }
  return "combined";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "iou") return LossKind::iou;
  if (name == "combined") return LossKind::combined;
  throw std::invalid_argument("unknown loss kind: " + name);
}

double bce(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y.size(), y_hat.size());
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double p = clamp_prob(y_hat[i]);
    acc -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(y.size());
}

double soft_iou(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y.size(), y_hat.size());
  const IouSums s = iou_sums(y, y_hat);
  const double uni = s.total - s.inter;
  if (uni == 0.0) return 1.0;  // both sides empty: perfect agreement
  return s.inter / uni;
}

double l_seg(std::span<const double> y, std::span<const double> y_hat) {
  return bce(y, y_hat) + (1.0 - soft_iou(y, y_hat));
}

double loss_value(LossKind kind, std::span<const double> y, std::span<const double> y_hat) {
  switch (kind) {
    case LossKind::cross_entropy:
      return bce(y, y_hat);
    case LossKind::iou:
      return 1.0 - soft_iou(y, y_hat);
    case LossKind::combined:
      return l_seg(y, y_hat);
  }
  return l_seg(y, y_hat);
}

void loss_grad(LossKind kind, std::span<const double> y, std::span<const double> y_hat,
               std::span<double> grad_out) {
  check_pair(y.size(), y_hat.size());
  if (grad_out.size() != y.size()) {
    throw std::invalid_argument("loss_grad: gradient buffer length mismatch");
  }
  const size_t n = y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_bce = kind != LossKind::iou;
  const bool want_iou = kind != LossKind::cross_entropy;

  IouSums s;
  if (want_iou) s = iou_sums(y, y_hat);
  const double uni = s.total - s.inter;
  const double uni2 = uni * uni;

  for (size_t i = 0; i < n; ++i) {
    double g = 0.0;
    if (want_bce) {
      // d/dp of -[y log p + (1-y) log(1-p)] / n, zero where the clamp binds.
      if (y_hat[i] >= kLossEps && y_hat[i] <= 1.0 - kLossEps) {
        const double p = y_hat[i];
        g += inv_n * (-y[i] / p + (1.0 - y[i]) / (1.0 - p));
      }
    }
    if (want_iou && uni > 0.0) {
      // d/dyh_i of (1 - I/U) with dI = y_i and dU = 1 - y_i.
      g -= (y[i] * uni - s.inter * (1.0 - y[i])) / uni2;
    }
    grad_out[i] = g;
  }
}

double loss_value_and_grad(LossKind kind, std::span<const float> y,
                           std::span<const float> y_hat, std::span<float> grad_out) {
  std::vector<double> yd(y.begin(), y.end());
  std::vector<double> pd(y_hat.begin(), y_hat.end());
  std::vector<double> gd(yd.size(), 0.0);
  loss_grad(kind, yd, pd, gd);
  for (size_t i = 0; i < gd.size(); ++i) grad_out[i] = static_cast<float>(gd[i]);
  return loss_value(kind, yd, pd);
}

}  // namespace dsnet
