#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsnet/loss.hpp"
#include "dsnet/metrics.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;

namespace {

std::vector<double> rand_probs(Rng& rng, size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<double> rand_binary(Rng& rng, size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.bernoulli() ? 1.0 : 0.0;
  return v;
}

}  // namespace

TEST_CASE("binary cross-entropy worked examples") {
  const std::vector<double> perfect_y = {1.0, 0.0};
  const std::vector<double> perfect_p = {1.0 - kLossEps, kLossEps};
  CHECK(bce(perfect_y, perfect_p) < 1e-6);

  const std::vector<double> y1 = {1.0};
  const std::vector<double> p1 = {0.5};
  CHECK(bce(y1, p1) == doctest::Approx(0.693147).epsilon(1e-6));

  const std::vector<double> y2 = {1.0, 0.0};
  const std::vector<double> p2 = {0.5, 0.5};
  CHECK(bce(y2, p2) == doctest::Approx(0.693147).epsilon(1e-6));

  const std::vector<double> bad = {0.5};
  CHECK_THROWS_AS(bce(y2, bad), std::invalid_argument);
}

TEST_CASE("soft IoU worked examples") {
  const std::vector<double> a = {1.0, 1.0, 0.0, 0.0};
  CHECK(soft_iou(a, a) == doctest::Approx(1.0));

  const std::vector<double> y = {1.0, 0.0};
  const std::vector<double> p = {0.5, 0.5};
  CHECK(std::fabs(soft_iou(y, p) - 1.0 / 3.0) < 1e-9);  // inter 0.5, union 1.5

  const std::vector<double> zero = {0.0, 0.0};
  CHECK(soft_iou(zero, zero) == doctest::Approx(1.0));  // empty-empty convention
}

TEST_CASE("combined segmentation loss worked examples") {
  const std::vector<double> y = {1.0, 0.0};
  const std::vector<double> perfect = {1.0 - kLossEps, kLossEps};
  CHECK(l_seg(y, perfect) < 1e-5);

  const std::vector<double> p = {0.5, 0.5};
  CHECK(l_seg(y, p) == doctest::Approx(1.359814).epsilon(1e-5));

  const std::vector<double> y1 = {1.0};
  const std::vector<double> eps = {kLossEps};
  CHECK(l_seg(y1, eps) == doctest::Approx(-std::log(kLossEps) + 1.0).epsilon(1e-3));
}

TEST_CASE("loss kind dispatch") {
  const std::vector<double> y = {1.0, 0.0};
  const std::vector<double> p = {0.5, 0.5};
  CHECK(loss_value(LossKind::cross_entropy, y, p) == doctest::Approx(bce(y, p)));
  CHECK(loss_value(LossKind::iou, y, p) == doctest::Approx(1.0 - soft_iou(y, p)));
  CHECK(loss_value(LossKind::combined, y, p) == doctest::Approx(l_seg(y, p)));
  CHECK(loss_kind_from_name("iou") == LossKind::iou);
  CHECK_THROWS_AS(loss_kind_from_name("dice"), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(11);
  for (int kind_i = 0; kind_i < 3; ++kind_i) {
    const auto kind = static_cast<LossKind>(kind_i);
    const int instances = kind == LossKind::combined ? 100 : 20;
    for (int t = 0; t < instances; ++t) {
      const size_t n = 4 + rng.next_below(48);
      const std::vector<double> y = rand_binary(rng, n);
      std::vector<double> p = rand_probs(rng, n, 0.01, 0.99);
      std::vector<double> analytic(n);
      loss_grad(kind, y, p, analytic);

      const double h = 1e-5;
      double num_norm = 0.0, diff_norm = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        const double fp = loss_value(kind, y, p);
        p[i] = saved - h;
        const double fm = loss_value(kind, y, p);
        p[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        num_norm += numeric * numeric;
        diff_norm += (numeric - analytic[i]) * (numeric - analytic[i]);
      }
      CHECK(std::sqrt(diff_norm) <= 1e-4 * std::max(std::sqrt(num_norm), 1e-12));
    }
  }
}

TEST_CASE("loss is nonnegative and zero only at the clamped truth") {
  Rng rng(13);
  for (int t = 0; t < 500; ++t) {
    const size_t n = 1 + rng.next_below(64);
    const std::vector<double> y = rand_binary(rng, n);
    const std::vector<double> p = rand_probs(rng, n, 0.0, 1.0);
    CHECK(l_seg(y, p) >= 0.0);
  }
  std::vector<double> y = {1.0, 0.0, 1.0};
  std::vector<double> clamped = {1.0 - kLossEps, kLossEps, 1.0 - kLossEps};
  CHECK(l_seg(y, clamped) < 1e-5);
}

TEST_CASE("soft IoU of binary predictions equals hard IoU") {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const int h = 1 + static_cast<int>(rng.next_below(8));
    const int w = 1 + static_cast<int>(rng.next_below(8));
    BinaryMask a(h, w), b(h, w);
    std::vector<double> ya, yb;
    for (int i = 0; i < h * w; ++i) {
      a.v[static_cast<size_t>(i)] = rng.bernoulli() ? 1 : 0;
      b.v[static_cast<size_t>(i)] = rng.bernoulli() ? 1 : 0;
      ya.push_back(a.v[static_cast<size_t>(i)]);
      yb.push_back(b.v[static_cast<size_t>(i)]);
    }
    const double soft = soft_iou(ya, yb);
    const double hard = iou_hard(confusion(b, a));  // pred=b against gt=a
    CHECK(std::fabs(soft - hard) < 1e-12);
  }
}

TEST_CASE("pixel metrics are permutation invariant") {
  Rng rng(19);
  const size_t n = 64;
  std::vector<double> y = rand_binary(rng, n);
  std::vector<double> p = rand_probs(rng, n, 0.0, 1.0);
  const double b0 = bce(y, p), s0 = soft_iou(y, p), l0 = l_seg(y, p);

  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  std::vector<double> y2(n), p2(n);
  for (size_t i = 0; i < n; ++i) {
    y2[i] = y[perm[i]];
    p2[i] = p[perm[i]];
  }
  CHECK(bce(y2, p2) == doctest::Approx(b0).epsilon(1e-12));
  CHECK(soft_iou(y2, p2) == doctest::Approx(s0).epsilon(1e-12));
  CHECK(l_seg(y2, p2) == doctest::Approx(l0).epsilon(1e-12));
}
