#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsnet/metrics.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;

TEST_CASE("confusion tallies") {
  BinaryMask gt(10, 10), pred(10, 10);
  for (int i = 0; i < 10; ++i) {
    gt.v[static_cast<size_t>(i)] = 1;
    pred.v[static_cast<size_t>(i)] = 1;
  }
  ConfusionCounts c = confusion(pred, gt);
  CHECK(c.tp == 10);
  CHECK(c.tn == 90);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);
  CHECK(c.total() == 100);

  BinaryMask ones(2, 2), zeros(2, 2);
  ones.v.assign(4, 1);
  c = confusion(ones, zeros);
  CHECK(c.fp == 4);
  CHECK(c.tp == 0);
  CHECK(c.fn == 0);
  CHECK(c.tn == 0);

  // pred={(0,1),(0,2)}, gt={(0,0),(0,1)} on a 1x3 grid
  BinaryMask p3(1, 3), g3(1, 3);
  p3.at(0, 1) = 1;
  p3.at(0, 2) = 1;
  g3.at(0, 0) = 1;
  g3.at(0, 1) = 1;
  c = confusion(p3, g3);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 0);

  BinaryMask other(2, 3);
  CHECK_THROWS_AS(confusion(p3, other), std::invalid_argument);
}

TEST_CASE("ratio metrics from confusion counts") {
  ConfusionCounts c{1, 1, 1, 0};
  CHECK(iou_hard(c) == doctest::Approx(1.0 / 3.0));
  CHECK(dice(c) == doctest::Approx(0.5));

  ConfusionCounts s{3, 0, 1, 0};
  CHECK(sensitivity(s) == doctest::Approx(0.75));

  ConfusionCounts disjoint{0, 4, 5, 10};
  CHECK(iou_hard(disjoint) == doctest::Approx(0.0));
  CHECK(dice(disjoint) == doctest::Approx(0.0));

  ConfusionCounts empty{0, 0, 0, 9};
  CHECK(iou_hard(empty) == doctest::Approx(1.0));
  CHECK(dice(empty) == doctest::Approx(1.0));
  CHECK(sensitivity(empty) == doctest::Approx(1.0));
  ConfusionCounts nofalse{5, 0, 0, 0};
  CHECK(specificity(nofalse) == doctest::Approx(1.0));
}

TEST_CASE("dice equals 2 iou / (1 + iou) on random counts") {
  Rng rng(23);
  for (int t = 0; t < 2000; ++t) {
    ConfusionCounts c{static_cast<int64_t>(rng.next_below(50)),
                      static_cast<int64_t>(rng.next_below(50)),
                      static_cast<int64_t>(rng.next_below(50)),
                      static_cast<int64_t>(rng.next_below(50))};
    const double i = iou_hard(c);
    CHECK(dice(c) == doctest::Approx(2.0 * i / (1.0 + i)).epsilon(1e-12));
  }
}

namespace {

// Mann-Whitney pairwise statistic: fraction of positive/negative pairs ordered
// correctly, ties worth half.
double pairwise_auc(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("ROC and AUC worked examples") {
  {
    const std::vector<float> s = {0.9f, 0.8f};
    const std::vector<uint8_t> l = {1, 0};
    CHECK(roc_and_auc(s, l).auc == doctest::Approx(1.0));
  }
  {
    const std::vector<float> s = {0.4f, 0.4f, 0.4f, 0.4f};
    const std::vector<uint8_t> l = {1, 0, 1, 0};
    CHECK(roc_and_auc(s, l).auc == doctest::Approx(0.5));
  }
  {
    const std::vector<float> s = {0.9f, 0.6f, 0.4f, 0.2f};
    const std::vector<uint8_t> l = {1, 0, 1, 0};
    CHECK(roc_and_auc(s, l).auc == doctest::Approx(0.75));
  }
  {
    const std::vector<float> s = {0.9f, 0.6f};
    const std::vector<uint8_t> l = {1, 1};
    CHECK_THROWS_AS(roc_and_auc(s, l), std::invalid_argument);
  }
}

TEST_CASE("ROC curve shape") {
  const std::vector<float> s = {0.9f, 0.6f, 0.4f, 0.2f};
  const std::vector<uint8_t> l = {1, 0, 1, 0};
  const RocCurve c = roc_and_auc(s, l);
  REQUIRE(c.points.size() == 5);  // (0,0) plus one step per distinct score
  CHECK(c.points.front().fpr == doctest::Approx(0.0));
  CHECK(c.points.front().tpr == doctest::Approx(0.0));
  CHECK(c.points.back().fpr == doctest::Approx(1.0));
  CHECK(c.points.back().tpr == doctest::Approx(1.0));
  for (size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
    CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
  }
}

TEST_CASE("trapezoidal AUC equals the pairwise-counting oracle") {
  Rng rng(29);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 2 + rng.next_below(999);
    std::vector<float> s(n);
    std::vector<uint8_t> l(n);
    bool has0 = false, has1 = false;
    for (size_t i = 0; i < n; ++i) {
      // coarse grid of scores so ties actually occur
      s[i] = static_cast<float>(rng.next_below(16)) / 15.0f;
      l[i] = rng.bernoulli() ? 1 : 0;
      has0 |= l[i] == 0;
      has1 |= l[i] == 1;
    }
    if (!has0) l[0] = 0;
    if (!has1) l[n - 1] = 1;
    const double trap = roc_and_auc(s, l).auc;
    const double pair = pairwise_auc(s, l);
    CHECK(std::fabs(trap - pair) <= 1e-9);
  }
}

TEST_CASE("report aggregation") {
  {
    std::vector<PerImageMetrics> per = {{"a", LesionClass::nev, 0.8, 0.9, 0.85, 0.95}};
    const MetricsReport rep = aggregate_report(per);
    CHECK(rep.overall.n == 1);
    CHECK(rep.overall.miou == doctest::Approx(0.8));
    CHECK(rep.per_class.at(LesionClass::nev).miou == doctest::Approx(0.8));
    CHECK(rep.per_class.count(LesionClass::mel) == 0);
    CHECK(rep.per_class.count(LesionClass::sk) == 0);
  }
  {
    std::vector<PerImageMetrics> per = {{"a", LesionClass::mel, 0.6, 0.7, 0.8, 0.9},
                                        {"b", LesionClass::nev, 1.0, 1.0, 1.0, 1.0}};
    const MetricsReport rep = aggregate_report(per);
    CHECK(rep.overall.miou == doctest::Approx(0.8));
    CHECK(rep.per_class.at(LesionClass::mel).miou == doctest::Approx(0.6));
    CHECK(rep.per_class.at(LesionClass::nev).miou == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(aggregate_report({}), std::invalid_argument);
}
