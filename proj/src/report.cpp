#include "dsnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>

namespace dsnet {

namespace {

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

const LesionClass kClassOrder[3] = {LesionClass::nev, LesionClass::mel, LesionClass::sk};

std::string block_cell(const MetricsReport& rep, LesionClass cls,
                       double MetricsBlock::*field) {
  auto it = rep.per_class.find(cls);
  if (it == rep.per_class.end()) return "-";
  return fmt3(it->second.*field);
}

}  // namespace

std::string per_image_csv(const MetricsReport& rep) {
  std::ostringstream os;
  os << "id,class,iou,dice,sn,sp\n";
  for (const auto& m : rep.per_image) {
    os << m.id << "," << (m.cls ? lesion_class_name(*m.cls) : "-") << "," << fmt3(m.iou)
       << "," << fmt3(m.dice) << "," << fmt3(m.sn) << "," << fmt3(m.sp) << "\n";
  }
  return os.str();
}

std::string aggregate_csv(const MetricsReport& rep) {
  std::ostringstream os;
  os << "metric,nev,mel,sk,overall\n";
  const std::pair<const char*, double MetricsBlock::*> rows[] = {
      {"mIoU", &MetricsBlock::miou},
      {"mDice", &MetricsBlock::mdice},
      {"mSn", &MetricsBlock::msn},
      {"mSp", &MetricsBlock::msp}};
  for (const auto& [name, field] : rows) {
    os << name;
    for (LesionClass cls : kClassOrder) os << "," << block_cell(rep, cls, field);
    os << "," << fmt3(rep.overall.*field) << "\n";
  }
  os << "AUC";
  for (LesionClass cls : kClassOrder) {
    auto it = rep.per_class.find(cls);
    os << ","
       << (it != rep.per_class.end() && it->second.auc ? fmt3(*it->second.auc) : "-");
  }
  os << "," << (rep.overall.auc ? fmt3(*rep.overall.auc) : "-") << "\n";
  return os.str();
}

std::string aggregate_text(const MetricsReport& rep, bool include_reference_rows) {
  std::ostringstream os;
  os << "split: " << rep.split << "   images: " << rep.overall.n << "\n";
  os << std::left << std::setw(8) << "metric" << std::right << std::setw(8) << "nev"
     << std::setw(8) << "mel" << std::setw(8) << "sk" << std::setw(9) << "overall" << "\n";
  const std::pair<const char*, double MetricsBlock::*> rows[] = {
      {"mIoU", &MetricsBlock::miou},
      {"mDice", &MetricsBlock::mdice},
      {"mSn", &MetricsBlock::msn},
      {"mSp", &MetricsBlock::msp}};
  for (const auto& [name, field] : rows) {
    os << std::left << std::setw(8) << name;
    for (LesionClass cls : kClassOrder) {
      os << std::right << std::setw(8) << block_cell(rep, cls, field);
    }
    os << std::right << std::setw(9) << fmt3(rep.overall.*field) << "\n";
  }
  os << std::left << std::setw(8) << "AUC";
  for (LesionClass cls : kClassOrder) {
    auto it = rep.per_class.find(cls);
    os << std::right << std::setw(8)
       << (it != rep.per_class.end() && it->second.auc ? fmt3(*it->second.auc) : "-");
  }
  os << std::right << std::setw(9) << (rep.overall.auc ? fmt3(*rep.overall.auc) : "-")
     << "\n";
  if (rep.mean_per_image_auc) {
    os << "mean per-image AUC: " << fmt3(*rep.mean_per_image_auc) << "\n";
  }
  os << "mean inference time per image: " << std::fixed << std::setprecision(4)
     << rep.mean_inference_seconds << " s (reported DSNet reference: 0.595 s)\n";
  if (rep.empty_predictions > 0 || rep.degenerate_thresholds > 0) {
    os << "warnings: " << rep.empty_predictions << " empty predictions, "
       << rep.degenerate_thresholds << " degenerate thresholds\n";
  }
  if (include_reference_rows) {
    os << "reference (reported DSNet results, for context only):\n";
    os << "  ISIC-2017 test: mIoU " << fmt3(ReferenceScores::isic_miou) << "  mSn "
       << fmt3(ReferenceScores::isic_msn) << "  mSp " << fmt3(ReferenceScores::isic_msp)
       << "  AUC " << fmt3(ReferenceScores::isic_auc) << "\n";
    os << "  PH2:            mIoU " << fmt3(ReferenceScores::ph2_miou) << "  mSn "
       << fmt3(ReferenceScores::ph2_msn) << "  mSp " << fmt3(ReferenceScores::ph2_msp)
       << "  AUC " << fmt3(ReferenceScores::ph2_auc) << "\n";
  }
  return os.str();
}

std::string roc_text(const RocCurve& curve) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (const auto& p : curve.points) os << p.fpr << " " << p.tpr << "\n";
  return os.str();
}

RocCurve roc_from_text(const std::string& text) {
  RocCurve c;
  std::istringstream is(text);
  double fpr = 0.0, tpr = 0.0;
  while (is >> fpr >> tpr) c.points.push_back({fpr, tpr});
  double auc = 0.0;
  for (size_t i = 1; i < c.points.size(); ++i) {
    auc += (c.points[i].fpr - c.points[i - 1].fpr) *
           (c.points[i].tpr + c.points[i - 1].tpr) * 0.5;
  }
  c.auc = auc;
  return c;
}

namespace {
std::string format_params(int64_t p) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << (static_cast<double>(p) / 1e6) << "M";
  return os.str();
}
}  // namespace

std::string comparison_csv(std::vector<ComparisonRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ComparisonRow& a, const ComparisonRow& b) { return a.miou > b.miou; });
  std::ostringstream os;
  os << "run,network,parameters,loss,mIoU,mSn,mSp,AUC\n";
  for (const auto& r : rows) {
    os << r.run << "," << r.network << "," << r.parameters << "," << r.loss << ","
       << fmt3(r.miou) << "," << fmt3(r.msn) << "," << fmt3(r.msp) << ","
       << (r.auc ? fmt3(*r.auc) : "-") << "\n";
  }
  return os.str();
}

std::string comparison_text(std::vector<ComparisonRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ComparisonRow& a, const ComparisonRow& b) { return a.miou > b.miou; });
  std::ostringstream os;
  os << std::left << std::setw(18) << "run" << std::setw(9) << "network" << std::right
     << std::setw(12) << "params" << std::left << "  " << std::setw(15) << "loss"
     << std::right << std::setw(7) << "mIoU" << std::setw(7) << "mSn" << std::setw(7)
     << "mSp" << std::setw(7) << "AUC" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(18) << r.run << std::setw(9) << r.network << std::right
       << std::setw(12) << format_params(r.parameters) << std::left << "  " << std::setw(15)
       << r.loss << std::right << std::setw(7) << fmt3(r.miou) << std::setw(7)
       << fmt3(r.msn) << std::setw(7) << fmt3(r.msp) << std::setw(7)
       << (r.auc ? fmt3(*r.auc) : "-") << "\n";
  }
  return os.str();
}

Tensor render_overlay(const Tensor& image_hw3, const BinaryMask& pred, const BinaryMask& gt,
                      const OverlaySpec& spec) {
  const int h = image_hw3.dim(0);
  const int w = image_hw3.dim(1);
  if (pred.h != h || pred.w != w || gt.h != h || gt.w != w) {
    throw std::invalid_argument("render_overlay: mask dims differ from the image");
  }
  const ConfusionCounts c = confusion(pred, gt);
  const double dice_v = dice(c);
  const double iou_v = iou_hard(c);

  Tensor out({h + spec.header_px, w, 3});
  float* od = out.data();
  // header strip: white
  std::fill(od, od + static_cast<int64_t>(spec.header_px) * w * 3, 1.0f);

  const float* img = image_hw3.data();
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const int64_t src = (static_cast<int64_t>(r) * w + col) * 3;
      const int64_t dst = (static_cast<int64_t>(r + spec.header_px) * w + col) * 3;
      const bool p = pred.at(r, col) != 0;
      const bool g = gt.at(r, col) != 0;
      const float* color = nullptr;
      if (p && g)
        color = spec.tp_color;
      else if (!p && g)
        color = spec.fn_color;
      else if (p && !g)
        color = spec.fp_color;
      if (color) {
        od[dst] = color[0];
        od[dst + 1] = color[1];
        od[dst + 2] = color[2];
      } else {
        od[dst] = img[src];
        od[dst + 1] = img[src + 1];
        od[dst + 2] = img[src + 2];
      }
    }
  }

  // annotations live in the header strip only
  cv::Mat canvas(out.dim(0), out.dim(1), CV_32FC3, out.data());
  const std::string left = "Dice " + fmt3(dice_v);
  const std::string right = "IoU " + fmt3(iou_v);
  const int baseline_y = spec.header_px - 9;
  cv::putText(canvas, left, cv::Point(4, baseline_y), cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0), 1, cv::LINE_8);
  int base = 0;
  const cv::Size ts = cv::getTextSize(right, cv::FONT_HERSHEY_SIMPLEX, 0.45, 1, &base);
  cv::putText(canvas, right, cv::Point(w - ts.width - 4, baseline_y),
              cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
  return out;
}

void write_line_plot_png(const std::filesystem::path& file, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series, bool unit_diagonal) {
  const int W = 720, H = 540;
  const int ml = 72, mr = 24, mt = 44, mb = 56;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));

  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        first = false;
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (unit_diagonal) {
    x_lo = std::min(x_lo, 0.0);
    y_lo = std::min(y_lo, 0.0);
    x_hi = std::max(x_hi, 1.0);
    y_hi = std::max(y_hi, 1.0);
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;

  const auto px = [&](double x) {
    return ml + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (W - ml - mr)));
  };
  const auto py = [&](double y) {
    return H - mb - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * (H - mt - mb)));
  };

  // axes and ticks
  cv::rectangle(img, cv::Point(ml, mt), cv::Point(W - mr, H - mb), cv::Scalar(40, 40, 40));
  char buf[32];
  for (int t = 0; t <= 5; ++t) {
    const double xv = x_lo + (x_hi - x_lo) * t / 5.0;
    const double yv = y_lo + (y_hi - y_lo) * t / 5.0;
    cv::line(img, cv::Point(px(xv), H - mb), cv::Point(px(xv), H - mb + 4),
             cv::Scalar(40, 40, 40));
    std::snprintf(buf, sizeof buf, "%.2f", xv);
    cv::putText(img, buf, cv::Point(px(xv) - 18, H - mb + 18), cv::FONT_HERSHEY_SIMPLEX,
                0.38, cv::Scalar(40, 40, 40));
    cv::line(img, cv::Point(ml - 4, py(yv)), cv::Point(ml, py(yv)), cv::Scalar(40, 40, 40));
    std::snprintf(buf, sizeof buf, "%.2f", yv);
    cv::putText(img, buf, cv::Point(8, py(yv) + 4), cv::FONT_HERSHEY_SIMPLEX, 0.38,
                cv::Scalar(40, 40, 40));
  }
  cv::putText(img, title, cv::Point(ml, 26), cv::FONT_HERSHEY_SIMPLEX, 0.55,
              cv::Scalar(0, 0, 0), 1);
  cv::putText(img, xlabel, cv::Point(W / 2 - 40, H - 14), cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0));
  cv::putText(img, ylabel, cv::Point(8, mt - 10), cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0));

  if (unit_diagonal) {
    // dashed chance line
    const int steps = 40;
    for (int i = 0; i < steps; i += 2) {
      const double a = static_cast<double>(i) / steps;
      const double b = static_cast<double>(i + 1) / steps;
      cv::line(img, cv::Point(px(a), py(a)), cv::Point(px(b), py(b)),
               cv::Scalar(140, 140, 140), 1);
    }
  }

  const cv::Scalar palette[] = {cv::Scalar(180, 60, 20), cv::Scalar(30, 120, 30),
                                cv::Scalar(20, 60, 200), cv::Scalar(160, 30, 160),
                                cv::Scalar(0, 140, 200)};
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const cv::Scalar color = palette[si % 5];
    for (size_t i = 1; i < s.x.size(); ++i) {
      cv::line(img, cv::Point(px(s.x[i - 1]), py(s.y[i - 1])),
               cv::Point(px(s.x[i]), py(s.y[i])), color, 2, cv::LINE_AA);
    }
    cv::putText(img, s.label, cv::Point(W - mr - 170, mt + 20 + 18 * static_cast<int>(si)),
                cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1);
  }
  if (!cv::imwrite(file.string(), img)) {
    throw std::runtime_error("cannot write plot: " + file.string());
  }
}

}  // namespace dsnet
