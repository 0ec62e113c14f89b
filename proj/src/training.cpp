#include "dsnet/training.hpp"

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>

#include "dsnet/checkpoint.hpp"
#include "dsnet/postprocess.hpp"

namespace dsnet {

bool plateau_update(TrainingState& state, double monitored, const TrainingConfig& cfg) {
  const bool improved = monitored < state.best - cfg.improvement_tol;
  if (improved) {
    state.best = monitored;
    state.wait = 0;
    return true;
  }
  ++state.wait;
  if (state.wait >= cfg.plateau_patience) {
    state.lr *= cfg.plateau_factor;
    state.reductions += 1;
    state.wait = 0;
  }
  return false;
}

Adadelta::Adadelta(std::vector<Param*> params, double rho, double eps)
    : rho_(rho), eps_(eps) {
  for (Param* p : params) {
    if (!p->trainable) continue;
    Slot s;
    s.p = p;
    s.acc_grad2.assign(static_cast<size_t>(p->value.numel()), 0.0f);
    s.acc_update2.assign(static_cast<size_t>(p->value.numel()), 0.0f);
    slots_.push_back(std::move(s));
  }
}

void Adadelta::step(double lr) {
  const float rho = static_cast<float>(rho_);
  const float eps = static_cast<float>(eps_);
  const float flr = static_cast<float>(lr);
  for (auto& s : slots_) {
    s.p->ensure_grad();
    const int64_t n = s.p->value.numel();
    float* v = s.p->value.data();
    const float* g = s.p->grad.data();
    float* eg2 = s.acc_grad2.data();
    float* ex2 = s.acc_update2.data();
    for (int64_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw TrainingError("non-finite gradient in parameter '" + s.p->name + "'");
      }
      eg2[i] = rho * eg2[i] + (1.0f - rho) * g[i] * g[i];
      const float update = -std::sqrt(ex2[i] + eps) / std::sqrt(eg2[i] + eps) * g[i];
      ex2[i] = rho * ex2[i] + (1.0f - rho) * update * update;
      v[i] += flr * update;
    }
  }
}

namespace {

double batch_loss_and_grad(Model& model, const Batch& batch, LossKind kind, Tensor& grad) {
  const Tensor& probs = model.forward(batch.images, /*train=*/true);
  grad.resize(probs.dims());
  const size_t n = static_cast<size_t>(probs.numel());
  const double loss = loss_value_and_grad(
      kind, std::span<const float>(batch.masks.data(), n),
      std::span<const float>(probs.data(), n), std::span<float>(grad.data(), n));
  return loss;
}

struct ValScores {
  double loss = 0.0;
  double miou = 0.0;
};

ValScores validation_pass(Model& model, const std::vector<ImageSample>& val, LossKind kind,
                          int batch_size) {
  ValScores out;
  double loss_sum = 0.0;
  double iou_sum = 0.0;
  int64_t n_images = 0;

  const int h = val[0].image.dim(0);
  const int w = val[0].image.dim(1);
  for (size_t at = 0; at < val.size(); at += static_cast<size_t>(batch_size)) {
    const size_t n = std::min(static_cast<size_t>(batch_size), val.size() - at);
    Tensor images({static_cast<int>(n), h, w, 3});
    Tensor masks({static_cast<int>(n), h, w, 1});
    for (size_t k = 0; k < n; ++k) {
      const ImageSample& s = val[at + k];
      std::copy(s.image.data(), s.image.data() + s.image.numel(),
                images.data() + static_cast<int64_t>(k) * h * w * 3);
      float* m = masks.data() + static_cast<int64_t>(k) * h * w;
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        m[i] = static_cast<float>(s.mask->v[static_cast<size_t>(i)]);
      }
    }
    const Tensor& probs = model.forward(images, /*train=*/false);
    const size_t numel = static_cast<size_t>(probs.numel());
    const std::vector<double> yd(masks.data(), masks.data() + numel);
    const std::vector<double> pd(probs.data(), probs.data() + numel);
    loss_sum += static_cast<double>(n) * loss_value(kind, yd, pd);
    for (size_t k = 0; k < n; ++k) {
      ProbMapView view{h, w,
                       std::span<const float>(
                           probs.data() + static_cast<int64_t>(k) * h * w,
                           static_cast<size_t>(h) * w)};
      const PostprocessResult post = postprocess(view);
      iou_sum += iou_hard(confusion(post.mask, *val[at + k].mask));
      ++n_images;
    }
  }
  out.loss = loss_sum / static_cast<double>(val.size());
  out.miou = iou_sum / static_cast<double>(n_images);
  return out;
}

}  // namespace

TrainResult train(Model& model, const std::vector<ImageSample>& train_samples,
                  const std::vector<ImageSample>& val_samples, const TrainingConfig& cfg) {
  cfg.validate();
  if (train_samples.empty()) throw TrainingError("train: empty training set");
  if (val_samples.empty()) throw TrainingError("train: empty validation set");
  for (const auto& s : train_samples) {
    if (!s.mask) throw TrainingError("train: sample '" + s.id + "' has no mask");
  }
  for (const auto& s : val_samples) {
    if (!s.mask) throw TrainingError("train: validation sample '" + s.id + "' has no mask");
  }

  TrainResult result;
  TrainingState& state = result.state;
  state.lr = cfg.initial_lr;
  if (cfg.max_epochs == 0) return result;

  const int batch =
      std::min<int>(cfg.batch_size, static_cast<int>(train_samples.size()));
  BatchIterator it(train_samples, batch, cfg.augment, cfg.augmentation, cfg.seed);
  Adadelta opt(model.net.params(), cfg.rho, cfg.adadelta_eps);

  Tensor grad;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    it.start_epoch(epoch);
    double loss_sum = 0.0;
    int64_t seen = 0;
    Batch b;
    while (it.next(b)) {
      const double loss = batch_loss_and_grad(model, b, cfg.loss, grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch) + ", lr " + std::to_string(state.lr));
      }
      model.net.zero_param_grads();
      model.net.backward(grad);
      opt.step(state.lr);
      loss_sum += loss * b.images.dim(0);
      seen += b.images.dim(0);
    }
    const double train_loss = loss_sum / static_cast<double>(seen);

    const ValScores val = validation_pass(model, val_samples, cfg.loss, batch);
    const bool improved = plateau_update(state, val.loss, cfg);
    state.epoch = epoch;
    state.history.push_back({epoch, train_loss, val.loss, val.miou, state.lr});

    if (improved && !cfg.checkpoint_path.empty()) {
      nlohmann::json meta;
      meta["network"] = network_kind_name(model.kind);
      meta["spec"] = nlohmann::json::parse(network_spec_to_json(model.spec));
      meta["epoch"] = epoch;
      meta["val_loss"] = val.loss;
      save_checkpoint(model.net, cfg.checkpoint_path, meta.dump());
      result.checkpoint_written = true;
    }
  }
  return result;
}

MetricsReport evaluate(Model& model, const std::vector<ImageSample>& samples,
                       const EvaluateOptions& opt) {
  return evaluate_with(
      [&model](const Tensor& images) -> Tensor { return model.forward(images, false); },
      samples, opt);
}

MetricsReport evaluate_with(const ForwardFn& forward, const std::vector<ImageSample>& samples,
                            const EvaluateOptions& opt) {
  return evaluate_with(forward, samples, opt, nullptr);
}

MetricsReport evaluate_with(const ForwardFn& forward, const std::vector<ImageSample>& samples,
                            const EvaluateOptions& opt, PooledRoc* roc_out) {
  if (samples.empty()) throw TrainingError("evaluate: empty sample set");
  for (const auto& s : samples) {
    if (!s.mask) throw TrainingError("evaluate: sample '" + s.id + "' has no mask");
  }

  const int h = samples[0].image.dim(0);
  const int w = samples[0].image.dim(1);
  const int64_t px = static_cast<int64_t>(h) * w;

  std::vector<PerImageMetrics> per_image;
  per_image.reserve(samples.size());
  std::vector<float> pooled_scores;
  std::vector<uint8_t> pooled_labels;
  pooled_scores.reserve(samples.size() * static_cast<size_t>(px));
  pooled_labels.reserve(samples.size() * static_cast<size_t>(px));
  std::map<LesionClass, std::pair<std::vector<float>, std::vector<uint8_t>>> pooled_cls;
  std::vector<double> image_aucs;

  int empty_predictions = 0;
  int degenerate = 0;
  double seconds = 0.0;

  for (size_t at = 0; at < samples.size(); at += static_cast<size_t>(opt.batch_size)) {
    const size_t n = std::min(static_cast<size_t>(opt.batch_size), samples.size() - at);
    Tensor images({static_cast<int>(n), h, w, 3});
    for (size_t k = 0; k < n; ++k) {
      std::copy(samples[at + k].image.data(),
                samples[at + k].image.data() + samples[at + k].image.numel(),
                images.data() + static_cast<int64_t>(k) * px * 3);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const Tensor probs = forward(images);
    if (probs.numel() != static_cast<int64_t>(n) * px) {
      throw TrainingError("evaluate: prediction shape mismatch");
    }

    for (size_t k = 0; k < n; ++k) {
      const ImageSample& s = samples[at + k];
      ProbMapView view{h, w,
                       std::span<const float>(probs.data() + static_cast<int64_t>(k) * px,
                                              static_cast<size_t>(px))};
      const PostprocessResult post = postprocess(view);
      if (post.empty_prediction) ++empty_predictions;
      if (post.threshold.degenerate || post.threshold.hit_cap) ++degenerate;

      const ConfusionCounts c = confusion(post.mask, *s.mask);
      PerImageMetrics m;
      m.id = s.id;
      m.cls = s.cls;
      m.iou = iou_hard(c);
      m.dice = dice(c);
      m.sn = sensitivity(c);
      m.sp = specificity(c);
      per_image.push_back(std::move(m));

      for (int64_t i = 0; i < px; ++i) {
        const float score = view.v[static_cast<size_t>(i)];
        const uint8_t label = s.mask->v[static_cast<size_t>(i)];
        pooled_scores.push_back(score);
        pooled_labels.push_back(label);
        if (s.cls) {
          pooled_cls[*s.cls].first.push_back(score);
          pooled_cls[*s.cls].second.push_back(label);
        }
      }
      if (opt.per_image_auc) {
        try {
          image_aucs.push_back(
              roc_and_auc(view.v, std::span<const uint8_t>(s.mask->v)).auc);
        } catch (const std::invalid_argument&) {
          // single-class image: undefined, skipped from the per-image mean
        }
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    seconds += std::chrono::duration<double>(t1 - t0).count();
  }

  MetricsReport rep = aggregate_report(std::move(per_image));
  rep.mean_inference_seconds = seconds / static_cast<double>(samples.size());
  rep.empty_predictions = empty_predictions;
  rep.degenerate_thresholds = degenerate;
  rep.split = samples[0].source == Split::ph2 ? "ph2" : split_name(samples[0].source);

  try {
    const RocCurve curve = roc_and_auc(pooled_scores, pooled_labels);
    rep.overall.auc = curve.auc;
    if (roc_out) roc_out->overall = curve;
  } catch (const std::invalid_argument&) {
    // AUC undefined when the pooled labels are single-class
  }
  for (auto& [cls, sl] : pooled_cls) {
    try {
      const RocCurve curve = roc_and_auc(sl.first, sl.second);
      if (rep.per_class.count(cls)) rep.per_class[cls].auc = curve.auc;
      if (roc_out) roc_out->per_class[cls] = curve;
    } catch (const std::invalid_argument&) {
    }
  }
  if (opt.per_image_auc && !image_aucs.empty()) {
    double s = 0.0;
    for (double a : image_aucs) s += a;
    rep.mean_per_image_auc = s / static_cast<double>(image_aucs.size());
  }
  return rep;
}

std::string training_state_json(const TrainingState& state, const TrainingConfig& cfg) {
  nlohmann::json j;
  j["epoch"] = state.epoch;
  j["lr"] = state.lr;
  j["best"] = std::isfinite(state.best) ? nlohmann::json(state.best) : nlohmann::json();
  j["wait"] = state.wait;
  j["reductions"] = state.reductions;
  j["config"] = {{"initial_lr", cfg.initial_lr},
                 {"rho", cfg.rho},
                 {"plateau_patience", cfg.plateau_patience},
                 {"plateau_factor", cfg.plateau_factor},
                 {"improvement_tol", cfg.improvement_tol},
                 {"max_epochs", cfg.max_epochs},
                 {"batch_size", cfg.batch_size},
                 {"loss", loss_kind_name(cfg.loss)},
                 {"augment", cfg.augment},
                 {"seed", cfg.seed}};
  j["history"] = nlohmann::json::array();
  for (const auto& r : state.history) {
    j["history"].push_back({{"epoch", r.epoch},
                            {"train_loss", r.train_loss},
                            {"val_loss", r.val_loss},
                            {"val_miou", r.val_miou},
                            {"lr", r.lr}});
  }
  return j.dump(2);
}

}  // namespace dsnet
