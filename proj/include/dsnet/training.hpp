#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/metrics.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingConfig {
  double initial_lr = 1.0;
  double rho = 0.95;          // adadelta accumulator decay
  double adadelta_eps = 1e-7;
  int plateau_patience = 8;   // stagnant epochs before a cut
  double plateau_factor = 0.6;
  double improvement_tol = 1e-4;
  int max_epochs = 100;
  int batch_size = 16;
  LossKind loss = LossKind::combined;
  bool augment = true;
  AugmentationParams augmentation;
  uint64_t seed = 0;
  std::filesystem::path checkpoint_path;  // empty disables checkpointing

  void validate() const {
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
      throw TrainingError("plateau_factor must be in (0,1)");
    }
    if (plateau_patience < 1) throw TrainingError("plateau_patience must be >= 1");
    if (batch_size < 1) throw TrainingError("batch_size must be >= 1");
    if (max_epochs < 0) throw TrainingError("max_epochs must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_miou = 0.0;
  double lr = 0.0;
};

struct TrainingState {
  int epoch = 0;
  double lr = 1.0;
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;        // epochs since the last improvement
  int reductions = 0;  // lr cuts applied
  std::vector<EpochRecord> history;
};

// Patience rule: the monitored value improves when it is below best by more
// than the tolerance; `patience` consecutive stagnant epochs multiply the
// learning rate by `factor` and restart the count. Returns whether this
// update was an improvement.
bool plateau_update(TrainingState& state, double monitored, const TrainingConfig& cfg);

// Adadelta (accumulated squared gradients and squared updates, decay rho),
// scaled by the scheduler's current learning rate. Throws on non-finite
// gradients, naming the parameter.
class Adadelta {
 public:
  explicit Adadelta(std::vector<Param*> params, double rho = 0.95, double eps = 1e-7);
  void step(double lr);

 private:
  struct Slot {
    Param* p;
    std::vector<float> acc_grad2;
    std::vector<float> acc_update2;
  };
  std::vector<Slot> slots_;
  double rho_, eps_;
};

struct TrainResult {
  TrainingState state;
  bool checkpoint_written = false;
};

// Epochs of adadelta over shuffled (optionally augmented) batches minimizing
// cfg.loss; per-epoch validation loss + mIoU, plateau scheduling, and
// best-validation checkpointing. Fully reproducible per seed.
TrainResult train(Model& model, const std::vector<ImageSample>& train_samples,
                  const std::vector<ImageSample>& val_samples, const TrainingConfig& cfg);

struct EvaluateOptions {
  int batch_size = 4;
  bool per_image_auc = false;  // also aggregate per-image AUCs (pooled is primary)
};

using ForwardFn = std::function<Tensor(const Tensor& images)>;

// forward -> isodata/largest-component post-processing -> per-image metrics ->
// class-stratified aggregation with pooled-pixel ROC/AUC and per-image timing.
MetricsReport evaluate_with(const ForwardFn& forward, const std::vector<ImageSample>& samples,
                            const EvaluateOptions& opt = {});
MetricsReport evaluate(Model& model, const std::vector<ImageSample>& samples,
                       const EvaluateOptions& opt = {});

// Pooled pixel scores/labels kept per class for ROC export.
struct PooledRoc {
  RocCurve overall;
  std::map<LesionClass, RocCurve> per_class;
};

MetricsReport evaluate_with(const ForwardFn& forward, const std::vector<ImageSample>& samples,
                            const EvaluateOptions& opt, PooledRoc* roc_out);

std::string training_state_json(const TrainingState& state, const TrainingConfig& cfg);

}  // namespace dsnet
