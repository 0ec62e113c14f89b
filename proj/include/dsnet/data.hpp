#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsnet/mask.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"
#include "dsnet/types.hpp"

namespace dsnet {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Manifests
//
// Normalized dataset layout:
//   <root>/<split>/images/<id>.jpg            (also .jpeg/.png/.bmp)
//   <root>/<split>/masks/<id>_segmentation.png  (8-bit, {0,255})
//   <root>/<split>/labels.csv                 (id,class with class in mel|sk|nev)

struct ManifestRecord {
  std::string id;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::optional<LesionClass> cls;
};

struct DatasetManifest {
  std::filesystem::path root;
  Split split = Split::isic_test;
  std::vector<ManifestRecord> records;
  std::map<LesionClass, double> class_proportions;  // empty without labels.csv

  size_t size() const { return records.size(); }
};

DatasetManifest load_manifest(const std::filesystem::path& root, Split split);

// ---------------------------------------------------------------------------
// Samples and preprocessing

struct PreprocessOptions {
  int target_height = 192;
  int target_width = 256;
  // Optional per-image, per-channel standardization (z-score re-ranged back
  // into [0,1]); plain 1/255 scaling when off.
  bool per_channel_standardize = false;
};

struct ImageSample {
  std::string id;
  Tensor image;  // (H, W, 3), values in [0,1]
  std::optional<BinaryMask> mask;
  std::optional<LesionClass> cls;
  Split source = Split::isic_test;
};

// Decoded 8-bit image, RGB interleaved.
struct RawImage {
  int h = 0, w = 0, c = 0;
  std::vector<uint8_t> pixels;
};

RawImage read_image_rgb(const std::filesystem::path& file);
BinaryMask read_mask_png(const std::filesystem::path& file);
void write_mask_png(const std::filesystem::path& file, const BinaryMask& mask);
void write_prob_png16(const std::filesystem::path& file, const ProbMapView& map);
void write_rgb_png(const std::filesystem::path& file, const Tensor& image_hw3);

// Resize to the target grid (bilinear for the image, nearest + re-binarize for
// the mask) and scale intensities into [0,1]. Aspect ratio is not preserved.
ImageSample canonicalize(const RawImage& img, const BinaryMask* raw_mask, std::string id,
                         Split source, std::optional<LesionClass> cls,
                         const PreprocessOptions& opt = {});

ImageSample load_sample(const ManifestRecord& rec, Split source,
                        const PreprocessOptions& opt = {});
std::vector<ImageSample> load_samples(const DatasetManifest& manifest,
                                      const PreprocessOptions& opt = {});

// ---------------------------------------------------------------------------
// Paired geometric augmentation

struct AugmentationParams {
  double rotation_deg = 40.0;  // sampled in [-r, r]
  double zoom_frac = 0.10;     // scale sampled in [1-z, 1+z]
  double shift_frac = 0.10;    // of each dimension
  bool hflip = true;
  bool vflip = true;

  void validate() const {
    if (rotation_deg < 0 || zoom_frac < 0 || shift_frac < 0) {
      throw DataError("augmentation ranges must be nonnegative");
    }
    if (zoom_frac >= 1.0) throw DataError("zoom range must be < 1");
  }
};

struct GeometricTransform {
  double angle_deg = 0.0;
  double zoom = 1.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  bool hflip = false;
  bool vflip = false;

  bool is_identity() const {
    return angle_deg == 0.0 && zoom == 1.0 && shift_x == 0.0 && shift_y == 0.0 && !hflip &&
           !vflip;
  }
};

GeometricTransform sample_transform(const AugmentationParams& p, Rng& rng);

// Applies the same spatial map to image (bilinear, reflect padding) and mask
// (nearest, re-binarized). Output dims are unchanged.
ImageSample apply_transform(const ImageSample& s, const GeometricTransform& t);

// One random draw from p applied to the sample; requires a mask.
ImageSample augment(const ImageSample& s, const AugmentationParams& p, Rng& rng);

// ---------------------------------------------------------------------------
// Batch iteration

struct Batch {
  Tensor images;  // (B, H, W, 3)
  Tensor masks;   // (B, H, W, 1), values {0,1}
  std::vector<std::string> ids;
};

// Epoch-shuffled, seed-deterministic batches over preloaded samples. Every
// epoch covers each sample exactly once (before augmentation); the final
// partial batch is emitted.
class BatchIterator {
 public:
  BatchIterator(std::vector<ImageSample> samples, int batch_size, bool augment,
                AugmentationParams params, uint64_t seed);

  void start_epoch(int epoch);
  bool next(Batch& out);

  size_t sample_count() const { return samples_.size(); }
  int batches_per_epoch() const {
    return static_cast<int>((samples_.size() + batch_ - 1) / batch_);
  }

 private:
  std::vector<ImageSample> samples_;
  int batch_;
  bool augment_;
  AugmentationParams params_;
  uint64_t seed_;
  int epoch_ = 0;
  size_t cursor_ = 0;
  std::vector<uint32_t> order_;
};

// ---------------------------------------------------------------------------
// Dataset preparation (raw ISIC / PH2 downloads -> normalized layout)

struct PrepareSummary {
  std::vector<std::pair<std::string, int>> split_counts;
  std::map<std::string, std::map<LesionClass, double>> proportions;  // per split
  bool already_normalized = false;
  int total = 0;
};

PrepareSummary prepare_dataset(const std::filesystem::path& raw_root,
                               const std::filesystem::path& target_root);

}  // namespace dsnet
