#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet::testing {

namespace fs = std::filesystem;

// Skin-like background with a darker elliptical lesion; mask = the ellipse.
inline ImageSample make_lesion_sample(int h, int w, double cx_frac, double cy_frac,
                                      double rx_frac, double ry_frac, uint64_t seed,
                                      const std::string& id = "sample") {
  ImageSample s;
  s.id = id;
  s.image.resize({h, w, 3});
  BinaryMask mask(h, w, MaskProvenance::ground_truth);
  Rng rng(seed);
  const double cx = cx_frac * w, cy = cy_frac * h;
  const double rx = rx_frac * w, ry = ry_frac * h;
  float* img = s.image.data();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = (c - cx) / rx, dy = (r - cy) / ry;
      const bool inside = dx * dx + dy * dy <= 1.0;
      const double n = rng.uniform(-0.03, 0.03);
      const int64_t at = (static_cast<int64_t>(r) * w + c) * 3;
      if (inside) {
        img[at] = static_cast<float>(0.35 + n);
        img[at + 1] = static_cast<float>(0.22 + n);
        img[at + 2] = static_cast<float>(0.18 + n);
        mask.at(r, c) = 1;
      } else {
        img[at] = static_cast<float>(0.78 + n);
        img[at + 1] = static_cast<float>(0.62 + n);
        img[at + 2] = static_cast<float>(0.55 + n);
      }
    }
  }
  s.mask = std::move(mask);
  return s;
}

inline std::vector<ImageSample> make_fixture_samples(int n, int h, int w, uint64_t seed) {
  std::vector<ImageSample> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double cx = rng.uniform(0.34, 0.66);
    const double cy = rng.uniform(0.34, 0.66);
    const double rx = rng.uniform(0.14, 0.26);
    const double ry = rng.uniform(0.14, 0.26);
    out.push_back(
        make_lesion_sample(h, w, cx, cy, rx, ry, seed + 101 * i, "fx" + std::to_string(i)));
    out.back().cls = static_cast<LesionClass>(i % 3);
  }
  return out;
}

// Writes a normalized dataset layout (<root>/<split>/{images,masks,labels.csv}).
inline void write_fixture_dataset(const fs::path& root, const std::string& split,
                                  int n_per_class, int h, int w, uint64_t seed,
                                  const char* image_ext = ".png") {
  const fs::path dir = root / split;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream labels(dir / "labels.csv");
  labels << "id,class\n";
  Rng rng(seed);
  int idx = 0;
  for (const char* cls : {"mel", "sk", "nev"}) {
    for (int i = 0; i < n_per_class; ++i) {
      const std::string id = "img" + std::to_string(idx++);
      ImageSample s = make_lesion_sample(h, w, rng.uniform(0.35, 0.65),
                                         rng.uniform(0.35, 0.65), rng.uniform(0.15, 0.25),
                                         rng.uniform(0.15, 0.25), seed + idx, id);
      write_rgb_png(dir / "images" / (id + image_ext), s.image);
      write_mask_png(dir / "masks" / (id + "_segmentation.png"), *s.mask);
      labels << id << "," << cls << "\n";
    }
  }
}

inline fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("dsnet_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace dsnet::testing
