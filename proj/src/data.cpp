#include "dsnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace dsnet {

namespace {

const std::set<std::string> kImageExts = {".jpg", ".jpeg", ".png", ".bmp"};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return kImageExts.count(ext) > 0;
}

cv::Mat tensor_to_mat(const Tensor& image) {
  // (H, W, 3) float tensor shares the row-major layout of CV_32FC3.
  return cv::Mat(image.dim(0), image.dim(1), CV_32FC3,
                 const_cast<float*>(image.data()));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Image I/O

RawImage read_image_rgb(const fs::path& file) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image: " + file.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RawImage out;
  out.h = rgb.rows;
  out.w = rgb.cols;
  out.c = 3;
  out.pixels.assign(rgb.data, rgb.data + static_cast<size_t>(rgb.total()) * 3);
  return out;
}

BinaryMask read_mask_png(const fs::path& file) {
  cv::Mat gray = cv::imread(file.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw DataError("cannot decode mask: " + file.string());
  BinaryMask m(gray.rows, gray.cols, MaskProvenance::ground_truth);
  for (int r = 0; r < gray.rows; ++r) {
    const uint8_t* row = gray.ptr<uint8_t>(r);
    for (int c = 0; c < gray.cols; ++c) m.at(r, c) = row[c] > 127 ? 1 : 0;
  }
  return m;
}

void write_mask_png(const fs::path& file, const BinaryMask& mask) {
  cv::Mat gray(mask.h, mask.w, CV_8UC1);
  for (int r = 0; r < mask.h; ++r) {
    uint8_t* row = gray.ptr<uint8_t>(r);
    for (int c = 0; c < mask.w; ++c) row[c] = mask.at(r, c) ? 255 : 0;
  }
  if (!cv::imwrite(file.string(), gray)) {
    throw DataError("cannot write mask: " + file.string());
  }
}

void write_prob_png16(const fs::path& file, const ProbMapView& map) {
  cv::Mat gray(map.h, map.w, CV_16UC1);
  for (int r = 0; r < map.h; ++r) {
    uint16_t* row = gray.ptr<uint16_t>(r);
    for (int c = 0; c < map.w; ++c) {
      const float v = std::clamp(map.v[static_cast<size_t>(r) * map.w + c], 0.0f, 1.0f);
      row[c] = static_cast<uint16_t>(std::lround(v * 65535.0));
    }
  }
  if (!cv::imwrite(file.string(), gray)) {
    throw DataError("cannot write probability map: " + file.string());
  }
}

void write_rgb_png(const fs::path& file, const Tensor& image_hw3) {
  cv::Mat f = tensor_to_mat(image_hw3);
  cv::Mat u8;
  f.convertTo(u8, CV_8UC3, 255.0);
  cv::Mat bgr;
  cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(file.string(), bgr)) {
    throw DataError("cannot write image: " + file.string());
  }
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const fs::path& root, Split split) {
  DatasetManifest m;
  m.root = root;
  m.split = split;
  const fs::path dir = root / split_name(split);
  const fs::path images = dir / "images";
  const fs::path masks = dir / "masks";
  if (!fs::is_directory(images)) {
    throw DataError("dataset split not found (no images directory): " + images.string());
  }

  // labels.csv: "id,class" rows; a header row is skipped.
  std::map<std::string, LesionClass> labels;
  bool have_labels = false;
  const fs::path labels_csv = dir / "labels.csv";
  if (fs::exists(labels_csv)) {
    have_labels = true;
    std::ifstream is(labels_csv);
    if (!is) throw DataError("cannot read " + labels_csv.string());
    std::string line;
    while (std::getline(is, line)) {
      line = trim(line);
      if (line.empty() || line == "id,class") continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw DataError("malformed labels row '" + line + "' in " + labels_csv.string());
      }
      const std::string id = trim(line.substr(0, comma));
      const std::string cls = trim(line.substr(comma + 1));
      labels[id] = lesion_class_from_name(cls);  // throws on unknown class
    }
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("empty dataset: no images under " + images.string());
  }

  std::map<LesionClass, int> counts;
  for (const auto& f : files) {
    ManifestRecord rec;
    rec.id = f.stem().string();
    rec.image_path = f;
    rec.mask_path = masks / (rec.id + "_segmentation.png");
    if (!fs::exists(rec.mask_path)) {
      throw DataError("missing mask for image '" + rec.id + "': " + rec.mask_path.string());
    }
    if (have_labels) {
      auto it = labels.find(rec.id);
      if (it == labels.end()) {
        throw DataError("image '" + rec.id + "' has no row in labels.csv");
      }
      rec.cls = it->second;
      counts[it->second] += 1;
    }
    m.records.push_back(std::move(rec));
  }
  for (const auto& [cls, n] : counts) {
    m.class_proportions[cls] = static_cast<double>(n) / static_cast<double>(m.records.size());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Canonicalization

ImageSample canonicalize(const RawImage& img, const BinaryMask* raw_mask, std::string id,
                         Split source, std::optional<LesionClass> cls,
                         const PreprocessOptions& opt) {
  if (img.c != 3 || img.h < 1 || img.w < 1) {
    throw DataError("canonicalize: expected an 8-bit RGB image for '" + id + "'");
  }
  if (raw_mask && (raw_mask->h != img.h || raw_mask->w != img.w)) {
    throw DataError("canonicalize: mask dims differ from image dims for '" + id + "'");
  }

  cv::Mat src(img.h, img.w, CV_8UC3, const_cast<uint8_t*>(img.pixels.data()));
  cv::Mat resized;
  cv::resize(src, resized, cv::Size(opt.target_width, opt.target_height), 0, 0,
             cv::INTER_LINEAR);

  ImageSample s;
  s.id = std::move(id);
  s.source = source;
  s.cls = cls;
  s.image.resize({opt.target_height, opt.target_width, 3});
  float* out = s.image.data();
  const int64_t pixels = static_cast<int64_t>(opt.target_height) * opt.target_width * 3;
  for (int64_t i = 0; i < pixels; ++i) {
    out[i] = static_cast<float>(resized.data[i]) / 255.0f;
  }

  if (opt.per_channel_standardize) {
    // Per-image channel z-score, re-ranged into [0,1] to keep the contract.
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0, sumsq = 0.0;
      const int64_t n = pixels / 3;
      for (int64_t i = 0; i < n; ++i) {
        const double v = out[i * 3 + c];
        sum += v;
        sumsq += v * v;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, sumsq / n - mean * mean);
      const double std_dev = std::sqrt(var);
      float lo = 0.0f, hi = 0.0f;
      if (std_dev > 1e-12) {
        lo = hi = static_cast<float>((out[c] - mean) / std_dev);
        for (int64_t i = 0; i < n; ++i) {
          const float z = static_cast<float>((out[i * 3 + c] - mean) / std_dev);
          out[i * 3 + c] = z;
          lo = std::min(lo, z);
          hi = std::max(hi, z);
        }
      }
      const float range = hi - lo;
      for (int64_t i = 0; i < n; ++i) {
        out[i * 3 + c] = range > 0.0f ? (out[i * 3 + c] - lo) / range : 0.5f;
      }
    }
  }

  if (raw_mask) {
    cv::Mat msrc(raw_mask->h, raw_mask->w, CV_8UC1, const_cast<uint8_t*>(raw_mask->v.data()));
    cv::Mat mres;
    cv::resize(msrc, mres, cv::Size(opt.target_width, opt.target_height), 0, 0,
               cv::INTER_NEAREST);
    BinaryMask mask(opt.target_height, opt.target_width, MaskProvenance::ground_truth);
    for (int r = 0; r < mask.h; ++r) {
      const uint8_t* row = mres.ptr<uint8_t>(r);
      for (int c = 0; c < mask.w; ++c) mask.at(r, c) = row[c] != 0 ? 1 : 0;
    }
    s.mask = std::move(mask);
  }
  return s;
}

ImageSample load_sample(const ManifestRecord& rec, Split source, const PreprocessOptions& opt) {
  const RawImage img = read_image_rgb(rec.image_path);
  BinaryMask mask = read_mask_png(rec.mask_path);
  return canonicalize(img, &mask, rec.id, source, rec.cls, opt);
}

std::vector<ImageSample> load_samples(const DatasetManifest& manifest,
                                      const PreprocessOptions& opt) {
  std::vector<ImageSample> out;
  out.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    out.push_back(load_sample(rec, manifest.split, opt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

GeometricTransform sample_transform(const AugmentationParams& p, Rng& rng) {
  p.validate();
  GeometricTransform t;
  t.angle_deg = rng.uniform(-p.rotation_deg, p.rotation_deg);
  t.zoom = rng.uniform(1.0 - p.zoom_frac, 1.0 + p.zoom_frac);
  t.shift_x = rng.uniform(-p.shift_frac, p.shift_frac);
  t.shift_y = rng.uniform(-p.shift_frac, p.shift_frac);
  t.hflip = p.hflip && rng.bernoulli(0.5);
  t.vflip = p.vflip && rng.bernoulli(0.5);
  return t;
}

ImageSample apply_transform(const ImageSample& s, const GeometricTransform& t) {
  const int h = s.image.dim(0);
  const int w = s.image.dim(1);
  ImageSample out;
  out.id = s.id;
  out.cls = s.cls;
  out.source = s.source;

  if (t.is_identity()) {
    out.image = s.image;
    out.mask = s.mask;
    return out;
  }

  // Forward map about the pixel-center of the grid:
  //   p' = R(angle) * S(zoom) * F(flips) * (p - c) + c + shift
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double rad = t.angle_deg * M_PI / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double fx = t.hflip ? -1.0 : 1.0;
  const double fy = t.vflip ? -1.0 : 1.0;
  const double a00 = cs * t.zoom * fx, a01 = -sn * t.zoom * fy;
  const double a10 = sn * t.zoom * fx, a11 = cs * t.zoom * fy;
  const double tx = cx + t.shift_x * w - (a00 * cx + a01 * cy);
  const double ty = cy + t.shift_y * h - (a10 * cx + a11 * cy);
  cv::Mat M = (cv::Mat_<double>(2, 3) << a00, a01, tx, a10, a11, ty);

  cv::Mat src = tensor_to_mat(s.image);
  cv::Mat dst;
  cv::warpAffine(src, dst, M, cv::Size(w, h), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  out.image.resize({h, w, 3});
  std::copy(dst.ptr<float>(0), dst.ptr<float>(0) + out.image.numel(), out.image.data());

  if (s.mask) {
    cv::Mat msrc(s.mask->h, s.mask->w, CV_8UC1, const_cast<uint8_t*>(s.mask->v.data()));
    cv::Mat mdst;
    cv::warpAffine(msrc, mdst, M, cv::Size(w, h), cv::INTER_NEAREST,
                   cv::BORDER_REFLECT_101);
    BinaryMask mask(h, w, MaskProvenance::ground_truth);
    for (int r = 0; r < h; ++r) {
      const uint8_t* row = mdst.ptr<uint8_t>(r);
      for (int c = 0; c < w; ++c) mask.at(r, c) = row[c] != 0 ? 1 : 0;
    }
    out.mask = std::move(mask);
  }
  return out;
}

ImageSample augment(const ImageSample& s, const AugmentationParams& p, Rng& rng) {
  if (!s.mask) throw DataError("augment: sample '" + s.id + "' has no mask");
  return apply_transform(s, sample_transform(p, rng));
}

// ---------------------------------------------------------------------------
// Batch iteration

BatchIterator::BatchIterator(std::vector<ImageSample> samples, int batch_size, bool augment,
                             AugmentationParams params, uint64_t seed)
    : samples_(std::move(samples)), batch_(batch_size), augment_(augment),
      params_(std::move(params)), seed_(seed) {
  if (batch_ < 1) throw DataError("batch size must be >= 1");
  if (samples_.empty()) throw DataError("batch iterator over an empty sample set");
  order_.resize(samples_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
}

void BatchIterator::start_epoch(int epoch) {
  epoch_ = epoch;
  cursor_ = 0;
  // Reseeded per epoch so the shuffle is reproducible from (seed, epoch) alone.
  Rng rng(mix_seed(seed_, static_cast<uint64_t>(epoch) * 2654435761ull + 1));
  rng.shuffle(order_.begin(), order_.end());
}

bool BatchIterator::next(Batch& out) {
  if (cursor_ >= samples_.size()) return false;
  const size_t n = std::min(static_cast<size_t>(batch_), samples_.size() - cursor_);
  const int h = samples_[0].image.dim(0);
  const int w = samples_[0].image.dim(1);
  out.images.resize({static_cast<int>(n), h, w, 3});
  out.masks.resize({static_cast<int>(n), h, w, 1});
  out.ids.assign(n, "");

  for (size_t k = 0; k < n; ++k) {
    const uint32_t idx = order_[cursor_ + k];
    const ImageSample& base = samples_[idx];
    ImageSample aug;
    const ImageSample* use = &base;
    if (augment_) {
      // Per-sample stream keyed by (seed, epoch, sample): stable regardless of
      // batch composition or worker scheduling.
      Rng rng(mix_seed(seed_, (static_cast<uint64_t>(epoch_) << 32) | idx));
      aug = augment(base, params_, rng);
      use = &aug;
    }
    if (!use->mask) throw DataError("batch iterator: sample '" + use->id + "' has no mask");
    std::copy(use->image.data(), use->image.data() + use->image.numel(),
              out.images.data() + static_cast<int64_t>(k) * h * w * 3);
    float* mdst = out.masks.data() + static_cast<int64_t>(k) * h * w;
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
      mdst[i] = static_cast<float>(use->mask->v[static_cast<size_t>(i)]);
    }
    out.ids[k] = use->id;
  }
  cursor_ += n;
  return true;
}

// ---------------------------------------------------------------------------
// Dataset preparation

namespace {

bool looks_normalized(const fs::path& root, std::vector<fs::path>& split_dirs) {
  split_dirs.clear();
  if (!fs::is_directory(root)) return false;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::is_directory(e.path() / "images")) {
      split_dirs.push_back(e.path());
    }
  }
  std::sort(split_dirs.begin(), split_dirs.end());
  return !split_dirs.empty();
}

struct IsicPart {
  std::string split;
  fs::path data_dir;
  fs::path gt_dir;
  fs::path gt_csv;
};

std::vector<IsicPart> find_isic_parts(const fs::path& root) {
  std::vector<IsicPart> parts;
  if (!fs::is_directory(root)) return parts;
  const std::pair<const char*, const char*> names[] = {
      {"Training", "isic_train"}, {"Validation", "isic_val"}, {"Test_v2", "isic_test"},
      {"Test", "isic_test"}};
  for (const auto& [raw_name, split] : names) {
    fs::path data, gt, csv;
    for (const auto& e : fs::directory_iterator(root)) {
      const std::string n = e.path().filename().string();
      if (n.find(raw_name) == std::string::npos) continue;
      if (n.ends_with("_Data") && e.is_directory()) data = e.path();
      if (n.ends_with("_Part1_GroundTruth") && e.is_directory()) gt = e.path();
      if (n.ends_with("_Part3_GroundTruth.csv")) csv = e.path();
    }
    if (!data.empty() && !gt.empty()) {
      // "Test" also matches "Test_v2"; keep only one entry per split.
      bool dup = false;
      for (const auto& p : parts) dup = dup || p.split == split;
      if (!dup) parts.push_back({split, data, gt, csv});
    }
  }
  return parts;
}

std::vector<fs::path> find_ph2_cases(const fs::path& root, int depth = 0) {
  std::vector<fs::path> cases;
  if (depth > 3 || !fs::is_directory(root)) return cases;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (fs::is_directory(e.path() / (name + "_Dermoscopic_Image"))) {
      cases.push_back(e.path());
    } else {
      auto sub = find_ph2_cases(e.path(), depth + 1);
      cases.insert(cases.end(), sub.begin(), sub.end());
    }
  }
  std::sort(cases.begin(), cases.end());
  return cases;
}

std::optional<fs::path> find_file_named(const fs::path& root, const std::string& name,
                                        int depth = 0) {
  if (depth > 3 || !fs::is_directory(root)) return std::nullopt;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == name) return e.path();
  }
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) {
      if (auto f = find_file_named(e.path(), name, depth + 1)) return f;
    }
  }
  return std::nullopt;
}

// PH2_dataset.txt: '||'-separated table; Clinical Diagnosis 2 means melanoma.
std::map<std::string, LesionClass> parse_ph2_labels(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot read " + file.string());
  std::map<std::string, LesionClass> labels;
  std::string line;
  int diag_col = -1;
  while (std::getline(is, line)) {
    if (line.find("||") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::string cur;
    for (size_t i = 0; i + 1 < line.size(); ++i) {
      if (line[i] == '|' && line[i + 1] == '|') {
        cols.push_back(trim(cur));
        cur.clear();
        ++i;
      } else {
        cur += line[i];
      }
    }
    cols.push_back(trim(cur));
    if (diag_col < 0) {
      for (size_t i = 0; i < cols.size(); ++i) {
        if (cols[i].find("Clinical Diagnosis") != std::string::npos) {
          diag_col = static_cast<int>(i);
        }
      }
      continue;
    }
    std::string id;
    for (const auto& c : cols) {
      if (c.rfind("IMD", 0) == 0) {
        id = c;
        break;
      }
    }
    if (id.empty() || diag_col >= static_cast<int>(cols.size())) continue;
    labels[id] = cols[static_cast<size_t>(diag_col)] == "2" ? LesionClass::mel
                                                            : LesionClass::nev;
  }
  if (labels.empty()) throw DataError("no usable rows in " + file.string());
  return labels;
}

void transcode_image(const fs::path& src, const fs::path& dst) {
  if (src.extension() == dst.extension()) {
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    return;
  }
  cv::Mat img = cv::imread(src.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot decode image: " + src.string());
  if (!cv::imwrite(dst.string(), img)) throw DataError("cannot write " + dst.string());
}

void emit_labels_csv(const fs::path& file,
                     const std::vector<std::pair<std::string, LesionClass>>& rows) {
  std::ofstream os(file);
  os << "id,class\n";
  for (const auto& [id, cls] : rows) os << id << "," << lesion_class_name(cls) << "\n";
  if (!os) throw DataError("cannot write " + file.string());
}

void summarize_split(PrepareSummary& sum, const fs::path& root, const std::string& split) {
  const DatasetManifest man = load_manifest(root, split_from_name(split));
  sum.split_counts.emplace_back(split, static_cast<int>(man.size()));
  sum.proportions[split] = man.class_proportions;
  sum.total += static_cast<int>(man.size());
}

}  // namespace

PrepareSummary prepare_dataset(const fs::path& raw_root, const fs::path& target_root) {
  PrepareSummary sum;

  std::vector<fs::path> split_dirs;
  if (looks_normalized(raw_root, split_dirs)) {
    sum.already_normalized = true;
    for (const auto& d : split_dirs) {
      summarize_split(sum, raw_root, d.filename().string());
    }
    if (fs::absolute(raw_root) != fs::absolute(target_root)) {
      fs::create_directories(target_root);
      fs::copy(raw_root, target_root,
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
    return sum;
  }

  const auto isic_parts = find_isic_parts(raw_root);
  if (!isic_parts.empty()) {
    for (const auto& part : isic_parts) {
      const fs::path out = target_root / part.split;
      fs::create_directories(out / "images");
      fs::create_directories(out / "masks");

      std::map<std::string, LesionClass> labels;
      if (!part.gt_csv.empty()) {
        std::ifstream is(part.gt_csv);
        std::string line;
        bool header = true;
        while (std::getline(is, line)) {
          if (header) {
            header = false;
            continue;
          }
          std::stringstream ss(trim(line));
          std::string id, mel, sk;
          std::getline(ss, id, ',');
          std::getline(ss, mel, ',');
          std::getline(ss, sk, ',');
          if (id.empty()) continue;
          LesionClass cls = LesionClass::nev;
          if (std::atof(mel.c_str()) >= 0.5) cls = LesionClass::mel;
          else if (std::atof(sk.c_str()) >= 0.5) cls = LesionClass::sk;
          labels[trim(id)] = cls;
        }
      }

      std::vector<std::pair<std::string, LesionClass>> rows;
      std::vector<fs::path> images;
      for (const auto& e : fs::directory_iterator(part.data_dir)) {
        if (!e.is_regular_file() || !is_image_file(e.path())) continue;
        const std::string stem = e.path().stem().string();
        if (stem.find("superpixels") != std::string::npos) continue;
        images.push_back(e.path());
      }
      std::sort(images.begin(), images.end());
      for (const auto& img : images) {
        const std::string id = img.stem().string();
        const fs::path mask = part.gt_dir / (id + "_segmentation.png");
        if (!fs::exists(mask)) {
          throw DataError("missing ground-truth mask for '" + id + "' in " +
                          part.gt_dir.string());
        }
        transcode_image(img, target_root / part.split / "images" / (id + ".jpg"));
        fs::copy_file(mask, target_root / part.split / "masks" / (id + "_segmentation.png"),
                      fs::copy_options::overwrite_existing);
        if (!labels.empty()) {
          auto it = labels.find(id);
          if (it == labels.end()) throw DataError("no class row for image '" + id + "'");
          rows.emplace_back(id, it->second);
        }
      }
      if (!rows.empty()) emit_labels_csv(target_root / part.split / "labels.csv", rows);
      summarize_split(sum, target_root, part.split);
    }
    return sum;
  }

  const auto ph2_cases = find_ph2_cases(raw_root);
  if (!ph2_cases.empty()) {
    const auto labels_file = find_file_named(raw_root, "PH2_dataset.txt");
    if (!labels_file) {
      throw DataError("PH2 layout detected but PH2_dataset.txt was not found under " +
                      raw_root.string());
    }
    const auto labels = parse_ph2_labels(*labels_file);
    const fs::path out = target_root / "ph2";
    fs::create_directories(out / "images");
    fs::create_directories(out / "masks");
    std::vector<std::pair<std::string, LesionClass>> rows;
    for (const auto& c : ph2_cases) {
      const std::string id = c.filename().string();
      const fs::path img = c / (id + "_Dermoscopic_Image") / (id + ".bmp");
      const fs::path lesion = c / (id + "_lesion") / (id + "_lesion.bmp");
      if (!fs::exists(img) || !fs::exists(lesion)) {
        throw DataError("incomplete PH2 case directory: " + c.string());
      }
      transcode_image(img, out / "images" / (id + ".jpg"));
      BinaryMask m = read_mask_png(lesion);
      write_mask_png(out / "masks" / (id + "_segmentation.png"), m);
      auto it = labels.find(id);
      if (it == labels.end()) throw DataError("PH2 case '" + id + "' has no label row");
      rows.emplace_back(id, it->second);
    }
    emit_labels_csv(out / "labels.csv", rows);
    summarize_split(sum, target_root, "ph2");
    return sum;
  }

  throw DataError("unrecognized dataset layout under " + raw_root.string());
}

}  // namespace dsnet
