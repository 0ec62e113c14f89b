// Command-line surface for the segmentation pipeline: dataset preparation,
// training, evaluation, prediction, and network comparison.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "dsnet/checkpoint.hpp"
#include "dsnet/data.hpp"
#include "dsnet/model.hpp"
#include "dsnet/postprocess.hpp"
#include "dsnet/report.hpp"
#include "dsnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  fs::path data_root;
  std::string split = "isic_train";
  std::string val_split;
  std::string network = "dsnet";
  std::string loss = "combined";
  int epochs = 100;
  int batch_size = 16;
  uint64_t seed = 0;
  fs::path out;
  fs::path checkpoint;
  fs::path encoder_weights;
  int height = 192;
  int width = 256;
  bool no_augment = false;
  bool per_image_auc = false;
  bool standardize = false;
};

dsnet::NetworkSpec spec_for(const RunConfig& cfg) {
  dsnet::NetworkSpec spec;
  spec.input_height = cfg.height;
  spec.input_width = cfg.width;
  return spec;
}

dsnet::Model build_network(const std::string& name, const dsnet::NetworkSpec& spec,
                           uint64_t seed, const fs::path& encoder_weights) {
  const dsnet::NetworkKind kind = dsnet::network_kind_from_name(name);
  switch (kind) {
    case dsnet::NetworkKind::dsnet: {
      std::optional<fs::path> enc;
      if (!encoder_weights.empty()) enc = encoder_weights;
      return dsnet::build_dsnet(spec, seed, enc);
    }
    case dsnet::NetworkKind::unet:
      return dsnet::build_unet(spec, seed);
    case dsnet::NetworkKind::fcn8s:
      return dsnet::build_fcn8s(spec, seed);
  }
  throw UsageError("unknown network: " + name);
}

// Reads the archive's meta block without loading tensors.
json peek_checkpoint_meta(const fs::path& checkpoint) {
  std::ifstream is(checkpoint, std::ios::binary);
  if (!is) throw dsnet::DataError("cannot open checkpoint: " + checkpoint.string());
  char magic[4];
  is.read(magic, 4);
  uint32_t ver = 0;
  is.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  uint64_t mlen = 0;
  is.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mstr(mlen, '\0');
  is.read(mstr.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw dsnet::CheckpointError("truncated checkpoint: " + checkpoint.string());
  const json manifest = json::parse(mstr, nullptr, false);
  if (manifest.is_discarded()) {
    throw dsnet::CheckpointError("malformed checkpoint manifest: " + checkpoint.string());
  }
  return manifest.value("meta", json::object());
}

// Rebuilds the stored architecture and loads its weights, validating the
// requested network kind against the archive.
dsnet::Model load_model(const std::string& network, const fs::path& checkpoint) {
  const json meta = peek_checkpoint_meta(checkpoint);
  const std::string stored = meta.value("network", std::string("dsnet"));
  if (stored != network) {
    throw dsnet::DataError("checkpoint/network mismatch: archive holds '" + stored +
                           "', requested '" + network + "'");
  }
  dsnet::NetworkSpec spec;
  if (meta.contains("spec")) spec = dsnet::network_spec_from_json(meta["spec"].dump());
  dsnet::Model model = build_network(network, spec, 0, {});
  dsnet::load_checkpoint(model.net, checkpoint);
  return model;
}

void write_text(const fs::path& file, const std::string& text) {
  if (!file.parent_path().empty()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + file.string());
}

std::string proportions_line(const std::map<dsnet::LesionClass, double>& props) {
  std::string s;
  for (const auto& [cls, p] : props) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s %.1f%%  ", dsnet::lesion_class_name(cls), p * 100);
    s += buf;
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const RunConfig& cfg, const fs::path& raw) {
  const dsnet::PrepareSummary sum = dsnet::prepare_dataset(raw, cfg.out);
  if (sum.already_normalized) {
    std::cout << "already normalized: " << raw.string() << "\n";
  }
  for (const auto& [split, count] : sum.split_counts) {
    std::cout << split << ": " << count << " samples  "
              << proportions_line(sum.proportions.at(split)) << "\n";
    if (split == "isic_train") {
      std::cout << "  (published ISIC-2017 training proportions: mel 18.8%  sk 12.7%  "
                   "nev 68.5%)\n";
    } else if (split == "isic_val") {
      std::cout << "  (published ISIC-2017 validation proportions: mel 20.0%  sk 28.0%  "
                   "nev 52.0%)\n";
    } else if (split == "isic_test") {
      std::cout << "  (published ISIC-2017 test proportions: mel 19.5%  sk 15.0%  "
                   "nev 65.5%)\n";
    } else if (split == "ph2") {
      std::cout << "  (published PH2 proportions: mel 20.0%  nev 80.0%)\n";
    }
  }
  std::cout << "total: " << sum.total << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.network == "oracle") throw UsageError("cannot train the oracle predictor");
  const dsnet::NetworkSpec spec = spec_for(cfg);
  dsnet::Model model = build_network(cfg.network, spec, cfg.seed, cfg.encoder_weights);

  dsnet::PreprocessOptions pre;
  pre.target_height = cfg.height;
  pre.target_width = cfg.width;
  pre.per_channel_standardize = cfg.standardize;

  const auto train_man =
      dsnet::load_manifest(cfg.data_root, dsnet::split_from_name(cfg.split));
  const std::string val_name = cfg.val_split.empty() ? cfg.split : cfg.val_split;
  const auto val_man =
      dsnet::load_manifest(cfg.data_root, dsnet::split_from_name(val_name));
  std::cout << "training on " << train_man.size() << " samples (" << cfg.split
            << "), validating on " << val_man.size() << " (" << val_name << ")\n";

  const auto train_samples = dsnet::load_samples(train_man, pre);
  const auto val_samples = dsnet::load_samples(val_man, pre);

  dsnet::TrainingConfig tc;
  tc.max_epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.loss = dsnet::loss_kind_from_name(cfg.loss);
  tc.augment = !cfg.no_augment;
  fs::create_directories(cfg.out);
  tc.checkpoint_path = cfg.out / "checkpoint.dsnc";

  {
    const dsnet::ModelSummary summary = dsnet::summarize(model);
    write_text(cfg.out / "model_summary.txt", dsnet::summary_text(summary));
    write_text(cfg.out / "model_summary.json", dsnet::summary_json(summary));
  }

  const dsnet::TrainResult result = dsnet::train(model, train_samples, val_samples, tc);

  write_text(cfg.out / "training_state.json",
             dsnet::training_state_json(result.state, tc));
  {
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,val_miou,lr\n";
    for (const auto& h : result.state.history) {
      csv << h.epoch << "," << h.train_loss << "," << h.val_loss << "," << h.val_miou
          << "," << h.lr << "\n";
    }
    write_text(cfg.out / "history.csv", csv.str());
  }
  {
    dsnet::PlotSeries train_s{"train loss", {}, {}};
    dsnet::PlotSeries val_s{"val loss", {}, {}};
    for (const auto& h : result.state.history) {
      train_s.x.push_back(h.epoch);
      train_s.y.push_back(h.train_loss);
      val_s.x.push_back(h.epoch);
      val_s.y.push_back(h.val_loss);
    }
    dsnet::write_line_plot_png(cfg.out / "loss_curve.png",
                               "training loss (" + cfg.loss + ")", "epoch", "loss",
                               {train_s, val_s});
  }
  if (!result.state.history.empty()) {
    const auto& last = result.state.history.back();
    std::cout << "final epoch " << last.epoch << ": train " << last.train_loss << "  val "
              << last.val_loss << "  val mIoU " << last.val_miou << "  lr " << last.lr
              << "\n";
  }
  if (!result.checkpoint_written && cfg.epochs > 0) {
    dsnet::save_checkpoint(
        model.net, tc.checkpoint_path,
        json{{"network", cfg.network},
             {"spec", json::parse(dsnet::network_spec_to_json(spec))}}
            .dump());
  }
  std::cout << "checkpoint: " << (cfg.out / "checkpoint.dsnc").string() << "\n";
  return kExitOk;
}

dsnet::ForwardFn oracle_forward(const std::vector<dsnet::ImageSample>& samples) {
  auto cursor = std::make_shared<size_t>(0);
  return [&samples, cursor](const dsnet::Tensor& images) {
    const int n = images.dim(0);
    const int h = images.dim(1), w = images.dim(2);
    dsnet::Tensor probs({n, h, w, 1});
    for (int k = 0; k < n; ++k) {
      const auto& mask = samples[(*cursor + k) % samples.size()].mask;
      if (!mask) throw dsnet::DataError("oracle predictor requires ground truth");
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        probs[static_cast<int64_t>(k) * h * w + i] =
            static_cast<float>(mask->v[static_cast<size_t>(i)]);
      }
    }
    *cursor = (*cursor + n) % samples.size();
    return probs;
  };
}

int cmd_evaluate(const RunConfig& cfg) {
  dsnet::PreprocessOptions pre;
  pre.per_channel_standardize = cfg.standardize;

  std::optional<dsnet::Model> model;
  int64_t params = 0;
  if (cfg.network != "oracle") {
    if (cfg.checkpoint.empty()) throw UsageError("evaluate requires --checkpoint");
    model = load_model(cfg.network, cfg.checkpoint);
    params = dsnet::count_parameters(*model).total;
    pre.target_height = model->spec.input_height;
    pre.target_width = model->spec.input_width;
  } else {
    pre.target_height = cfg.height;
    pre.target_width = cfg.width;
  }

  const auto man = dsnet::load_manifest(cfg.data_root, dsnet::split_from_name(cfg.split));
  const auto samples = dsnet::load_samples(man, pre);
  std::cout << "evaluating " << samples.size() << " samples from " << cfg.split << "\n";

  dsnet::EvaluateOptions opt;
  opt.per_image_auc = cfg.per_image_auc;
  dsnet::PooledRoc roc;
  dsnet::MetricsReport rep;
  if (model) {
    rep = dsnet::evaluate_with(
        [&](const dsnet::Tensor& images) { return model->forward(images, false); },
        samples, opt, &roc);
  } else {
    rep = dsnet::evaluate_with(oracle_forward(samples), samples, opt, &roc);
  }
  rep.split = cfg.split;

  fs::create_directories(cfg.out);
  write_text(cfg.out / "per_image.csv", dsnet::per_image_csv(rep));
  write_text(cfg.out / "aggregate.csv", dsnet::aggregate_csv(rep));
  write_text(cfg.out / "aggregate.txt", dsnet::aggregate_text(rep, true));
  write_text(cfg.out / "roc.txt", dsnet::roc_text(roc.overall));
  for (const auto& [cls, curve] : roc.per_class) {
    write_text(cfg.out / ("roc_" + std::string(dsnet::lesion_class_name(cls)) + ".txt"),
               dsnet::roc_text(curve));
  }
  {
    dsnet::PlotSeries s{cfg.network, {}, {}};
    for (const auto& p : roc.overall.points) {
      s.x.push_back(p.fpr);
      s.y.push_back(p.tpr);
    }
    dsnet::write_line_plot_png(cfg.out / "roc.png", "ROC (" + cfg.split + ")",
                               "false positive rate", "true positive rate", {s},
                               /*unit_diagonal=*/true);
  }
  {
    json j;
    j["network"] = cfg.network;
    j["split"] = cfg.split;
    j["loss"] = cfg.loss;
    j["parameters"] = params;
    j["n_images"] = rep.overall.n;
    j["miou"] = rep.overall.miou;
    j["mdice"] = rep.overall.mdice;
    j["msn"] = rep.overall.msn;
    j["msp"] = rep.overall.msp;
    if (rep.overall.auc) j["auc"] = *rep.overall.auc;
    if (rep.mean_per_image_auc) j["mean_per_image_auc"] = *rep.mean_per_image_auc;
    j["mean_inference_seconds"] = rep.mean_inference_seconds;
    j["empty_predictions"] = rep.empty_predictions;
    j["degenerate_thresholds"] = rep.degenerate_thresholds;
    write_text(cfg.out / "summary.json", j.dump(2));
  }
  std::cout << dsnet::aggregate_text(rep, true);
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& images) {
  if (images.empty()) throw UsageError("predict requires at least one image path");

  dsnet::PreprocessOptions pre;
  pre.per_channel_standardize = cfg.standardize;
  std::optional<dsnet::Model> model;
  if (cfg.network != "oracle") {
    if (cfg.checkpoint.empty()) throw UsageError("predict requires --checkpoint");
    model = load_model(cfg.network, cfg.checkpoint);
    pre.target_height = model->spec.input_height;
    pre.target_width = model->spec.input_width;
  } else {
    pre.target_height = cfg.height;
    pre.target_width = cfg.width;
  }

  fs::create_directories(cfg.out);
  double seconds = 0.0;
  int n_done = 0;
  for (const std::string& path_str : images) {
    const fs::path path(path_str);
    const std::string id = path.stem().string();

    // ground truth, when present, sits next to the image or in ../masks
    std::optional<dsnet::BinaryMask> gt_raw;
    for (const fs::path cand :
         {path.parent_path() / (id + "_segmentation.png"),
          path.parent_path().parent_path() / "masks" / (id + "_segmentation.png")}) {
      if (fs::exists(cand)) {
        gt_raw = dsnet::read_mask_png(cand);
        break;
      }
    }

    const dsnet::RawImage raw = dsnet::read_image_rgb(path);
    const dsnet::ImageSample sample = dsnet::canonicalize(
        raw, gt_raw ? &*gt_raw : nullptr, id, dsnet::Split::isic_test, std::nullopt, pre);

    dsnet::Tensor batch({1, pre.target_height, pre.target_width, 3});
    std::copy(sample.image.data(), sample.image.data() + sample.image.numel(),
              batch.data());

    const auto t0 = std::chrono::steady_clock::now();
    dsnet::Tensor probs;
    if (model) {
      probs = model->forward(batch, false);
    } else {
      if (!sample.mask) {
        throw dsnet::DataError("oracle predictor requires a ground-truth mask for '" +
                               id + "'");
      }
      probs.resize({1, pre.target_height, pre.target_width, 1});
      for (int64_t i = 0; i < probs.numel(); ++i) {
        probs[i] = static_cast<float>(sample.mask->v[static_cast<size_t>(i)]);
      }
    }
    const dsnet::ProbMapView view{
        pre.target_height, pre.target_width,
        std::span<const float>(probs.data(), static_cast<size_t>(probs.numel()))};
    const dsnet::PostprocessResult post = dsnet::postprocess(view);
    const auto t1 = std::chrono::steady_clock::now();
    seconds += std::chrono::duration<double>(t1 - t0).count();
    ++n_done;

    dsnet::write_prob_png16(cfg.out / (id + "_prob.png"), view);
    dsnet::write_mask_png(cfg.out / (id + "_mask.png"), post.mask);
    if (post.empty_prediction) {
      std::cout << id << ": empty prediction\n";
    }
    if (sample.mask) {
      const dsnet::Tensor overlay =
          dsnet::render_overlay(sample.image, post.mask, *sample.mask);
      dsnet::write_rgb_png(cfg.out / (id + "_overlay.png"), overlay);
    }
  }
  std::cout << "mean inference seconds per image: " << (seconds / n_done)
            << " (reported DSNet reference: 0.595 s)\n";
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& runs) {
  if (runs.size() < 2) throw UsageError("compare requires at least two evaluated runs");

  std::vector<dsnet::ComparisonRow> rows;
  std::vector<dsnet::PlotSeries> curves;
  std::string split;
  for (const std::string& run_str : runs) {
    const fs::path run(run_str);
    std::ifstream is(run / "summary.json");
    if (!is) throw dsnet::DataError("no summary.json under " + run.string());
    json j;
    is >> j;
    const std::string run_split = j.value("split", std::string());
    if (split.empty()) {
      split = run_split;
    } else if (split != run_split) {
      throw dsnet::DataError("refusing to compare runs on different splits: '" + split +
                             "' vs '" + run_split + "' (" + run.string() + ")");
    }
    dsnet::ComparisonRow row;
    row.run = run.filename().string();
    row.network = j.value("network", std::string("?"));
    row.parameters = j.value("parameters", int64_t{0});
    row.loss = j.value("loss", std::string("?"));
    row.miou = j.value("miou", 0.0);
    row.msn = j.value("msn", 0.0);
    row.msp = j.value("msp", 0.0);
    if (j.contains("auc")) row.auc = j["auc"].get<double>();
    rows.push_back(row);

    std::ifstream roc_is(run / "roc.txt");
    if (roc_is) {
      std::stringstream ss;
      ss << roc_is.rdbuf();
      const dsnet::RocCurve curve = dsnet::roc_from_text(ss.str());
      dsnet::PlotSeries s{row.run + " (" + row.network + ")", {}, {}};
      for (const auto& p : curve.points) {
        s.x.push_back(p.fpr);
        s.y.push_back(p.tpr);
      }
      curves.push_back(std::move(s));
    }
  }

  fs::create_directories(cfg.out);
  write_text(cfg.out / "comparison.csv", dsnet::comparison_csv(rows));
  write_text(cfg.out / "comparison.txt", dsnet::comparison_text(rows));
  if (!curves.empty()) {
    dsnet::write_line_plot_png(cfg.out / "roc_compare.png", "ROC (" + split + ")",
                               "false positive rate", "true positive rate", curves, true);
  }
  std::cout << dsnet::comparison_text(rows);
  return kExitOk;
}

void overlay_config_file(CLI::App* sub, const std::string& config_file, RunConfig& cfg) {
  if (config_file.empty()) return;
  std::ifstream is(config_file);
  if (!is) throw dsnet::DataError("cannot read config file: " + config_file);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw dsnet::DataError("malformed config file " + config_file + ": " + e.what());
  }

  const auto passed = [&](const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  const auto set_str = [&](const char* key, const char* flag, auto& field) {
    if (j.contains(key) && !passed(flag)) field = j[key].get<std::string>();
  };
  if (j.contains("data_root") && !passed("--data-root"))
    cfg.data_root = j["data_root"].get<std::string>();
  set_str("split", "--split", cfg.split);
  set_str("val_split", "--val-split", cfg.val_split);
  set_str("network", "--network", cfg.network);
  set_str("loss", "--loss", cfg.loss);
  if (j.contains("epochs") && !passed("--epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size") && !passed("--batch-size"))
    cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("seed") && !passed("--seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("out") && !passed("--out")) cfg.out = j["out"].get<std::string>();
  if (j.contains("checkpoint") && !passed("--checkpoint"))
    cfg.checkpoint = j["checkpoint"].get<std::string>();
  if (j.contains("encoder_weights") && !passed("--encoder-weights"))
    cfg.encoder_weights = j["encoder_weights"].get<std::string>();
  if (j.contains("height") && !passed("--height")) cfg.height = j["height"].get<int>();
  if (j.contains("width") && !passed("--width")) cfg.width = j["width"].get<int>();
  if (j.contains("augment") && !passed("--no-augment"))
    cfg.no_augment = !j["augment"].get<bool>();
  if (j.contains("per_image_auc") && !passed("--per-image-auc"))
    cfg.per_image_auc = j["per_image_auc"].get<bool>();
  if (j.contains("standardize") && !passed("--standardize"))
    cfg.standardize = j["standardize"].get<bool>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSNet dermoscopic skin lesion segmentation"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_file;
  fs::path prepare_raw;
  std::vector<std::string> predict_images;
  std::vector<std::string> compare_runs;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file (flags override it)");
    sub->add_option("--data-root", cfg.data_root, "normalized dataset root");
    sub->add_option("--split", cfg.split, "dataset split name");
    sub->add_option("--network", cfg.network, "dsnet|unet|fcn8s|oracle");
    sub->add_option("--loss", cfg.loss, "cross_entropy|iou|combined");
    sub->add_option("--epochs", cfg.epochs, "training epochs");
    sub->add_option("--batch-size", cfg.batch_size, "batch size");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--checkpoint", cfg.checkpoint, "checkpoint archive");
    sub->add_option("--encoder-weights", cfg.encoder_weights,
                    "optional encoder weight archive (dsnet only)");
    sub->add_option("--height", cfg.height, "input height (multiple of 32)");
    sub->add_option("--width", cfg.width, "input width (multiple of 32)");
    sub->add_flag("--no-augment", cfg.no_augment, "disable training augmentation");
    sub->add_flag("--per-image-auc", cfg.per_image_auc,
                  "also report the mean of per-image AUCs");
    sub->add_flag("--standardize", cfg.standardize,
                  "per-channel standardization during preprocessing");
  };

  CLI::App* prepare = app.add_subcommand("prepare", "normalize a raw dataset layout");
  prepare->add_option("raw", prepare_raw, "raw ISIC/PH2 download or normalized root")
      ->required();
  add_common(prepare);

  CLI::App* train_cmd = app.add_subcommand("train", "train a segmentation network");
  add_common(train_cmd);
  train_cmd->add_option("--val-split", cfg.val_split,
                        "validation split (defaults to the training split)");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
  add_common(eval_cmd);

  CLI::App* predict_cmd = app.add_subcommand("predict", "segment individual images");
  predict_cmd->add_option("images", predict_images, "image files")->required();
  add_common(predict_cmd);

  CLI::App* compare_cmd = app.add_subcommand("compare", "combine evaluated runs");
  compare_cmd->add_option("runs", compare_runs, "evaluation output directories")
      ->required();
  add_common(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    overlay_config_file(sub, config_file, cfg);

    if (app.got_subcommand(prepare)) {
      if (cfg.out.empty()) cfg.out = prepare_raw;  // summarize in place
      return cmd_prepare(cfg, prepare_raw);
    }
    if (cfg.out.empty()) throw UsageError("--out is required");
    if (app.got_subcommand(train_cmd)) return cmd_train(cfg);
    if (app.got_subcommand(eval_cmd)) return cmd_evaluate(cfg);
    if (app.got_subcommand(predict_cmd)) return cmd_predict(cfg, predict_images);
    if (app.got_subcommand(compare_cmd)) return cmd_compare(cfg, compare_runs);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dsnet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const dsnet::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
