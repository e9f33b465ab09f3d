// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// sparse3d command line: batch front end over the library. Subcommands
// cover the full loop: extract-patches, augment, proto-init, filter,
// eval, simulate, report. Exit codes: 0 success, 1 validation or usage
// error, 2 I/O error. All randomness derives from --seed.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sparse3d/error.hpp"
#include "sparse3d/evalkit.hpp"
#include "sparse3d/kitti_io.hpp"
#include "sparse3d/pbf.hpp"
#include "sparse3d/rapa.hpp"
#include "sparse3d/simharness.hpp"

namespace fs = std::filesystem;
using namespace sparse3d;

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Sorted stems of the files in dir carrying the extension (".txt", ...).
std::vector<std::string> list_stems(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ext) continue;
    stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() +
                        ": " + ec.message());
}

CameraRig load_rig(const fs::path& calib_path, int image_width, int image_height) {
  return rig_from_calib(load_calib_file(calib_path), image_width, image_height);
}

// Applies key=value lines from a config file to every option of cmd the
// command line left unset, so explicit flags always win. Keys are the
// long option names without the leading dashes.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::istringstream in(read_text_file(path));
  const auto strip = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  int line_number = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": expected key=value");
    const std::string key = strip(text.substr(0, eq));
    const std::string value = strip(text.substr(eq + 1));
    if (key.empty() || key == "config" ||
        std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": duplicate or unsupported key \"" + key + "\"");
    seen.push_back(key);
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw ValidationError(path + ": unknown config key \"" + key + "\" for " +
                            cmd->get_name());
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ValidationError(path + ": bad value for \"" + key + "\": " + e.what());
    }
  }
}

// ----- extract-patches -------------------------------------------------

struct ExtractArgs {
  std::string labels;
  std::string calib;
  std::string images;
  std::string masks;   // optional per-object alpha masks <id>_<index>.pgm
  std::string out;
  RapaConfig rapa;
};

void run_extract(const ExtractArgs& args) {
  args.rapa.validate();
  ensure_out_dir(args.out);
  int written = 0;
  for (const std::string& id : list_stems(args.labels, ".txt")) {
    const LabelFile labels = load_label_file(fs::path(args.labels) / (id + ".txt"));
    const ImageRgba image = load_image(fs::path(args.images) / (id + ".img"));
    const CameraRig rig =
        load_rig(fs::path(args.calib) / (id + ".txt"), image.width, image.height);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
      const Label3D& label = labels.labels[i];
      if (extract_patch_candidates({label}, args.rapa).empty()) continue;

      const int x0 = std::max(0, static_cast<int>(std::floor(label.bbox2d.left)));
      const int y0 = std::max(0, static_cast<int>(std::floor(label.bbox2d.top)));
      const int x1 = std::min(image.width, static_cast<int>(std::ceil(label.bbox2d.right)));
      const int y1 = std::min(image.height, static_cast<int>(std::ceil(label.bbox2d.bottom)));
      if (x1 <= x0 || y1 <= y0) continue;

      ObjectPatch patch;
      patch.source_label = label;
      patch.source_rig = rig;
      patch.source_image_id = id;
      patch.raster = ImageRgba::filled(x1 - x0, y1 - y0, 0, 0, 0);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::uint8_t* src = image.pixel(x, y);
          std::uint8_t* dst = patch.raster.pixel(x - x0, y - y0);
          std::copy(src, src + 4, dst);
        }
      }
      if (!args.masks.empty()) {
        const fs::path mask_path =
            fs::path(args.masks) / (id + "_" + std::to_string(i) + ".pgm");
        if (fs::exists(mask_path)) {
          const MaskRaster mask = load_mask(mask_path);
          if (mask.width != patch.raster.width || mask.height != patch.raster.height)
            throw ValidationError("object mask " + mask_path.string() +
                                  " does not match the crop size");
          for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
              patch.raster.pixel(x, y)[3] = mask.at(x, y);
        }
      }
      save_patch(fs::path(args.out) / (id + "_" + std::to_string(i) + ".patch"),
                 patch);
      ++written;
    }
  }
  std::cout << "wrote " << written << " patches to " << args.out << "\n";
}

// ----- augment ---------------------------------------------------------

struct AugmentArgs {
  std::string labels;
  std::string calib;
  std::string masks;     // road masks <id>.pgm
  std::string images;
  std::string patches;   // patch library directory
  std::string out;
  std::uint64_t seed = 0;
  int epoch = 0;
  RapaConfig rapa;
};

std::vector<ObjectPatch> load_patch_library(const fs::path& dir) {
  std::vector<ObjectPatch> library;
  for (const std::string& stem : list_stems(dir, ".patch"))
    library.push_back(load_patch(dir / (stem + ".patch")));
  return library;
}

void run_augment(const AugmentArgs& args) {
  args.rapa.validate();
  ensure_out_dir(args.out);
  const std::vector<ObjectPatch> library = load_patch_library(args.patches);
  int placed = 0;
  int scenes = 0;
  for (const std::string& id : list_stems(args.labels, ".txt")) {
    const LabelFile labels = load_label_file(fs::path(args.labels) / (id + ".txt"));
    const ImageRgba image = load_image(fs::path(args.images) / (id + ".img"));
    const CameraRig rig =
        load_rig(fs::path(args.calib) / (id + ".txt"), image.width, image.height);
    const MaskRaster road = load_mask(fs::path(args.masks) / (id + ".pgm"));

    const AugmentResult result =
        augment_scene(image, id, labels.labels, rig, road, library, args.rapa,
                      scene_seed(args.seed, id, args.epoch));

    save_image(fs::path(args.out) / (id + ".img"), result.image);
    LabelFile out_labels;
    out_labels.image_id = id;
    out_labels.labels = result.labels;
    save_label_file(fs::path(args.out) / (id + ".txt"), out_labels);
    placed += static_cast<int>(result.placements.size());
    ++scenes;
  }
  std::cout << "augmented " << scenes << " scenes, " << placed
            << " placements, output in " << args.out << "\n";
}

// ----- proto-init ------------------------------------------------------

struct ProtoInitArgs {
  std::string predictions;
  std::string out;
  BankConfig bank;
};

void run_proto_init(const ProtoInitArgs& args) {
  args.bank.validate();
  ensure_out_dir(args.out);
  const std::vector<Prediction> predictions = load_predictions(args.predictions);
  std::map<std::string, std::vector<FeatureVec>> by_class;
  for (const Prediction& p : predictions)
    by_class[p.label.class_name].push_back(p.feature);
  PrototypeBankSet banks;
  for (const auto& [class_name, features] : by_class)
    banks[class_name] = initialize_prototypes(features, args.bank);
  const fs::path out_path = fs::path(args.out) / "prototypes.json";
  save_prototype_banks(out_path, banks);
  std::cout << "initialized " << banks.size() << " class bank(s) from "
            << predictions.size() << " features, wrote " << out_path.string() << "\n";
}

// ----- filter ----------------------------------------------------------

struct FilterArgs {
  std::string predictions;
  std::string prototypes;
  std::string gt_bank;   // optional read-modify-write
  std::string out;
  int epoch = 1;
  PbfConfig pbf;
};

void run_filter(const FilterArgs& args) {
  args.pbf.validate();
  ensure_out_dir(args.out);
  const std::vector<Prediction> predictions = load_predictions(args.predictions);
  const PrototypeBankSet banks = load_prototype_banks(args.prototypes);

  // Per-class selection, then merge back into stream order by id.
  std::map<std::string, std::vector<Prediction>> by_class;
  for (const Prediction& p : predictions) by_class[p.label.class_name].push_back(p);

  std::vector<ScoredPrediction> selected;
  std::vector<RejectedPrediction> rejected;
  for (const auto& [class_name, preds] : by_class) {
    const auto bank_it = banks.find(class_name);
    if (bank_it == banks.end())
      throw ValidationError("no prototype bank for class " + class_name);
    SelectionResult result = select_pseudo_labels(preds, bank_it->second, args.pbf);
    std::move(result.selected.begin(), result.selected.end(),
              std::back_inserter(selected));
    std::move(result.rejected.begin(), result.rejected.end(),
              std::back_inserter(rejected));
  }
  const auto by_id = [](const auto& a, const auto& b) {
    return a.prediction.id < b.prediction.id;
  };
  std::sort(selected.begin(), selected.end(), by_id);
  std::sort(rejected.begin(), rejected.end(), by_id);

  std::vector<Prediction> selected_preds;
  for (const ScoredPrediction& sp : selected) selected_preds.push_back(sp.prediction);
  std::vector<Prediction> rejected_preds;
  for (const RejectedPrediction& rp : rejected) rejected_preds.push_back(rp.prediction);
  save_predictions(fs::path(args.out) / "selected.jsonl", selected_preds);
  save_predictions(fs::path(args.out) / "rejected.jsonl", rejected_preds);

  if (!args.gt_bank.empty()) {
    GtBank bank;
    if (fs::exists(args.gt_bank)) bank = load_gt_bank(args.gt_bank);
    std::map<std::string, std::vector<ScoredPrediction>> by_image;
    for (const ScoredPrediction& sp : selected)
      by_image[sp.prediction.image_id].push_back(sp);
    for (const auto& [image_id, sps] : by_image)
      gt_bank_insert(bank, image_id, sps, args.epoch);
    save_gt_bank(args.gt_bank, bank);
  }
  std::cout << "selected " << selected.size() << " of " << predictions.size()
            << " predictions, output in " << args.out << "\n";
}

// ----- eval ------------------------------------------------------------

struct EvalArgs {
  std::string predictions;
  std::string labels;   // ground truth
  std::string out;      // optional; CSV always goes to stdout
  double iou_threshold = 0.7;
};

void run_eval(const EvalArgs& args) {
  if (!(args.iou_threshold > 0.0 && args.iou_threshold <= 1.0))
    throw ValidationError("eval: --iou-threshold must lie in (0, 1]");
  std::vector<EvalInstance> instances;
  for (const std::string& id : list_stems(args.labels, ".txt")) {
    EvalInstance instance;
    instance.ground_truth =
        load_label_file(fs::path(args.labels) / (id + ".txt")).labels;
    const fs::path pred_path = fs::path(args.predictions) / (id + ".txt");
    if (fs::exists(pred_path))
      instance.predictions = load_label_file(pred_path).labels;
    instances.push_back(std::move(instance));
  }

  const LabelIouFn iou_3d = [](const Label3D& a, const Label3D& b) {
    return iou3d(a, b);
  };
  const LabelIouFn iou_bev = [](const Label3D& a, const Label3D& b) {
    return rotated_bev_iou(footprint(a), footprint(b));
  };

  std::string csv = "difficulty,metric,iou_threshold,value\n";
  for (const DifficultyRule& rule : DifficultyRule::all()) {
    csv += rule.name + ",AP3D," + format_double(args.iou_threshold) + "," +
           format_double(ap_r40(instances, iou_3d, args.iou_threshold, rule)) + "\n";
    csv += rule.name + ",APBEV," + format_double(args.iou_threshold) + "," +
           format_double(ap_r40(instances, iou_bev, args.iou_threshold, rule)) + "\n";
  }
  std::cout << csv;
  if (!args.out.empty()) {
    ensure_out_dir(args.out);
    write_text_file(fs::path(args.out) / "eval.csv", csv);
  }
}

// ----- simulate --------------------------------------------------------

struct SimulateArgs {
  ExperimentConfig config;
  std::string out;
};

void run_simulate(const SimulateArgs& args) {
  ensure_out_dir(args.out);
  const ExperimentReport report = run_experiment(args.config);
  write_text_file(fs::path(args.out) / "report.csv", report.to_csv());
  write_text_file(fs::path(args.out) / "report.json", report.to_json());
  std::cout << report.to_csv();
}

// ----- report ----------------------------------------------------------

struct ReportArgs {
  std::string gt_bank;
  std::string out;   // optional; CSV always goes to stdout
};

void run_report(const ReportArgs& args) {
  const GtBank bank = load_gt_bank(args.gt_bank);
  int max_epoch = 0;
  std::map<int, std::int64_t> added;
  for (const auto& [image_id, entries] : bank) {
    for (const GtBankEntry& entry : entries) {
      ++added[entry.epoch_added];
      max_epoch = std::max(max_epoch, entry.epoch_added);
    }
  }
  std::string csv = "epoch,bank_size\n";
  std::int64_t total = 0;
  for (int epoch = 0; epoch <= max_epoch; ++epoch) {
    const auto it = added.find(epoch);
    if (it != added.end()) total += it->second;
    csv += std::to_string(epoch) + "," + std::to_string(total) + "\n";
  }
  std::cout << csv;
  if (!args.out.empty()) {
    ensure_out_dir(args.out);
    write_text_file(fs::path(args.out) / "growth.csv", csv);
  }
}

// ----- flag wiring -----------------------------------------------------

void add_rapa_flags(CLI::App* cmd, RapaConfig& rapa) {
  cmd->add_option("--delta", rapa.delta, "Lateral offset range in meters")
      ->capture_default_str();
  cmd->add_option("--m", rapa.num_offsets, "Number of uniform offsets in [-delta, delta]")
      ->capture_default_str();
  cmd->add_option("--n-max", rapa.max_trials, "Placement trials per patch")
      ->capture_default_str();
  cmd->add_option("--tau-road", rapa.tau_road, "Minimum road-mask overlap ratio")
      ->capture_default_str();
  cmd->add_option("--tau-overlap", rapa.tau_overlap,
                  "Reject placements whose 2D IoU with existing boxes reaches this")
      ->capture_default_str();
  cmd->add_option("--depth-min", rapa.depth_min, "Patch depth window lower bound")
      ->capture_default_str();
  cmd->add_option("--depth-max", rapa.depth_max, "Patch depth window upper bound")
      ->capture_default_str();
  cmd->add_option("--patches-per-image", rapa.patches_per_image,
                  "Patches pasted per augmented scene")
      ->capture_default_str();
}

void add_bank_flags(CLI::App* cmd, BankConfig& bank) {
  cmd->add_option("--k", bank.capacity, "Prototype bank capacity")
      ->capture_default_str();
  cmd->add_option("--tau-new", bank.tau_new,
                  "Cosine similarity at or above which a feature merges")
      ->capture_default_str();
  cmd->add_option("--beta-init", bank.beta_init, "Merge rate while building the bank")
      ->capture_default_str();
  cmd->add_option("--beta", bank.beta_train, "Merge rate during refinement")
      ->capture_default_str();
}

void add_pbf_flags(CLI::App* cmd, PbfConfig& pbf) {
  cmd->add_option("--tau-depth", pbf.tau_depth,
                  "Depth gate: exp(-sigma) must strictly exceed this")
      ->capture_default_str();
  cmd->add_option("--tau-proto", pbf.tau_proto,
                  "Appearance gate: max prototype cosine must strictly exceed this")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-aware patch augmentation and prototype-based filtering "
               "toolkit for sparsely annotated monocular 3D detection"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  ExtractArgs extract;
  std::string extract_config;
  CLI::App* extract_cmd = app.add_subcommand(
      "extract-patches", "Crop annotated objects into a reusable patch library");
  extract_cmd->add_option("--config", extract_config, "Config file with key=value lines");
  extract_cmd->add_option("--labels", extract.labels, "Label directory (<id>.txt)")
      ->required();
  extract_cmd->add_option("--calib", extract.calib, "Calibration directory (<id>.txt)")
      ->required();
  extract_cmd->add_option("--images", extract.images, "Image directory (<id>.img)")
      ->required();
  extract_cmd->add_option("--masks", extract.masks,
                          "Optional per-object alpha masks (<id>_<index>.pgm)");
  extract_cmd->add_option("--out", extract.out, "Output patch directory")->required();
  add_rapa_flags(extract_cmd, extract.rapa);
  extract_cmd->callback([&]() {
    apply_config_file(extract_cmd, extract_config);
    run_extract(extract);
  });

  AugmentArgs augment;
  std::string augment_config;
  CLI::App* augment_cmd =
      app.add_subcommand("augment", "Paste library patches into scenes");
  augment_cmd->add_option("--config", augment_config, "Config file with key=value lines");
  augment_cmd->add_option("--labels", augment.labels, "Label directory (<id>.txt)")
      ->required();
  augment_cmd->add_option("--calib", augment.calib, "Calibration directory (<id>.txt)")
      ->required();
  augment_cmd->add_option("--masks", augment.masks, "Road mask directory (<id>.pgm)")
      ->required();
  augment_cmd->add_option("--images", augment.images, "Image directory (<id>.img)")
      ->required();
  augment_cmd->add_option("--patches", augment.patches, "Patch library directory")
      ->required();
  augment_cmd->add_option("--out", augment.out, "Output directory")->required();
  augment_cmd->add_option("--seed", augment.seed, "Global random seed")
      ->capture_default_str();
  augment_cmd->add_option("--epoch", augment.epoch, "Epoch index for per-scene seeds")
      ->capture_default_str();
  add_rapa_flags(augment_cmd, augment.rapa);
  augment_cmd->callback([&]() {
    apply_config_file(augment_cmd, augment_config);
    run_augment(augment);
  });

  ProtoInitArgs proto_init;
  std::string proto_config;
  CLI::App* proto_cmd = app.add_subcommand(
      "proto-init", "Build prototype banks from a predictions JSONL");
  proto_cmd->add_option("--config", proto_config, "Config file with key=value lines");
  proto_cmd->add_option("--predictions", proto_init.predictions,
                        "Predictions JSONL carrying the features")
      ->required();
  proto_cmd->add_option("--out", proto_init.out, "Output directory")->required();
  add_bank_flags(proto_cmd, proto_init.bank);
  proto_cmd->callback([&]() {
    apply_config_file(proto_cmd, proto_config);
    run_proto_init(proto_init);
  });

  FilterArgs filter;
  std::string filter_config;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "Select pseudo labels from predictions");
  filter_cmd->add_option("--config", filter_config, "Config file with key=value lines");
  filter_cmd->add_option("--predictions", filter.predictions, "Predictions JSONL")
      ->required();
  filter_cmd->add_option("--prototypes", filter.prototypes, "Prototype bank JSON")
      ->required();
  filter_cmd->add_option("--gt-bank", filter.gt_bank,
                         "Ground-truth bank JSONL to update in place");
  filter_cmd->add_option("--out", filter.out, "Output directory")->required();
  filter_cmd->add_option("--epoch", filter.epoch, "Epoch recorded for accepted labels")
      ->capture_default_str();
  add_pbf_flags(filter_cmd, filter.pbf);
  filter_cmd->callback([&]() {
    apply_config_file(filter_cmd, filter_config);
    run_filter(filter);
  });

  EvalArgs eval;
  std::string eval_config;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "AP over 40 recall points for 3D and BEV boxes");
  eval_cmd->add_option("--config", eval_config, "Config file with key=value lines");
  eval_cmd->add_option("--predictions", eval.predictions,
                       "Prediction label directory (<id>.txt, scores required)")
      ->required();
  eval_cmd->add_option("--labels", eval.labels, "Ground-truth label directory")
      ->required();
  eval_cmd->add_option("--iou-threshold", eval.iou_threshold, "Matching IoU threshold")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Optional directory for eval.csv");
  eval_cmd->callback([&]() {
    apply_config_file(eval_cmd, eval_config);
    run_eval(eval);
  });

  SimulateArgs simulate;
  std::string sim_config;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Closed-loop synthetic experiment over seeded scenes");
  sim_cmd->add_option("--config", sim_config, "Config file with key=value lines");
  sim_cmd->add_option("--out", simulate.out, "Output directory for report.csv/json")
      ->required();
  sim_cmd->add_option("--seed", simulate.config.seed, "Global random seed")
      ->capture_default_str();
  sim_cmd->add_option("--jobs", simulate.config.jobs, "Scene-level worker threads")
      ->capture_default_str();
  sim_cmd->add_option("--scenes", simulate.config.scene.num_scenes, "Scene count")
      ->capture_default_str();
  sim_cmd->add_option("--epochs", simulate.config.epochs, "Self-training epochs")
      ->capture_default_str();
  sim_cmd->add_option("--min-cars", simulate.config.scene.min_cars, "Cars per scene, lower")
      ->capture_default_str();
  sim_cmd->add_option("--max-cars", simulate.config.scene.max_cars, "Cars per scene, upper")
      ->capture_default_str();
  sim_cmd->add_option("--sparsity", simulate.config.scene.sparsity,
                      "Fraction of cars keeping annotations")
      ->capture_default_str();
  sim_cmd->add_option("--lane-half-width", simulate.config.scene.lane_half_width,
                      "Road half width in meters")
      ->capture_default_str();
  sim_cmd->add_option("--feature-dim", simulate.config.noise.feature_dim,
                      "Detector feature dimension")
      ->capture_default_str();
  sim_cmd->add_option("--feature-noise", simulate.config.noise.feature_noise,
                      "Feature spread around the class direction")
      ->capture_default_str();
  sim_cmd->add_option("--fp-rate", simulate.config.noise.false_positive_rate,
                      "False positives per ground-truth object")
      ->capture_default_str();
  sim_cmd->add_option("--depth-error-scale", simulate.config.noise.depth_error_scale,
                      "Std-dev of true-positive depth residuals")
      ->capture_default_str();
  add_rapa_flags(sim_cmd, simulate.config.rapa);
  add_pbf_flags(sim_cmd, simulate.config.pbf);
  add_bank_flags(sim_cmd, simulate.config.bank);
  sim_cmd->callback([&]() {
    apply_config_file(sim_cmd, sim_config);
    run_simulate(simulate);
  });

  ReportArgs report;
  std::string report_config;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Ground-truth bank growth by epoch as CSV");
  report_cmd->add_option("--config", report_config, "Config file with key=value lines");
  report_cmd->add_option("--gt-bank", report.gt_bank, "Ground-truth bank JSONL")
      ->required();
  report_cmd->add_option("--out", report.out, "Optional directory for growth.csv");
  report_cmd->callback([&]() {
    apply_config_file(report_cmd, report_config);
    run_report(report);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);   // --help, --version
    app.exit(e);                                      // usage text on stderr
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
