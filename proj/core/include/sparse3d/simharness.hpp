// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic-scene harness: generates flat-road scenes with non-
// overlapping cars, a sparsely annotated subset, road masks, a noisy
// detector emulator with a per-prediction correctness oracle, and the
// closed training loop (augment, detect, filter, grow the ground-truth
// bank) that reports per-epoch quality metrics.

#ifndef SPARSE3D_SIMHARNESS_HPP_
#define SPARSE3D_SIMHARNESS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sparse3d/evalkit.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/kitti_io.hpp"
#include "sparse3d/pbf.hpp"
#include "sparse3d/rapa.hpp"
#include "sparse3d/rng.hpp"

namespace sparse3d {

struct SceneSpec {
  int num_scenes = 100;
  double lane_half_width = 8.0;     // meters of road on each side of the axis
  int min_cars = 2;
  int max_cars = 8;
  double depth_min = 5.0;           // car placement window
  double depth_max = 60.0;
  double sparsity = 0.5;            // fraction of cars that keep annotations
  double camera_height = 1.65;      // ground plane sits at y = camera_height
  int image_width = 384;
  int image_height = 128;
  double focal = 222.0;
  double mask_depth_min = 2.0;      // road raster depth window
  double mask_depth_max = 1.0e6;
  double extrinsic_yaw_range = 0.1;     // per-scene camera pose jitter
  double extrinsic_shift_range = 4.0;   // meters, along x and z

  void validate() const;
  CameraRig base_rig() const;   // principal point centered, identity pose
};

struct Scene {
  std::string image_id;
  std::vector<Label3D> full_gt;
  std::vector<Label3D> sparse_gt;
  CameraRig rig;
  MaskRaster road_mask;
};

// Deterministic given (spec, rng state, index). The rng is consumed
// sequentially; scene_index only names the scene and jitters nothing.
Scene generate_scene(const SceneSpec& spec, SplitMix64& rng, int scene_index);

// Uniform gray canvas sized for the scene spec's camera.
ImageRgba blank_scene_image(const SceneSpec& spec);

struct DetectorNoise {
  int feature_dim = 64;
  double feature_noise = 0.4;          // angular spread around the class direction
  double false_positive_rate = 0.3;    // per ground-truth object
  double depth_error_scale = 1.0;      // std-dev of the depth residual, meters
  double sigma_slope = 0.5;            // raw log-scale head: slope * |dd| + bias + noise
  double sigma_bias = -0.5;
  double sigma_noise = 0.1;
  double conf_min = 0.3;               // classification confidence, same law
  double conf_max = 1.0;               //   for true and false positives
  double fp_depth_error_min = 2.0;     // pseudo depth error driving FP sigmas
  double fp_depth_error_max = 8.0;

  void validate() const;
};

// Unit vector every true detection's feature scatters around.
FeatureVec true_class_direction(int dim);
// normalize(direction + noise * random_unit).
FeatureVec sample_class_feature(int dim, double noise, SplitMix64& rng);

struct SimulatedPredictions {
  std::vector<Prediction> predictions;
  std::unordered_map<std::int64_t, bool> oracle;   // id -> is a real object
  // (|depth error|, sigma_raw) per true prediction, for likelihood stats.
  std::vector<std::pair<double, double>> tp_depth_obs;
};

// One prediction per ground-truth car (depth perturbed, feature near the
// class direction, log-scale head correlated with the depth error) plus
// Bernoulli false positives with random poses and features. Ids count up
// from id_base.
SimulatedPredictions simulate_predictions(const std::vector<Label3D>& full_gt,
                                          const DetectorNoise& noise, SplitMix64& rng,
                                          const CameraRig& rig,
                                          const std::string& image_id,
                                          std::int64_t id_base);

// Crops every sparse annotation of every scene into a synthetic patch
// (opaque car-colored blob with transparent corners). Deterministic in
// seed; patch order follows scene then object order.
std::vector<ObjectPatch> build_patch_library(const std::vector<Scene>& scenes,
                                             const RapaConfig& config,
                                             std::uint64_t seed);

// ----- mask robustness utilities --------------------------------------

// Exact morphology with a centered (2r+1) square; out-of-bounds counts
// as background. Dilation is extensive, erosion anti-extensive.
MaskRaster dilate_mask(const MaskRaster& mask, int radius);
MaskRaster erode_mask(const MaskRaster& mask, int radius);

// Approximates the mask boundary by simplified polylines (Douglas-
// Peucker with the given tolerance in pixels) over the per-row extents,
// then refills. epsilon 0 reproduces single-run-per-row masks exactly.
MaskRaster polygonalize_mask(const MaskRaster& mask, double epsilon);

// ----- closed-loop experiment -----------------------------------------

struct ExperimentConfig {
  SceneSpec scene;
  DetectorNoise noise;
  RapaConfig rapa;
  PbfConfig pbf;
  BankConfig bank;
  int epochs = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool record_scene_stats = false;

  void validate() const;
};

// Per-scene, per-epoch tallies (kept when record_scene_stats is set).
struct SceneTally {
  std::int64_t true_selected = 0;
  std::int64_t selected = 0;
  std::int64_t true_conf_selected = 0;
  std::int64_t conf_selected = 0;
  std::int64_t true_total = 0;
  int accepted_placements = 0;
  int attempted_placements = 0;
};

struct EpochStats {
  int epoch = 0;
  std::int64_t bank_size = 0;
  double pbf_precision = 1.0;
  double pbf_recall = 0.0;
  double conf_precision = 1.0;
  double conf_recall = 0.0;
  double rapa_accept_rate = 0.0;
  double mean_depth_nll = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<EpochStats> epochs;                    // epoch 0 first
  std::vector<std::vector<SceneTally>> scene_stats;  // epochs 1.. when recorded

  std::string to_csv() const;
  std::string to_json() const;   // config echo + per-epoch stats; excludes jobs
};

// Runs the loop: cached scenes, prototype bank from sparse annotations,
// then per epoch augment / simulate / filter against the epoch-start
// bank (scene-parallel, byte-identical for any jobs count) and serial
// bank updates in scene order.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Index-parallel helper; rethrows the first worker exception.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sparse3d

#endif  // SPARSE3D_SIMHARNESS_HPP_
