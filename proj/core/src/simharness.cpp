// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/simharness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <thread>

namespace sparse3d {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string scene_image_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

// Raw (unclamped) projected envelope plus the clamped box; the visible
// fraction drives the truncation field.
struct Projected {
  BBox2D clamped;
  double visible_fraction = 0.0;
};

Projected project_with_truncation(const std::array<Vec3, 8>& corners,
                                  const CameraRig& rig) {
  double min_u = std::numeric_limits<double>::infinity();
  double max_u = -min_u;
  double min_v = min_u;
  double max_v = -min_u;
  for (const Vec3& c : corners) {
    const Eigen::Vector3d p = rig.projection * c.homogeneous();
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  Projected out;
  out.clamped = BBox2D{std::clamp(min_u, 0.0, double(rig.image_width)),
                       std::clamp(min_v, 0.0, double(rig.image_height)),
                       std::clamp(max_u, 0.0, double(rig.image_width)),
                       std::clamp(max_v, 0.0, double(rig.image_height))};
  const double raw_area = (max_u - min_u) * (max_v - min_v);
  out.visible_fraction = raw_area > 0.0 ? out.clamped.area() / raw_area : 0.0;
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_scenes < 1) throw ValidationError("scene spec: need at least one scene");
  if (min_cars < 0 || max_cars < min_cars)
    throw ValidationError("scene spec: car count range is inverted");
  if (!(depth_min > 0.0 && depth_min < depth_max))
    throw ValidationError("scene spec: depth window must satisfy 0 < min < max");
  if (!(sparsity > 0.0 && sparsity <= 1.0))
    throw ValidationError("scene spec: sparsity must lie in (0, 1]");
  if (!(lane_half_width > 1.0))
    throw ValidationError("scene spec: lane half-width must exceed 1 meter");
  if (!(camera_height > 0.0))
    throw ValidationError("scene spec: camera height must be positive");
  if (image_width < 16 || image_height < 16)
    throw ValidationError("scene spec: image must be at least 16x16");
  if (!(focal > 0.0)) throw ValidationError("scene spec: focal must be positive");
  if (!(mask_depth_min > 0.0 && mask_depth_min < mask_depth_max))
    throw ValidationError("scene spec: mask depth window is inverted");
  if (extrinsic_yaw_range < 0.0 || extrinsic_shift_range < 0.0)
    throw ValidationError("scene spec: extrinsic jitter ranges must be >= 0");
}

CameraRig SceneSpec::base_rig() const {
  CameraRig rig;
  rig.projection = Mat34::Zero();
  rig.projection(0, 0) = focal;
  rig.projection(0, 2) = image_width * 0.5;
  rig.projection(1, 1) = focal;
  rig.projection(1, 2) = image_height * 0.5;
  rig.projection(2, 2) = 1.0;
  rig.image_width = image_width;
  rig.image_height = image_height;
  return rig;
}

Scene generate_scene(const SceneSpec& spec, SplitMix64& rng, int scene_index) {
  spec.validate();
  Scene scene;
  scene.image_id = scene_image_id(scene_index);
  scene.rig = spec.base_rig();

  const double yaw = rng.uniform(-spec.extrinsic_yaw_range, spec.extrinsic_yaw_range);
  const double tx = rng.uniform(-spec.extrinsic_shift_range, spec.extrinsic_shift_range);
  const double tz = rng.uniform(-spec.extrinsic_shift_range, spec.extrinsic_shift_range);
  scene.rig.extrinsic = RigidTransform::from_yaw_translation(yaw, Vec3(tx, 0.0, tz));

  const int car_count =
      spec.min_cars + static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(spec.max_cars - spec.min_cars + 1)));
  const double cx = scene.rig.projection(0, 2);
  const double half_fov_tan = cx / spec.focal;

  for (int c = 0; c < car_count; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Label3D car;
      const double z = rng.uniform(spec.depth_min, spec.depth_max);
      const double xr =
          std::min(spec.lane_half_width - 1.0, 0.75 * z * half_fov_tan);
      const double x = rng.uniform(-xr, xr);
      const bool forward = rng.next_below(2) == 0;
      const double heading = (forward ? 0.0 : kPi) + 0.05 * rng.gaussian();
      car.height = rng.uniform(1.38, 1.62);
      car.width = rng.uniform(1.58, 1.82);
      car.length = rng.uniform(3.7, 4.7);
      car.location = Vec3(x, spec.camera_height, z);
      car.rotation_y = wrap_angle(heading);
      car.alpha = alpha_from_rotation(car.rotation_y, viewing_angle(x, z));

      // Keep a 0.25 m safety margin so footprints never touch.
      bool collides = false;
      BevBox inflated = footprint(car);
      inflated.w += 0.5;
      inflated.l += 0.5;
      for (const Label3D& other : scene.full_gt) {
        BevBox other_inflated = footprint(other);
        other_inflated.w += 0.5;
        other_inflated.l += 0.5;
        if (rotated_bev_iou(inflated, other_inflated) > 0.0) {
          collides = true;
          break;
        }
      }
      if (collides) continue;

      const Projected proj = project_with_truncation(box3d_corners(car), scene.rig);
      if (proj.clamped.area() <= 0.0 || proj.visible_fraction < 0.05) continue;
      car.bbox2d = proj.clamped;
      car.truncation = std::clamp(1.0 - proj.visible_fraction, 0.0, 1.0);
      scene.full_gt.push_back(car);
      placed = true;
    }
    if (!placed)
      throw GenerationError("generate_scene: cannot fit " +
                            std::to_string(car_count) + " non-overlapping cars");
  }

  // Sparse annotation subset: keep max(1, floor(sparsity * n)) cars.
  const std::size_t n = scene.full_gt.size();
  if (n > 0) {
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(spec.sparsity * double(n) + 1e-9)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    order.resize(std::min(keep, n));
    std::sort(order.begin(), order.end());
    for (const std::size_t idx : order) scene.sparse_gt.push_back(scene.full_gt[idx]);
  }

  // Road raster: each row below the horizon maps to one ground depth;
  // mark the lane's pixel span there.
  scene.road_mask = MaskRaster::filled(spec.image_width, spec.image_height, 0);
  const double f = spec.focal;
  const double cy = scene.rig.projection(1, 2);
  for (int y = 0; y < spec.image_height; ++y) {
    const double den = (y + 0.5) - cy;
    if (den <= 0.0) continue;
    const double z = f * spec.camera_height / den;
    if (z < spec.mask_depth_min || z > spec.mask_depth_max) continue;
    const double half_px = f * spec.lane_half_width / z;
    const int x0 = std::max(0, static_cast<int>(std::ceil(cx - half_px - 0.5)));
    const int x1 = std::min(spec.image_width - 1,
                            static_cast<int>(std::floor(cx + half_px - 0.5)));
    for (int x = x0; x <= x1; ++x) scene.road_mask.set(x, y, 255);
  }
  return scene;
}

ImageRgba blank_scene_image(const SceneSpec& spec) {
  return ImageRgba::filled(spec.image_width, spec.image_height, 96, 96, 96);
}

void DetectorNoise::validate() const {
  if (feature_dim < 1)
    throw ValidationError("detector noise: feature_dim must be at least 1");
  if (feature_noise < 0.0)
    throw ValidationError("detector noise: feature_noise must be >= 0");
  if (!(false_positive_rate >= 0.0 && false_positive_rate <= 1.0))
    throw ValidationError("detector noise: false_positive_rate must lie in [0, 1]");
  if (depth_error_scale < 0.0 || sigma_noise < 0.0)
    throw ValidationError("detector noise: noise scales must be >= 0");
  if (!(conf_min >= 0.0 && conf_min <= conf_max && conf_max <= 1.0))
    throw ValidationError("detector noise: confidence range must satisfy 0 <= min <= max <= 1");
  if (!(fp_depth_error_min >= 0.0 && fp_depth_error_min <= fp_depth_error_max))
    throw ValidationError("detector noise: FP depth error range is inverted");
}

FeatureVec true_class_direction(int dim) {
  if (dim < 1) throw ValidationError("true_class_direction: dim must be >= 1");
  FeatureVec v = FeatureVec::Ones(dim);
  return v / v.norm();
}

FeatureVec sample_class_feature(int dim, double noise, SplitMix64& rng) {
  FeatureVec u(dim);
  for (int i = 0; i < dim; ++i) u[i] = rng.gaussian();
  const double norm = u.norm();
  FeatureVec f = true_class_direction(dim);
  if (norm > 0.0) f += noise * (u / norm);
  return f / f.norm();
}

SimulatedPredictions simulate_predictions(const std::vector<Label3D>& full_gt,
                                          const DetectorNoise& noise, SplitMix64& rng,
                                          const CameraRig& rig,
                                          const std::string& image_id,
                                          std::int64_t id_base) {
  noise.validate();
  SimulatedPredictions out;
  std::int64_t next_id = id_base;
  const double ground_y = full_gt.empty() ? 1.65 : full_gt.front().location.y();

  for (const Label3D& gt : full_gt) {
    // True positive: exact pose except a depth residual; the log-scale
    // head tracks the residual magnitude with some noise.
    Prediction pred;
    pred.id = next_id++;
    pred.image_id = image_id;
    pred.label = gt;
    const double dd = rng.gaussian() * noise.depth_error_scale;
    pred.label.location.z() += dd;
    pred.sigma_raw =
        noise.sigma_slope * std::abs(dd) + noise.sigma_bias + noise.sigma_noise * rng.gaussian();
    pred.feature = sample_class_feature(noise.feature_dim, noise.feature_noise, rng);
    pred.label.score = rng.uniform(noise.conf_min, noise.conf_max);
    out.oracle[pred.id] = true;
    out.tp_depth_obs.emplace_back(std::abs(dd), pred.sigma_raw);
    out.predictions.push_back(std::move(pred));

    if (rng.next_double() >= noise.false_positive_rate) continue;

    // False positive: random pose, feature unrelated to the class
    // direction, log scale driven by a large pseudo depth error.
    for (int attempt = 0; attempt < 50; ++attempt) {
      Label3D fp;
      const double z = rng.uniform(5.0, 60.0);
      const double x = rng.uniform(-12.0, 12.0);
      fp.height = rng.uniform(1.38, 1.62);
      fp.width = rng.uniform(1.58, 1.82);
      fp.length = rng.uniform(3.7, 4.7);
      fp.location = Vec3(x, ground_y, z);
      fp.rotation_y = rng.uniform(-kPi, kPi);
      fp.alpha = alpha_from_rotation(fp.rotation_y, viewing_angle(x, z));
      const Projected proj = project_with_truncation(box3d_corners(fp), rig);
      if (proj.clamped.area() <= 0.0) continue;
      fp.bbox2d = proj.clamped;
      fp.truncation = std::clamp(1.0 - proj.visible_fraction, 0.0, 1.0);

      Prediction fake;
      fake.id = next_id++;
      fake.image_id = image_id;
      fake.label = fp;
      const double e = rng.uniform(noise.fp_depth_error_min, noise.fp_depth_error_max);
      fake.sigma_raw =
          noise.sigma_slope * e + noise.sigma_bias + noise.sigma_noise * rng.gaussian();
      FeatureVec u(noise.feature_dim);
      for (int i = 0; i < noise.feature_dim; ++i) u[i] = rng.gaussian();
      const double norm = u.norm();
      fake.feature = norm > 0.0 ? FeatureVec(u / norm) : true_class_direction(noise.feature_dim);
      fake.label.score = rng.uniform(noise.conf_min, noise.conf_max);
      out.oracle[fake.id] = false;
      out.predictions.push_back(std::move(fake));
      break;
    }
  }
  return out;
}

std::vector<ObjectPatch> build_patch_library(const std::vector<Scene>& scenes,
                                             const RapaConfig& config,
                                             std::uint64_t seed) {
  std::vector<ObjectPatch> library;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto candidates = extract_patch_candidates(scenes[i].sparse_gt, config);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      SplitMix64 rng(seed_from(seed, "patch", i, j));
      ObjectPatch patch;
      patch.source_label = candidates[j];
      patch.source_rig = scenes[i].rig;
      patch.source_image_id = scenes[i].image_id;

      // Car-colored ellipse on a transparent background.
      const int w = 24;
      const int h = 16;
      const std::uint8_t r = static_cast<std::uint8_t>(40 + rng.next_below(181));
      const std::uint8_t g = static_cast<std::uint8_t>(40 + rng.next_below(181));
      const std::uint8_t b = static_cast<std::uint8_t>(40 + rng.next_below(181));
      patch.raster = ImageRgba::filled(w, h, 0, 0, 0, 0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double nx = (x + 0.5) / w * 2.0 - 1.0;
          const double ny = (y + 0.5) / h * 2.0 - 1.0;
          if (nx * nx + ny * ny > 1.0) continue;
          std::uint8_t* px = patch.raster.pixel(x, y);
          px[0] = r;
          px[1] = g;
          px[2] = b;
          px[3] = 255;
        }
      }
      library.push_back(std::move(patch));
    }
  }
  return library;
}

// ----- mask robustness utilities --------------------------------------

namespace {

// Per-row window counts via prefix sums; with require_full the output is
// foreground only when every cell of the full window is foreground
// (clipped windows can never be full, which zero-pads the borders).
MaskRaster window_pass_rows(const MaskRaster& mask, int radius, bool require_full) {
  MaskRaster out = MaskRaster::filled(mask.width, mask.height, 0);
  std::vector<long> prefix(static_cast<std::size_t>(mask.width) + 1, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x)
      prefix[static_cast<std::size_t>(x) + 1] =
          prefix[static_cast<std::size_t>(x)] + (mask.foreground(x, y) ? 1 : 0);
    for (int x = 0; x < mask.width; ++x) {
      const int lo = std::max(0, x - radius);
      const int hi = std::min(mask.width, x + radius + 1);
      const long count = prefix[static_cast<std::size_t>(hi)] -
                         prefix[static_cast<std::size_t>(lo)];
      const bool fg = require_full ? count == 2L * radius + 1 : count > 0;
      if (fg) out.set(x, y, 255);
    }
  }
  return out;
}

MaskRaster transpose_mask(const MaskRaster& mask) {
  MaskRaster out = MaskRaster::filled(mask.height, mask.width, 0);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.foreground(x, y)) out.set(y, x, 255);
  return out;
}

void douglas_peucker(const std::vector<Eigen::Vector2d>& points, std::size_t lo,
                     std::size_t hi, double epsilon, std::vector<bool>& keep) {
  if (hi <= lo + 1) return;
  const Eigen::Vector2d& a = points[lo];
  const Eigen::Vector2d& b = points[hi];
  const Eigen::Vector2d ab = b - a;
  const double len = ab.norm();
  double worst = -1.0;
  std::size_t worst_idx = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const Eigen::Vector2d ap = points[i] - a;
    const double dist =
        len > 0.0 ? std::abs(ab.x() * ap.y() - ab.y() * ap.x()) / len : ap.norm();
    if (dist > worst) {
      worst = dist;
      worst_idx = i;
    }
  }
  if (worst > epsilon) {
    keep[worst_idx] = true;
    douglas_peucker(points, lo, worst_idx, epsilon, keep);
    douglas_peucker(points, worst_idx, hi, epsilon, keep);
  }
}

std::vector<Eigen::Vector2d> simplify_chain(const std::vector<Eigen::Vector2d>& points,
                                            double epsilon) {
  if (points.size() <= 2) return points;
  std::vector<bool> keep(points.size(), false);
  keep.front() = keep.back() = true;
  douglas_peucker(points, 0, points.size() - 1, epsilon, keep);
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);
  return out;
}

// x at height y along a polyline whose points have strictly increasing y.
double chain_x_at(const std::vector<Eigen::Vector2d>& chain, double y) {
  if (y <= chain.front().y()) return chain.front().x();
  if (y >= chain.back().y()) return chain.back().x();
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (y <= chain[i].y()) {
      const double t = (y - chain[i - 1].y()) / (chain[i].y() - chain[i - 1].y());
      return chain[i - 1].x() + t * (chain[i].x() - chain[i - 1].x());
    }
  }
  return chain.back().x();
}

}  // namespace

MaskRaster dilate_mask(const MaskRaster& mask, int radius) {
  if (radius < 0) throw ValidationError("dilate_mask: radius must be >= 0");
  if (radius == 0) return mask;
  const MaskRaster rows = window_pass_rows(mask, radius, false);
  return transpose_mask(window_pass_rows(transpose_mask(rows), radius, false));
}

MaskRaster erode_mask(const MaskRaster& mask, int radius) {
  if (radius < 0) throw ValidationError("erode_mask: radius must be >= 0");
  if (radius == 0) return mask;
  const MaskRaster rows = window_pass_rows(mask, radius, true);
  return transpose_mask(window_pass_rows(transpose_mask(rows), radius, true));
}

MaskRaster polygonalize_mask(const MaskRaster& mask, double epsilon) {
  if (epsilon < 0.0)
    throw ValidationError("polygonalize_mask: epsilon must be >= 0");
  MaskRaster out = MaskRaster::filled(mask.width, mask.height, 0);
  std::vector<Eigen::Vector2d> left_chain;
  std::vector<Eigen::Vector2d> right_chain;
  for (int y = 0; y < mask.height; ++y) {
    int lo = -1;
    int hi = -1;
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.foreground(x, y)) continue;
      if (lo < 0) lo = x;
      hi = x;
    }
    if (lo < 0) continue;
    left_chain.emplace_back(double(lo), double(y));
    right_chain.emplace_back(double(hi), double(y));
  }
  if (left_chain.empty()) return out;

  const auto left = simplify_chain(left_chain, epsilon);
  const auto right = simplify_chain(right_chain, epsilon);
  const int y0 = static_cast<int>(left_chain.front().y());
  const int y1 = static_cast<int>(left_chain.back().y());
  for (int y = y0; y <= y1; ++y) {
    const int xl = std::max(0L, std::lround(chain_x_at(left, double(y))));
    const int xr = std::min(long(mask.width) - 1, std::lround(chain_x_at(right, double(y))));
    for (int x = xl; x <= xr; ++x) out.set(x, y, 255);
  }
  return out;
}

// ----- closed-loop experiment -----------------------------------------

void ExperimentConfig::validate() const {
  scene.validate();
  noise.validate();
  rapa.validate();
  pbf.validate();
  bank.validate();
  if (epochs < 0) throw ValidationError("experiment: epochs must be >= 0");
  if (jobs < 1) throw ValidationError("experiment: jobs must be >= 1");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int workers = std::max(1, std::min(jobs, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

std::int64_t gt_bank_total(const GtBank& bank) {
  std::int64_t total = 0;
  for (const auto& [id, entries] : bank) total += static_cast<std::int64_t>(entries.size());
  return total;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = config;

  const std::size_t n = static_cast<std::size_t>(config.scene.num_scenes);
  std::vector<Scene> scenes(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    SplitMix64 rng(seed_from(config.seed, "scene", i));
    scenes[i] = generate_scene(config.scene, rng, static_cast<int>(i));
  });

  const std::vector<ObjectPatch> library =
      build_patch_library(scenes, config.rapa, config.seed);

  // Bank of appearance prototypes, seeded from the sparse annotations.
  std::vector<FeatureVec> init_features;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < scenes[i].sparse_gt.size(); ++j) {
      SplitMix64 rng(seed_from(config.seed, "feat", i, j));
      init_features.push_back(
          sample_class_feature(config.noise.feature_dim, config.noise.feature_noise, rng));
    }
  }
  PrototypeBank bank = initialize_prototypes(init_features, config.bank);
  if (bank.empty() && config.epochs > 0)
    throw ValidationError("experiment: no sparse annotations, the prototype bank is empty");

  GtBank gt_bank;
  for (const Scene& scene : scenes) {
    auto& entries = gt_bank[scene.image_id];
    for (const Label3D& label : scene.sparse_gt)
      entries.push_back({label, GtSource::kSparseGt, 0, std::nullopt, std::nullopt});
  }

  report.epochs.push_back({0, gt_bank_total(gt_bank), 1.0, 0.0, 1.0, 0.0, 0.0, 0.0});

  struct SceneOut {
    std::vector<FeatureVec> selected_features;
    std::vector<ScoredPrediction> selected;
    SceneTally tally;
    double nll_sum = 0.0;
    std::int64_t nll_count = 0;
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const PrototypeBank snapshot = bank;   // epoch-start bank scores everything
    std::vector<std::vector<Label3D>> existing(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = gt_bank.find(scenes[i].image_id);
      if (it == gt_bank.end()) continue;
      for (const GtBankEntry& entry : it->second) existing[i].push_back(entry.label);
    }

    std::vector<SceneOut> outs(n);
    parallel_for(n, config.jobs, [&](std::size_t i) {
      const Scene& scene = scenes[i];
      SceneOut& out = outs[i];

      const AugmentResult aug = augment_scene(
          blank_scene_image(config.scene), scene.image_id, existing[i], scene.rig,
          scene.road_mask, library, config.rapa,
          scene_seed(config.seed, scene.image_id, epoch));
      out.tally.accepted_placements = static_cast<int>(aug.placements.size());
      out.tally.attempted_placements = aug.attempts;

      SplitMix64 rng(seed_from(config.seed, "pred", static_cast<std::uint64_t>(epoch), i));
      const std::int64_t id_base =
          (static_cast<std::int64_t>(epoch - 1) * static_cast<std::int64_t>(n) +
           static_cast<std::int64_t>(i)) *
          1000;
      const SimulatedPredictions sims = simulate_predictions(
          scene.full_gt, config.noise, rng, scene.rig, scene.image_id, id_base);

      const SelectionResult sel =
          select_pseudo_labels(sims.predictions, snapshot, config.pbf);
      for (const ScoredPrediction& sp : sel.selected) {
        out.selected_features.push_back(sp.prediction.feature);
        if (sims.oracle.at(sp.prediction.id)) ++out.tally.true_selected;
      }
      out.tally.selected = static_cast<std::int64_t>(sel.selected.size());
      out.selected = sel.selected;

      for (const auto& [id, is_true] : sims.oracle)
        if (is_true) ++out.tally.true_total;

      // Confidence baseline: same budget, ranked purely by score.
      std::vector<std::size_t> by_conf(sims.predictions.size());
      std::iota(by_conf.begin(), by_conf.end(), 0);
      std::stable_sort(by_conf.begin(), by_conf.end(), [&](std::size_t a, std::size_t b) {
        return *sims.predictions[a].label.score > *sims.predictions[b].label.score;
      });
      const std::size_t budget =
          std::min(sel.selected.size(), sims.predictions.size());
      out.tally.conf_selected = static_cast<std::int64_t>(budget);
      for (std::size_t k = 0; k < budget; ++k)
        if (sims.oracle.at(sims.predictions[by_conf[k]].id))
          ++out.tally.true_conf_selected;

      for (const auto& [abs_err, sigma_raw] : sims.tp_depth_obs) {
        out.nll_sum += depth_nll(abs_err, 0.0, std::exp(sigma_raw));
        ++out.nll_count;
      }
    });

    // Serial bank updates in scene order keep the run independent of the
    // jobs count.
    for (std::size_t i = 0; i < n; ++i) {
      refine_prototypes(bank, outs[i].selected_features);
      gt_bank_insert(gt_bank, scenes[i].image_id, outs[i].selected, epoch);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.bank_size = gt_bank_total(gt_bank);
    std::int64_t true_sel = 0, sel_count = 0, true_conf = 0, conf_count = 0, true_total = 0;
    std::int64_t accepted = 0, attempted = 0, nll_count = 0;
    double nll_sum = 0.0;
    for (const SceneOut& out : outs) {
      true_sel += out.tally.true_selected;
      sel_count += out.tally.selected;
      true_conf += out.tally.true_conf_selected;
      conf_count += out.tally.conf_selected;
      true_total += out.tally.true_total;
      accepted += out.tally.accepted_placements;
      attempted += out.tally.attempted_placements;
      nll_sum += out.nll_sum;
      nll_count += out.nll_count;
    }
    stats.pbf_precision = sel_count == 0 ? 1.0 : double(true_sel) / double(sel_count);
    stats.pbf_recall = true_total == 0 ? 0.0 : double(true_sel) / double(true_total);
    stats.conf_precision = conf_count == 0 ? 1.0 : double(true_conf) / double(conf_count);
    stats.conf_recall = true_total == 0 ? 0.0 : double(true_conf) / double(true_total);
    stats.rapa_accept_rate = attempted == 0 ? 0.0 : double(accepted) / double(attempted);
    stats.mean_depth_nll = nll_count == 0 ? 0.0 : nll_sum / double(nll_count);
    report.epochs.push_back(stats);

    if (config.record_scene_stats) {
      std::vector<SceneTally> tallies;
      tallies.reserve(n);
      for (const SceneOut& out : outs) tallies.push_back(out.tally);
      report.scene_stats.push_back(std::move(tallies));
    }
  }
  return report;
}

std::string ExperimentReport::to_csv() const {
  std::string out =
      "epoch,bank_size,pbf_precision,pbf_recall,conf_precision,conf_recall,"
      "rapa_accept_rate\n";
  char buf[256];
  for (const EpochStats& s : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.epoch,
                  static_cast<long long>(s.bank_size), s.pbf_precision, s.pbf_recall,
                  s.conf_precision, s.conf_recall, s.rapa_accept_rate);
    out += buf;
  }
  return out;
}

std::string ExperimentReport::to_json() const {
  nlohmann::json j;
  j["seed"] = config.seed;
  nlohmann::json scene;
  scene["num_scenes"] = config.scene.num_scenes;
  scene["lane_half_width"] = config.scene.lane_half_width;
  scene["min_cars"] = config.scene.min_cars;
  scene["max_cars"] = config.scene.max_cars;
  scene["depth_min"] = config.scene.depth_min;
  scene["depth_max"] = config.scene.depth_max;
  scene["sparsity"] = config.scene.sparsity;
  scene["camera_height"] = config.scene.camera_height;
  scene["image_width"] = config.scene.image_width;
  scene["image_height"] = config.scene.image_height;
  scene["focal"] = config.scene.focal;
  scene["mask_depth_min"] = config.scene.mask_depth_min;
  scene["mask_depth_max"] = config.scene.mask_depth_max;
  scene["extrinsic_yaw_range"] = config.scene.extrinsic_yaw_range;
  scene["extrinsic_shift_range"] = config.scene.extrinsic_shift_range;
  nlohmann::json noise;
  noise["feature_dim"] = config.noise.feature_dim;
  noise["feature_noise"] = config.noise.feature_noise;
  noise["false_positive_rate"] = config.noise.false_positive_rate;
  noise["depth_error_scale"] = config.noise.depth_error_scale;
  noise["sigma_slope"] = config.noise.sigma_slope;
  noise["sigma_bias"] = config.noise.sigma_bias;
  noise["sigma_noise"] = config.noise.sigma_noise;
  noise["conf_min"] = config.noise.conf_min;
  noise["conf_max"] = config.noise.conf_max;
  noise["fp_depth_error_min"] = config.noise.fp_depth_error_min;
  noise["fp_depth_error_max"] = config.noise.fp_depth_error_max;
  nlohmann::json rapa;
  rapa["delta"] = config.rapa.delta;
  rapa["num_offsets"] = config.rapa.num_offsets;
  rapa["tau_road"] = config.rapa.tau_road;
  rapa["tau_overlap"] = config.rapa.tau_overlap;
  rapa["max_trials"] = config.rapa.max_trials;
  rapa["depth_min"] = config.rapa.depth_min;
  rapa["depth_max"] = config.rapa.depth_max;
  rapa["patches_per_image"] = config.rapa.patches_per_image;
  nlohmann::json pbf;
  pbf["tau_depth"] = config.pbf.tau_depth;
  pbf["tau_proto"] = config.pbf.tau_proto;
  nlohmann::json bank;
  bank["capacity"] = config.bank.capacity;
  bank["tau_new"] = config.bank.tau_new;
  bank["beta_init"] = config.bank.beta_init;
  bank["beta_train"] = config.bank.beta_train;
  nlohmann::json cfg;
  cfg["scene"] = std::move(scene);
  cfg["noise"] = std::move(noise);
  cfg["rapa"] = std::move(rapa);
  cfg["pbf"] = std::move(pbf);
  cfg["bank"] = std::move(bank);
  cfg["epochs"] = config.epochs;
  j["config"] = std::move(cfg);

  nlohmann::json rows = nlohmann::json::array();
  for (const EpochStats& s : epochs) {
    nlohmann::json row;
    row["epoch"] = s.epoch;
    row["bank_size"] = s.bank_size;
    row["pbf_precision"] = s.pbf_precision;
    row["pbf_recall"] = s.pbf_recall;
    row["conf_precision"] = s.conf_precision;
    row["conf_recall"] = s.conf_recall;
    row["rapa_accept_rate"] = s.rapa_accept_rate;
    row["mean_depth_nll"] = s.mean_depth_nll;
    rows.push_back(std::move(row));
  }
  j["epochs"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace sparse3d
