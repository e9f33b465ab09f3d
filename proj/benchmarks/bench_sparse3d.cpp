// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths of the library: camera-frame
// transforms, box projection, rotated BEV IoU, prototype scoring and
// filtering, placement search, AP computation, and label parsing.
// Inputs are pregenerated outside the timed loops with fixed seeds so
// runs are comparable across machines and revisions.

#include <benchmark/benchmark.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sparse3d/evalkit.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/kitti_io.hpp"
#include "sparse3d/pbf.hpp"
#include "sparse3d/rapa.hpp"
#include "sparse3d/rng.hpp"

namespace {

using namespace sparse3d;

CameraRig make_rig(double yaw, const Vec3& t) {
  CameraRig rig;
  rig.projection << 707.0493, 0.0, 604.0814, 45.7541,
                    0.0, 707.0493, 180.5066, -0.3454,
                    0.0, 0.0, 1.0, 0.0049;
  rig.extrinsic = RigidTransform::from_yaw_translation(yaw, t);
  rig.image_width = 1242;
  rig.image_height = 375;
  return rig;
}

Label3D make_car(SplitMix64& rng) {
  Label3D label;
  label.location = Vec3(rng.uniform(-12.0, 12.0), 1.65, rng.uniform(6.0, 55.0));
  label.height = rng.uniform(1.4, 1.8);
  label.width = rng.uniform(1.5, 1.9);
  label.length = rng.uniform(3.4, 4.6);
  label.rotation_y = rng.uniform(-3.14, 3.14);
  label.alpha = alpha_from_rotation(
      label.rotation_y, viewing_angle(label.location.x(), label.location.z()));
  return label;
}

void BM_TransformCenter(benchmark::State& state) {
  SplitMix64 rng(11);
  const RigidTransform source =
      RigidTransform::from_yaw_translation(0.21, Vec3(0.4, -0.1, 1.2));
  const RigidTransform target =
      RigidTransform::from_yaw_translation(-0.13, Vec3(-0.7, 0.05, 0.6));
  std::vector<Vec3> points(1024);
  for (auto& p : points) p = Vec3(rng.uniform(-20, 20), rng.uniform(-2, 2), rng.uniform(2, 60));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(transform_center(points[i++ & 1023], source, target));
  }
}
BENCHMARK(BM_TransformCenter);

void BM_ProjectBox(benchmark::State& state) {
  SplitMix64 rng(12);
  const CameraRig rig = make_rig(0.0, Vec3::Zero());
  std::vector<Label3D> labels(256);
  for (auto& l : labels) l = make_car(rng);
  std::size_t i = 0;
  for (auto _ : state) {
    const Label3D& l = labels[i++ & 255];
    benchmark::DoNotOptimize(project_box(box3d_corners(l), rig));
  }
}
BENCHMARK(BM_ProjectBox);

void BM_RotatedBevIou(benchmark::State& state) {
  SplitMix64 rng(13);
  // Overlapping pairs; disjoint ones exit early and would flatter the numbers.
  std::vector<std::array<BevBox, 2>> pairs(512);
  for (auto& pr : pairs) {
    pr[0] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3),
             rng.uniform(2, 5), rng.uniform(-3.14, 3.14)};
    pr[1] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3),
             rng.uniform(2, 5), rng.uniform(-3.14, 3.14)};
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& pr = pairs[i++ & 511];
    benchmark::DoNotOptimize(rotated_bev_iou(pr[0], pr[1]));
  }
}
BENCHMARK(BM_RotatedBevIou);

PrototypeBank make_bank(int capacity, int dim, SplitMix64& rng) {
  std::vector<FeatureVec> features;
  features.reserve(static_cast<std::size_t>(capacity) * 2);
  for (int i = 0; i < capacity * 2; ++i) {
    FeatureVec f(dim);
    for (int d = 0; d < dim; ++d) f[d] = rng.gaussian();
    features.push_back(f.normalized());
  }
  BankConfig config;
  config.capacity = capacity;
  config.tau_new = 0.999;  // spread-out features fill the bank to capacity
  return initialize_prototypes(features, config);
}

void BM_ProtoScore(benchmark::State& state) {
  SplitMix64 rng(14);
  const int dim = 256;
  const PrototypeBank bank = make_bank(static_cast<int>(state.range(0)), dim, rng);
  std::vector<FeatureVec> queries(64);
  for (auto& q : queries) {
    q.resize(dim);
    for (int d = 0; d < dim; ++d) q[d] = rng.gaussian();
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(proto_score(queries[i++ & 63], bank));
  }
}
BENCHMARK(BM_ProtoScore)->Arg(64)->Arg(256);

void BM_SelectPseudoLabels(benchmark::State& state) {
  SplitMix64 rng(15);
  const int dim = 256;
  const PrototypeBank bank = make_bank(256, dim, rng);
  std::vector<Prediction> predictions(128);
  std::int64_t id = 0;
  for (auto& p : predictions) {
    p.id = id++;
    p.image_id = "000042";
    p.label = make_car(rng);
    p.label.score = rng.next_double();
    p.feature.resize(dim);
    for (int d = 0; d < dim; ++d) p.feature[d] = rng.gaussian();
    p.sigma_raw = rng.gaussian() * 0.5;
  }
  const PbfConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_pseudo_labels(predictions, bank, config));
  }
}
BENCHMARK(BM_SelectPseudoLabels)->Unit(benchmark::kMicrosecond);

void BM_FindPlacement(benchmark::State& state) {
  SplitMix64 rng(16);
  const CameraRig source_rig = make_rig(0.0, Vec3::Zero());
  const CameraRig target_rig = make_rig(0.02, Vec3(0.3, 0.0, 0.5));

  ObjectPatch patch;
  patch.source_rig = source_rig;
  patch.source_image_id = "000007";
  patch.source_label = make_car(rng);
  patch.source_label.location = Vec3(-2.0, 1.65, 21.0);
  patch.source_label.alpha = alpha_from_rotation(
      patch.source_label.rotation_y, viewing_angle(-2.0, 21.0));
  patch.source_label.bbox2d =
      project_box(box3d_corners(patch.source_label), source_rig);
  patch.raster.width = 48;
  patch.raster.height = 48;
  patch.raster.data.assign(48 * 48 * 4, 128);

  MaskRaster road;
  road.width = target_rig.image_width;
  road.height = target_rig.image_height;
  road.data.assign(static_cast<std::size_t>(road.width) * road.height, 0);
  for (int y = 185; y < road.height; ++y)
    for (int x = 0; x < road.width; ++x) road.set(x, y, 255);

  const std::vector<BBox2D> existing = {{80.0, 190.0, 310.0, 290.0},
                                        {900.0, 200.0, 1100.0, 280.0}};
  const RapaConfig config;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    PlacementSearch search;
    benchmark::DoNotOptimize(
        find_placement(patch, target_rig, road, existing, config, seed++, &search));
  }
}
BENCHMARK(BM_FindPlacement)->Unit(benchmark::kMicrosecond);

void BM_ApR40(benchmark::State& state) {
  SplitMix64 rng(17);
  std::vector<EvalInstance> instances(200);
  for (auto& inst : instances) {
    const int num_gt = 3 + static_cast<int>(rng.next_below(4));
    for (int g = 0; g < num_gt; ++g) {
      Label3D gt = make_car(rng);
      gt.occlusion = static_cast<int>(rng.next_below(3));
      inst.ground_truth.push_back(gt);
      // A jittered copy of most ground truth plus pure-noise predictions.
      if (rng.next_double() < 0.8) {
        Label3D pred = gt;
        pred.location.x() += rng.uniform(-0.4, 0.4);
        pred.location.z() += rng.uniform(-0.4, 0.4);
        pred.score = rng.next_double();
        inst.predictions.push_back(pred);
      }
    }
    for (int n = 0; n < 3; ++n) {
      Label3D noise = make_car(rng);
      noise.score = rng.next_double();
      inst.predictions.push_back(noise);
    }
  }
  const DifficultyRule rule = DifficultyRule::moderate();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ap_r40(instances, iou3d, 0.5, rule));
  }
}
BENCHMARK(BM_ApR40)->Unit(benchmark::kMillisecond);

void BM_ParseLabelLine(benchmark::State& state) {
  const std::string line =
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 "
      "1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_label_line(line));
  }
}
BENCHMARK(BM_ParseLabelLine);

void BM_FormatLabelLine(benchmark::State& state) {
  const Label3D label = parse_label_line(
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 "
      "1.65 1.67 3.64 -0.65 1.71 46.70 -1.59");
  for (auto _ : state) {
    benchmark::DoNotOptimize(format_label_line(label));
  }
}
BENCHMARK(BM_FormatLabelLine);

}  // namespace

BENCHMARK_MAIN();
