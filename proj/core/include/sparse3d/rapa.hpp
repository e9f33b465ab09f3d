// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Road-aware patch augmentation.
//
// Annotated objects are cropped into patches and replayed into other
// scenes: the source box center moves through the source and target
// camera extrinsics, slides laterally by one of m offsets drawn from
// [-delta, delta], re-derives its global yaw so the observation angle
// is preserved, and is accepted only if its projected box sits on road
// (road-mask overlap >= tau_road) and stays clear of existing boxes
// (IoU < tau_overlap). Accepted patches composite far-to-near with
// alpha blending.

#ifndef SPARSE3D_RAPA_HPP_
#define SPARSE3D_RAPA_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparse3d/geometry.hpp"
#include "sparse3d/kitti_io.hpp"

namespace sparse3d {

// A cropped object ready for replay into another scene.
struct ObjectPatch {
  ImageRgba raster;
  Label3D source_label;
  CameraRig source_rig;
  std::string source_image_id;
};

struct RapaConfig {
  double delta = 5.0;          // lateral offset range, meters
  int num_offsets = 10;        // m evenly spaced offsets in [-delta, delta]
  double tau_road = 0.7;       // minimum road-mask overlap ratio
  double tau_overlap = 0.1;    // placements at or above this 2D IoU are rejected
  int max_trials = 40;         // placement attempts per patch
  double depth_min = 2.0;      // patch source / placement depth window [min, max)
  double depth_max = 65.0;
  int patches_per_image = 2;

  void validate() const;
};

// One accepted placement.
struct Placement {
  Label3D label;               // transformed label, bbox2d already projected
  double x_offset = 0.0;
  double road_ratio = 0.0;
  double max_existing_iou = 0.0;
};

// Search diagnostics.
struct PlacementSearch {
  int trials = 0;
};

// Objects worth cropping: class Car, truncation 0, occlusion 0, depth
// inside [depth_min, depth_max), a non-degenerate 2D box.
std::vector<Label3D> extract_patch_candidates(const std::vector<Label3D>& labels,
                                              const RapaConfig& config = {});

// Fraction of the box's integer raster cells (floor/ceil bounds clamped
// to the mask) that are road. 0 for an empty intersection.
double road_overlap_ratio(const BBox2D& box, const MaskRaster& road_mask);

// Largest 2D IoU between box and any existing box; 0 when none exist.
double max_overlap_with_existing(const BBox2D& box,
                                 const std::vector<BBox2D>& existing);

// Trial loop: walks the offset grid in seed-shuffled order (reshuffled
// each full cycle), transforms the source center through the extrinsics,
// applies the offset, keeps the observation angle, projects, and tests
// the road and overlap gates. Returns the first acceptable placement,
// or nullopt after max_trials failures (immediately for an empty mask).
std::optional<Placement> find_placement(const ObjectPatch& patch,
                                        const CameraRig& target_rig,
                                        const MaskRaster& road_mask,
                                        const std::vector<BBox2D>& existing,
                                        const RapaConfig& config, std::uint64_t seed,
                                        PlacementSearch* search = nullptr);

// Alpha-blends the patch raster, bilinearly resized, into the target
// over the placement's 2D box. A box that rasterizes to zero pixels is
// a no-op (degenerate set to true when provided).
ImageRgba composite_patch(const ImageRgba& target, const ObjectPatch& patch,
                          const Placement& placement, bool* degenerate = nullptr);

struct AugmentResult {
  ImageRgba image;
  std::vector<Label3D> labels;          // originals plus placed, composite order
  std::vector<Placement> placements;    // far-to-near
  int attempts = 0;                     // patches tried
};

// Augments one scene: picks up to patches_per_image library patches
// (seed-shuffled, excluding patches cropped from this image), places
// each, and composites the acceptances far-to-near. Failed placements
// are skipped silently.
AugmentResult augment_scene(const ImageRgba& image, const std::string& image_id,
                            const std::vector<Label3D>& labels, const CameraRig& rig,
                            const MaskRaster& road_mask,
                            const std::vector<ObjectPatch>& library,
                            const RapaConfig& config, std::uint64_t seed);

// Per-scene, per-epoch seed for augmentation.
std::uint64_t scene_seed(std::uint64_t global_seed, std::string_view image_id, int epoch);

// ----- patch container ------------------------------------------------
// "PATCH1" magic, u32le width/height, RGBA payload, then length-prefixed
// label line and calibration text (which carries IMAGE_SIZE).

ObjectPatch parse_patch(const std::vector<std::uint8_t>& bytes,
                        std::string source_image_id);
std::vector<std::uint8_t> format_patch(const ObjectPatch& patch);
// Source image id comes from the file stem up to the last '_'.
ObjectPatch load_patch(const std::filesystem::path& path);
void save_patch(const std::filesystem::path& path, const ObjectPatch& patch);

}  // namespace sparse3d

#endif  // SPARSE3D_RAPA_HPP_
