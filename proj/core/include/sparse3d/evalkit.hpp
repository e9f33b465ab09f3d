// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rotated-box overlap and AP_R40 evaluation, following the reference
// object-detection evaluation protocol for autonomous driving scenes:
// 40 recall positions, max-interpolated precision, difficulty buckets
// gated on 2D box height / occlusion / truncation, and don't-care
// handling for ground truth outside the current bucket.

#ifndef SPARSE3D_EVALKIT_HPP_
#define SPARSE3D_EVALKIT_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sparse3d/geometry.hpp"

namespace sparse3d {

// Rotated rectangle in the ground plane (bird's eye view). Axes follow
// the camera frame: cx along x (right), cz along z (forward); at yaw 0
// the w extent runs along x and the l extent along z, matching the 3D
// box convention.
struct BevBox {
  double cx = 0.0;
  double cz = 0.0;
  double w = 0.0;
  double l = 0.0;
  double yaw = 0.0;
};

// Ground-plane footprint of a labeled 3D box.
BevBox footprint(const Label3D& label);

// Corners counterclockwise in the (x, z) plane, starting at the corner
// that lies at (+w/2, +l/2) for yaw 0.
std::array<Eigen::Vector2d, 4> bev_corners(const BevBox& box);

// Exact IoU of two rotated rectangles (Sutherland-Hodgman clipping for
// the intersection polygon, shoelace for its area). 0 when either box
// has zero area.
double rotated_bev_iou(const BevBox& a, const BevBox& b);

// 3D IoU: BEV intersection area times vertical overlap of [y-h, y].
double iou3d(const Label3D& a, const Label3D& b);

// One evaluation difficulty bucket. Ground truth counts for the bucket
// iff its 2D box height strictly exceeds min_box_height_px and its
// occlusion/truncation do not exceed the bounds; anything else becomes
// don't-care (matching it is neither rewarded nor punished).
struct DifficultyRule {
  std::string name;
  double min_box_height_px = 0.0;
  int max_occlusion = 0;
  double max_truncation = 0.0;

  bool eligible(const Label3D& gt) const;

  static DifficultyRule easy();       // 40 px, occlusion 0, truncation 0.15
  static DifficultyRule moderate();   // 25 px, occlusion 1, truncation 0.30
  static DifficultyRule hard();       // 25 px, occlusion 2, truncation 0.50
  static const std::array<DifficultyRule, 3>& all();
};

using LabelIouFn = std::function<double(const Label3D&, const Label3D&)>;

// Predictions and ground truth of a single image; detections never match
// ground truth from another instance.
struct EvalInstance {
  std::vector<Label3D> predictions;   // scores required
  std::vector<Label3D> ground_truth;
};

// AP over 40 recall positions (1/40 .. 40/40) with max-interpolated
// precision. Matching is greedy in descending score order: each
// prediction takes the highest-IoU unmatched ground truth at or above
// iou_threshold within its own instance, preferring eligible ground
// truth; a match to ineligible (don't-care) ground truth drops the
// prediction from the tally. Returns 0 when no eligible ground truth
// exists. Throws ValidationError if any prediction lacks a score.
double ap_r40(const std::vector<EvalInstance>& instances, const LabelIouFn& iou_fn,
              double iou_threshold, const DifficultyRule& rule);

// Single-instance convenience overload.
double ap_r40(const std::vector<Label3D>& predictions,
              const std::vector<Label3D>& ground_truth, const LabelIouFn& iou_fn,
              double iou_threshold, const DifficultyRule& rule);

// Precision/recall of a selection against a per-id correctness oracle.
// Empty selection yields precision 1. Throws ValidationError when an id
// is missing from the oracle or appears in both lists.
struct SelectionMetrics {
  double precision = 1.0;
  double recall = 0.0;
  std::int64_t selected_count = 0;
};
SelectionMetrics selection_metrics(const std::vector<std::int64_t>& selected_ids,
                                   const std::vector<std::int64_t>& rejected_ids,
                                   const std::unordered_map<std::int64_t, bool>& oracle);

}  // namespace sparse3d

#endif  // SPARSE3D_EVALKIT_HPP_
