// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sparse3d {

namespace {

using Eigen::Vector2d;

double cross2(const Vector2d& a, const Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

double polygon_area(const std::vector<Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vector2d& p = poly[i];
    const Vector2d& q = poly[(i + 1) % poly.size()];
    s += cross2(p, q);
  }
  return 0.5 * std::abs(s);
}

// Clips a convex polygon against the half-plane left of edge e0 -> e1
// (counterclockwise winding keeps the interior on the left).
std::vector<Vector2d> clip_edge(const std::vector<Vector2d>& poly,
                                const Vector2d& e0, const Vector2d& e1) {
  std::vector<Vector2d> out;
  out.reserve(poly.size() + 1);
  const Vector2d dir = e1 - e0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vector2d& cur = poly[i];
    const Vector2d& nxt = poly[(i + 1) % poly.size()];
    const double dc = cross2(dir, cur - e0);
    const double dn = cross2(dir, nxt - e0);
    if (dc >= 0.0) out.push_back(cur);
    if ((dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0)) {
      const double t = dc / (dc - dn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

double bev_intersection_area(const BevBox& a, const BevBox& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Vector2d> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i)
    poly = clip_edge(poly, cb[static_cast<std::size_t>(i)],
                     cb[static_cast<std::size_t>((i + 1) % 4)]);
  return polygon_area(poly);
}

}  // namespace

BevBox footprint(const Label3D& label) {
  return {label.location.x(), label.location.z(), label.width, label.length,
          label.rotation_y};
}

std::array<Vector2d, 4> bev_corners(const BevBox& box) {
  const double hw = box.w * 0.5;
  const double hl = box.l * 0.5;
  const double xs[4] = {hw, -hw, -hw, hw};
  const double zs[4] = {hl, hl, -hl, -hl};
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  std::array<Vector2d, 4> corners;
  for (int i = 0; i < 4; ++i) {
    corners[static_cast<std::size_t>(i)] =
        Vector2d(box.cx + c * xs[i] + s * zs[i], box.cz - s * xs[i] + c * zs[i]);
  }
  return corners;
}

double rotated_bev_iou(const BevBox& a, const BevBox& b) {
  const double area_a = a.w * a.l;
  const double area_b = b.w * b.l;
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou3d(const Label3D& a, const Label3D& b) {
  const double va = a.height * a.width * a.length;
  const double vb = b.height * b.width * b.length;
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  const double y_overlap = std::min(a.location.y(), b.location.y()) -
                           std::max(a.location.y() - a.height, b.location.y() - b.height);
  if (y_overlap <= 0.0) return 0.0;
  const double inter = bev_intersection_area(footprint(a), footprint(b)) * y_overlap;
  const double uni = va + vb - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

bool DifficultyRule::eligible(const Label3D& gt) const {
  if (gt.bbox2d.height() <= min_box_height_px) return false;
  if (gt.occlusion > max_occlusion) return false;
  return gt.truncation <= max_truncation;
}

DifficultyRule DifficultyRule::easy() { return {"Easy", 40.0, 0, 0.15}; }
DifficultyRule DifficultyRule::moderate() { return {"Moderate", 25.0, 1, 0.30}; }
DifficultyRule DifficultyRule::hard() { return {"Hard", 25.0, 2, 0.50}; }

const std::array<DifficultyRule, 3>& DifficultyRule::all() {
  static const std::array<DifficultyRule, 3> rules = {easy(), moderate(), hard()};
  return rules;
}

double ap_r40(const std::vector<EvalInstance>& instances, const LabelIouFn& iou_fn,
              double iou_threshold, const DifficultyRule& rule) {
  struct PredRef {
    double score;
    std::size_t instance;
    std::size_t index;
  };

  std::vector<PredRef> order;
  std::size_t eligible_gt = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = 0; j < instances[i].predictions.size(); ++j) {
      const auto& score = instances[i].predictions[j].score;
      if (!score.has_value())
        throw ValidationError("ap_r40: prediction without a score");
      order.push_back({*score, i, j});
    }
    for (const Label3D& gt : instances[i].ground_truth)
      if (rule.eligible(gt)) ++eligible_gt;
  }
  if (eligible_gt == 0) return 0.0;

  std::stable_sort(order.begin(), order.end(),
                   [](const PredRef& a, const PredRef& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> matched(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    matched[i].assign(instances[i].ground_truth.size(), false);

  std::size_t tp = 0;
  std::size_t fp = 0;
  std::vector<std::pair<double, double>> curve;  // (recall, precision)
  curve.reserve(order.size());

  for (const PredRef& pr : order) {
    const EvalInstance& inst = instances[pr.instance];
    const Label3D& pred = inst.predictions[pr.index];

    int best_eligible = -1;
    int best_ignored = -1;
    double best_eligible_iou = 0.0;
    double best_ignored_iou = 0.0;
    for (std::size_t g = 0; g < inst.ground_truth.size(); ++g) {
      if (matched[pr.instance][g]) continue;
      const double iou = iou_fn(pred, inst.ground_truth[g]);
      if (iou < iou_threshold) continue;
      if (rule.eligible(inst.ground_truth[g])) {
        if (best_eligible < 0 || iou > best_eligible_iou) {
          best_eligible = static_cast<int>(g);
          best_eligible_iou = iou;
        }
      } else if (best_ignored < 0 || iou > best_ignored_iou) {
        best_ignored = static_cast<int>(g);
        best_ignored_iou = iou;
      }
    }

    if (best_eligible >= 0) {
      matched[pr.instance][static_cast<std::size_t>(best_eligible)] = true;
      ++tp;
    } else if (best_ignored >= 0) {
      // Don't-care: consumes the ground truth, counts as neither TP nor FP.
      matched[pr.instance][static_cast<std::size_t>(best_ignored)] = true;
      continue;
    } else {
      ++fp;
    }
    curve.emplace_back(static_cast<double>(tp) / static_cast<double>(eligible_gt),
                       static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  double sum = 0.0;
  for (int k = 1; k <= 40; ++k) {
    const double r = static_cast<double>(k) / 40.0;
    double best = 0.0;
    for (const auto& [recall, precision] : curve)
      if (recall + 1e-12 >= r) best = std::max(best, precision);
    sum += best;
  }
  return sum / 40.0;
}

double ap_r40(const std::vector<Label3D>& predictions,
              const std::vector<Label3D>& ground_truth, const LabelIouFn& iou_fn,
              double iou_threshold, const DifficultyRule& rule) {
  return ap_r40(std::vector<EvalInstance>{{predictions, ground_truth}}, iou_fn,
                iou_threshold, rule);
}

SelectionMetrics selection_metrics(const std::vector<std::int64_t>& selected_ids,
                                   const std::vector<std::int64_t>& rejected_ids,
                                   const std::unordered_map<std::int64_t, bool>& oracle) {
  std::int64_t true_selected = 0;
  std::int64_t true_total = 0;
  for (const std::int64_t id : selected_ids) {
    const auto it = oracle.find(id);
    if (it == oracle.end())
      throw ValidationError("selection_metrics: id " + std::to_string(id) +
                            " missing from the oracle");
    if (it->second) {
      ++true_selected;
      ++true_total;
    }
  }
  for (const std::int64_t id : rejected_ids) {
    const auto it = oracle.find(id);
    if (it == oracle.end())
      throw ValidationError("selection_metrics: id " + std::to_string(id) +
                            " missing from the oracle");
    if (std::find(selected_ids.begin(), selected_ids.end(), id) != selected_ids.end())
      throw ValidationError("selection_metrics: id " + std::to_string(id) +
                            " appears as both selected and rejected");
    if (it->second) ++true_total;
  }

  SelectionMetrics m;
  m.selected_count = static_cast<std::int64_t>(selected_ids.size());
  m.precision = selected_ids.empty()
                    ? 1.0
                    : static_cast<double>(true_selected) /
                          static_cast<double>(selected_ids.size());
  m.recall = true_total == 0 ? 0.0
                             : static_cast<double>(true_selected) /
                                   static_cast<double>(true_total);
  return m;
}

}  // namespace sparse3d
