// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Release acceptance harness. Nine criteria, one PASS/FAIL line each,
// exit status 0 only when every criterion holds. Expected values come
// from checkers coded in this file (slab-interval rasterization for
// rotated IoU, a from-scratch PR-curve walk for AP, closed-form
// contraction ratios), never from running the routine under test twice.
//
// Usage: acceptance <path-to-sparse3d-cli>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparse3d/evalkit.hpp"
#include "sparse3d/geometry.hpp"
#include "sparse3d/kitti_io.hpp"
#include "sparse3d/pbf.hpp"
#include "sparse3d/rapa.hpp"
#include "sparse3d/rng.hpp"
#include "sparse3d/simharness.hpp"

using namespace sparse3d;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ----- criterion 1: camera-frame geometry ------------------------------

RigidTransform random_pose(SplitMix64& rng) {
  return RigidTransform::from_yaw_translation(
      rng.uniform(-kPi, kPi),
      Vec3(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)));
}

bool criterion_geometry(std::ostringstream& note) {
  SplitMix64 rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Vec3 c(rng.uniform(-30.0, 30.0), rng.uniform(-5.0, 5.0), rng.uniform(2.0, 80.0));
    const RigidTransform a = random_pose(rng);
    const RigidTransform b = random_pose(rng);
    const RigidTransform d = random_pose(rng);
    worst = std::max(worst, (transform_center(c, a, a) - c).norm());
    const Vec3 two_hop = transform_center(transform_center(c, a, b), b, d);
    worst = std::max(worst, (two_hop - transform_center(c, a, d)).norm());
  }
  double worst_alpha = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double x = rng.uniform(-40.0, 40.0);
    const double z = rng.uniform(0.5, 80.0);
    const double alpha = rng.uniform(-kPi, kPi);
    const double theta = viewing_angle(x, z);
    const double back = alpha_from_rotation(rotation_from_alpha(alpha, theta), theta);
    worst_alpha = std::max(worst_alpha, std::fabs(wrap_angle(back - alpha)));
  }
  note << "10000 triples, max transform err " << worst << ", max alpha err " << worst_alpha;
  return worst <= 1e-9 && worst_alpha <= 1e-9;
}

// ----- criterion 2: placement soundness --------------------------------

// Road ratio recomputed from the documented contract: integer raster
// cells under the floor/ceil box bounds, clamped to the mask.
double audit_road_ratio(const BBox2D& box, const MaskRaster& mask) {
  if (mask.width <= 0 || mask.height <= 0) return 0.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.left)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.top)));
  const int x1 = std::min(mask.width, static_cast<int>(std::ceil(box.right)));
  const int y1 = std::min(mask.height, static_cast<int>(std::ceil(box.bottom)));
  if (x1 <= x0 || y1 <= y0) return 0.0;
  long long road = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (mask.foreground(x, y)) ++road;
  return static_cast<double>(road) /
         (static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0));
}

double audit_iou2d(const BBox2D& a, const BBox2D& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

CameraRig simple_rig(double f, double cx, double cy, int w, int h,
                     const RigidTransform& pose = RigidTransform::identity()) {
  CameraRig rig;
  rig.projection << f, 0.0, cx, 0.0, 0.0, f, cy, 0.0, 0.0, 0.0, 1.0, 0.0;
  rig.extrinsic = pose;
  rig.image_width = w;
  rig.image_height = h;
  return rig;
}

bool criterion_rapa(std::ostringstream& note) {
  const RapaConfig cfg;
  int returned = 0;
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    SplitMix64 rng(seed_from(2026, "accept-scene", static_cast<std::uint64_t>(i)));
    const double f = rng.uniform(90.0, 120.0);
    const double cx = rng.uniform(185.0, 215.0);
    const double cy = rng.uniform(44.0, 56.0);
    auto jitter = [&rng] {
      return RigidTransform::from_yaw_translation(
          rng.uniform(-0.08, 0.08),
          Vec3(rng.uniform(-1.5, 1.5), 0.0, rng.uniform(-1.5, 1.5)));
    };
    const CameraRig source_rig =
        simple_rig(rng.uniform(90.0, 120.0), rng.uniform(185.0, 215.0),
                   rng.uniform(44.0, 56.0), 400, 100, jitter());
    const CameraRig target_rig = simple_rig(f, cx, cy, 400, 100, jitter());

    Label3D src;
    src.class_name = "Car";
    src.location = Vec3(rng.uniform(-6.0, 6.0), 1.6, rng.uniform(6.0, 55.0));
    src.height = rng.uniform(1.3, 1.7);
    src.width = rng.uniform(1.5, 1.9);
    src.length = rng.uniform(3.6, 4.8);
    src.rotation_y = rng.uniform(-kPi, kPi);
    src.alpha = alpha_from_rotation(
        src.rotation_y, viewing_angle(src.location.x(), src.location.z()));
    const ObjectPatch patch{ImageRgba::filled(8, 6, 180, 40, 40), src, source_rig,
                            "000042"};

    // Road band widening toward the bottom edge; every fifth scene is
    // pinched and every eleventh has a hole punched out.
    MaskRaster mask = MaskRaster::filled(400, 100, 0);
    const int horizon = static_cast<int>(cy) + 3;
    const double pinch = (i % 5 == 0) ? 0.25 : 1.0;
    for (int y = horizon; y < 100; ++y) {
      const int half = static_cast<int>(
          std::min(199.0, pinch * (14.0 + 4.2 * static_cast<double>(y - horizon))));
      const int left = std::max(0, static_cast<int>(cx) - half);
      const int right = std::min(399, static_cast<int>(cx) + half);
      for (int x = left; x <= right; ++x) mask.set(x, y, 255);
    }
    if (i % 11 == 0)
      for (int y = 60; y < 75; ++y)
        for (int x = 170; x < 230; ++x) mask.set(x, y, 0);

    std::vector<BBox2D> existing;
    const int blockers = static_cast<int>(rng.next_below(4));
    for (int k = 0; k < blockers; ++k) {
      const double l = rng.uniform(0.0, 360.0);
      const double t = rng.uniform(20.0, 80.0);
      existing.push_back({l, t, l + rng.uniform(15.0, 60.0), t + rng.uniform(8.0, 25.0)});
    }

    PlacementSearch search;
    const auto placed =
        find_placement(patch, target_rig, mask, existing, cfg,
                       seed_from(2026, "accept-trial", static_cast<std::uint64_t>(i)),
                       &search);
    if (!placed) continue;
    ++returned;

    const Label3D& lab = placed->label;
    bool ok = audit_road_ratio(lab.bbox2d, mask) >= cfg.tau_road;
    double max_iou = 0.0;
    for (const BBox2D& e : existing) max_iou = std::max(max_iou, audit_iou2d(lab.bbox2d, e));
    ok = ok && max_iou < cfg.tau_overlap;
    ok = ok && lab.location.z() >= cfg.depth_min && lab.location.z() < cfg.depth_max;
    ok = ok && lab.height == src.height && lab.width == src.width && lab.length == src.length;
    const double alpha_back =
        wrap_angle(lab.rotation_y - viewing_angle(lab.location.x(), lab.location.z()));
    ok = ok && std::fabs(wrap_angle(alpha_back - src.alpha)) <= 1e-9;
    ok = ok && std::fabs(wrap_angle(lab.alpha - src.alpha)) <= 1e-9;
    if (!ok) ++violations;
  }

  // Roadless scene: the search must burn all trials and return nothing.
  const CameraRig plain = simple_rig(100.0, 200.0, 50.0, 400, 100);
  Label3D mid;
  mid.location = Vec3(0.0, 1.65, 20.0);
  mid.height = 1.5;
  mid.width = 1.7;
  mid.length = 4.0;
  mid.alpha = alpha_from_rotation(0.0, viewing_angle(0.0, 20.0));
  const ObjectPatch mid_patch{ImageRgba::filled(8, 6, 180, 40, 40), mid, plain, "000001"};
  PlacementSearch zero_search;
  const auto zero_hit =
      find_placement(mid_patch, plain, MaskRaster::filled(400, 100, 0), {}, cfg, 99,
                     &zero_search);
  const bool zero_ok = !zero_hit && zero_search.trials == cfg.max_trials;

  // Saturated scene: an existing strip covers every reachable box, so
  // every trial fails the overlap gate.
  const CameraRig tight = simple_rig(100.0, 50.0, 50.0, 100, 100);
  const ObjectPatch tight_patch{ImageRgba::filled(8, 6, 180, 40, 40), mid, tight,
                                "000002"};
  PlacementSearch full_search;
  const auto full_hit =
      find_placement(tight_patch, tight, MaskRaster::filled(100, 100, 255),
                     {BBox2D{19.0, 50.0, 81.0, 60.0}}, cfg, 99, &full_search);
  const bool full_ok = !full_hit && full_search.trials == cfg.max_trials;

  note << returned << "/1000 scenes placed, " << violations << " audit violations"
       << ", exhausted searches " << zero_search.trials << "/" << full_search.trials
       << " trials";
  return violations == 0 && returned >= 100 && zero_ok && full_ok;
}

// ----- criterion 3: prototype update contraction -----------------------

bool criterion_contraction(std::ostringstream& note) {
  SplitMix64 rng(3003);
  const int dim = 32;
  const int steps = 100;
  double worst = 0.0;
  for (const double beta : {0.005, 0.01, 0.5}) {
    for (int trial = 0; trial < 20; ++trial) {
      FeatureVec p(dim), f(dim);
      for (int i = 0; i < dim; ++i) p[i] = rng.gaussian();
      if (beta == 0.5) {
        // (1-beta)^100 is ~8e-31 here, far below the rounding floor of a
        // nonzero anchor; a zero anchor keeps every update bit exact.
        f.setZero();
      } else {
        for (int i = 0; i < dim; ++i) f[i] = rng.gaussian();
      }
      const double d0 = (p - f).norm();
      FeatureVec q = p;
      for (int s = 0; s < steps; ++s) q = update_prototype(q, f, beta);
      const double ratio = (q - f).norm() / d0;
      const double expected = std::pow(1.0 - beta, steps);
      worst = std::max(worst, std::fabs(ratio / expected - 1.0));
    }
  }
  note << "worst relative error " << worst << " over betas {0.005, 0.01, 0.5}";
  return worst <= 1e-9;
}

// ----- criterion 4: depth likelihood point checks ----------------------

bool criterion_depth(std::ostringstream& note) {
  const double nll = depth_nll(10.0, 9.0, 1.0);
  const bool point = std::fabs(nll - std::sqrt(2.0)) <= 1e-12;
  const bool unit = depth_score(0.0) == 1.0;
  bool monotone = true;
  double prev = depth_score(-6.0);
  for (int i = 1; i < 1000; ++i) {
    const double s = depth_score(-6.0 + 12.0 * static_cast<double>(i) / 999.0);
    if (!(s < prev)) {
      monotone = false;
      break;
    }
    prev = s;
  }
  note << "nll(10,9,1)=" << nll << ", score(0)=" << depth_score(0.0)
       << ", monotone=" << (monotone ? "yes" : "no");
  return point && unit && monotone;
}

// ----- criterion 5: rotated IoU vs rasterization -----------------------

// Restricts [lo, hi] to {x : |m*x + c| <= h}.
void clip_slab(double m, double c, double h, double& lo, double& hi) {
  if (m == 0.0) {
    if (std::fabs(c) > h) {
      lo = 1.0;
      hi = 0.0;
    }
    return;
  }
  double a = (-h - c) / m;
  double b = (h - c) / m;
  if (a > b) std::swap(a, b);
  lo = std::max(lo, a);
  hi = std::min(hi, b);
}

// Rasterizes the overlap on a grid x grid lattice of cell centers over
// the intersection of the two axis-aligned bounds. Each row reduces to
// an interval intersection, so the full lattice is classified without
// touching clipping code.
double raster_iou(const BevBox& a, const BevBox& b, int grid) {
  const double area_a = a.w * a.l;
  const double area_b = b.w * b.l;
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  auto bounds = [](const BevBox& box, double& x0, double& x1, double& z0, double& z1) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const double ex = std::fabs(c) * box.w / 2.0 + std::fabs(s) * box.l / 2.0;
    const double ez = std::fabs(s) * box.w / 2.0 + std::fabs(c) * box.l / 2.0;
    x0 = box.cx - ex;
    x1 = box.cx + ex;
    z0 = box.cz - ez;
    z1 = box.cz + ez;
  };
  double ax0, ax1, az0, az1, bx0, bx1, bz0, bz1;
  bounds(a, ax0, ax1, az0, az1);
  bounds(b, bx0, bx1, bz0, bz1);
  const double x0 = std::max(ax0, bx0);
  const double x1 = std::min(ax1, bx1);
  const double z0 = std::max(az0, bz0);
  const double z1 = std::min(az1, bz1);
  if (x1 <= x0 || z1 <= z0) return 0.0;
  const double hx = (x1 - x0) / grid;
  const double hz = (z1 - z0) / grid;
  const double ca = std::cos(a.yaw), sa = std::sin(a.yaw);
  const double cb = std::cos(b.yaw), sb = std::sin(b.yaw);
  long long cells = 0;
  for (int iz = 0; iz < grid; ++iz) {
    const double z = z0 + (iz + 0.5) * hz;
    double lo = x0;
    double hi = x1;
    clip_slab(ca, -ca * a.cx - sa * (z - a.cz), a.w / 2.0, lo, hi);
    clip_slab(sa, -sa * a.cx + ca * (z - a.cz), a.l / 2.0, lo, hi);
    clip_slab(cb, -cb * b.cx - sb * (z - b.cz), b.w / 2.0, lo, hi);
    clip_slab(sb, -sb * b.cx + cb * (z - b.cz), b.l / 2.0, lo, hi);
    if (hi <= lo) continue;
    const long long first =
        std::max<long long>(0, static_cast<long long>(std::ceil((lo - x0) / hx - 0.5)));
    const long long last = std::min<long long>(
        grid - 1, static_cast<long long>(std::floor((hi - x0) / hx - 0.5)));
    if (last >= first) cells += last - first + 1;
  }
  const double inter = static_cast<double>(cells) * hx * hz;
  return inter / (area_a + area_b - inter);
}

bool criterion_rotated_iou(std::ostringstream& note) {
  const int grid = 3163;  // 3163^2 = 10,004,569 lattice samples per pair
  SplitMix64 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double spread = t < 500 ? 1.0 : 3.0;
    auto draw = [&rng, spread] {
      return BevBox{rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                    rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0),
                    rng.uniform(-kPi, kPi)};
    };
    const BevBox a = draw();
    const BevBox b = draw();
    worst = std::max(worst, std::fabs(rotated_bev_iou(a, b) - raster_iou(a, b, grid)));
  }
  const BevBox sq{0.0, 0.0, 1.0, 1.0, 0.0};
  const BevBox sq45{0.0, 0.0, 1.0, 1.0, kPi / 4.0};
  const double diag = rotated_bev_iou(sq, sq45);
  const bool diag_ok = std::fabs(diag - 0.7071067811865476) <= 1e-4 &&
                       std::fabs(diag - raster_iou(sq, sq45, grid)) <= 1e-3;
  note << "1000 pairs, max |clip - raster| " << worst << ", square-vs-45 " << diag;
  return worst <= 1e-3 && diag_ok;
}

// ----- criterion 6: AP_R40 vs an exhaustive PR oracle ------------------

double oracle_ap_r40(const std::vector<EvalInstance>& instances, const LabelIouFn& iou_fn,
                     double threshold, const DifficultyRule& rule) {
  struct Flat {
    double score;
    std::size_t inst;
    std::size_t pred;
  };
  std::vector<Flat> flat;
  std::size_t eligible = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = 0; j < instances[i].predictions.size(); ++j)
      flat.push_back({*instances[i].predictions[j].score, i, j});
    for (const Label3D& gt : instances[i].ground_truth)
      if (rule.eligible(gt)) ++eligible;
  }
  if (eligible == 0) return 0.0;

  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&flat](std::size_t x, std::size_t y) {
    if (flat[x].score != flat[y].score) return flat[x].score > flat[y].score;
    return x < y;  // ties keep submission order
  });

  std::vector<std::vector<char>> taken(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    taken[i].assign(instances[i].ground_truth.size(), 0);

  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const std::size_t id : order) {
    const EvalInstance& inst = instances[flat[id].inst];
    const Label3D& pred = inst.predictions[flat[id].pred];
    int best = -1;
    double best_iou = 0.0;
    bool best_is_eligible = false;
    for (std::size_t g = 0; g < inst.ground_truth.size(); ++g) {
      if (taken[flat[id].inst][g]) continue;
      const double v = iou_fn(pred, inst.ground_truth[g]);
      if (v < threshold) continue;
      const bool e = rule.eligible(inst.ground_truth[g]);
      if (best < 0 || (e && !best_is_eligible) || (e == best_is_eligible && v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
        best_is_eligible = e;
      }
    }
    if (best >= 0) {
      taken[flat[id].inst][static_cast<std::size_t>(best)] = 1;
      if (!best_is_eligible) continue;  // don't-care absorbs the prediction
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(eligible));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  double sum = 0.0;
  for (int k = 1; k <= 40; ++k) {
    const double r = static_cast<double>(k) / 40.0;
    double best_p = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i)
      if (recall[i] + 1e-12 >= r) best_p = std::max(best_p, precision[i]);
    sum += best_p;
  }
  return sum / 40.0;
}

bool criterion_ap(std::ostringstream& note) {
  SplitMix64 rng(606);
  const LabelIouFn iou_fn = [](const Label3D& a, const Label3D& b) { return iou3d(a, b); };
  int exact = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n_inst = (t < 140) ? 1 : 2;
    std::vector<EvalInstance> instances(static_cast<std::size_t>(n_inst));
    for (EvalInstance& inst : instances) {
      const int n_gt = 1 + static_cast<int>(rng.next_below(6));
      for (int g = 0; g < n_gt; ++g) {
        Label3D gt;
        gt.location = Vec3(rng.uniform(-10.0, 10.0), 1.65, rng.uniform(5.0, 50.0));
        gt.height = rng.uniform(1.3, 1.8);
        gt.width = rng.uniform(1.5, 1.9);
        gt.length = rng.uniform(3.5, 4.8);
        gt.rotation_y = rng.uniform(-kPi, kPi);
        gt.bbox2d = {100.0, 100.0, 140.0, 100.0 + rng.uniform(20.0, 60.0)};
        gt.occlusion = static_cast<int>(rng.next_below(4));
        gt.truncation = rng.uniform(0.0, 0.6);
        inst.ground_truth.push_back(gt);
      }
      int budget = 10;
      for (const Label3D& gt : inst.ground_truth) {
        if (budget == 0) break;
        if (rng.next_double() < 0.8) {
          Label3D pred = gt;
          pred.location.x() += rng.uniform(-1.2, 1.2);
          pred.location.z() += rng.uniform(-1.2, 1.2);
          pred.rotation_y = wrap_angle(pred.rotation_y + rng.uniform(-0.2, 0.2));
          pred.score = 0.05 * static_cast<double>(rng.next_below(21));
          inst.predictions.push_back(pred);
          --budget;
        }
      }
      const int extras = std::min<int>(budget, static_cast<int>(rng.next_below(4)));
      for (int e = 0; e < extras; ++e) {
        Label3D junk;
        junk.location = Vec3(rng.uniform(-12.0, 12.0), 1.65, rng.uniform(5.0, 55.0));
        junk.height = 1.5;
        junk.width = 1.7;
        junk.length = 4.2;
        junk.rotation_y = rng.uniform(-kPi, kPi);
        junk.score = 0.05 * static_cast<double>(rng.next_below(21));
        inst.predictions.push_back(junk);
      }
    }
    const DifficultyRule& rule = DifficultyRule::all()[rng.next_below(3)];
    const double lib = ap_r40(instances, iou_fn, 0.5, rule);
    const double orc = oracle_ap_r40(instances, iou_fn, 0.5, rule);
    if (lib == orc) ++exact;
    worst = std::max(worst, std::fabs(lib - orc));
  }

  // Hand case: TP, FP, TP over two eligible ground truths.
  Label3D g0;
  g0.location = Vec3(0.0, 1.65, 10.0);
  g0.height = 1.5;
  g0.width = 1.7;
  g0.length = 4.0;
  g0.bbox2d = {100.0, 100.0, 140.0, 150.0};
  Label3D g1 = g0;
  g1.location = Vec3(5.0, 1.65, 20.0);
  Label3D p0 = g0;
  p0.score = 0.9;
  Label3D pf = g0;
  pf.location = Vec3(-8.0, 1.65, 35.0);
  pf.score = 0.8;
  Label3D p2 = g1;
  p2.score = 0.7;
  const double hand =
      ap_r40({p0, pf, p2}, {g0, g1}, iou_fn, 0.5, DifficultyRule::easy());
  const bool hand_ok = std::fabs(hand - 5.0 / 6.0) <= 1e-9;

  note << exact << "/200 exact, max |diff| " << worst << ", hand case " << hand;
  return exact == 200 && hand_ok;
}

// ----- criterion 7: prototype filter vs confidence baseline ------------

bool criterion_pbf(std::ostringstream& note) {
  ExperimentConfig cfg;
  cfg.scene.num_scenes = 1000;
  cfg.epochs = 1;
  cfg.seed = 20260822;
  cfg.record_scene_stats = true;
  const ExperimentReport report = run_experiment(cfg);
  if (report.scene_stats.empty()) {
    note << "no per-scene stats recorded";
    return false;
  }
  const std::vector<SceneTally>& tallies = report.scene_stats.front();

  SplitMix64 boot(424242);
  const int resamples = 1000;
  int wins = 0;
  for (int b = 0; b < resamples; ++b) {
    std::int64_t ts = 0, sel = 0, tc = 0, cs = 0;
    for (std::size_t i = 0; i < tallies.size(); ++i) {
      const SceneTally& t = tallies[boot.next_below(tallies.size())];
      ts += t.true_selected;
      sel += t.selected;
      tc += t.true_conf_selected;
      cs += t.conf_selected;
    }
    const double pbf = sel > 0 ? static_cast<double>(ts) / static_cast<double>(sel) : 1.0;
    const double conf = cs > 0 ? static_cast<double>(tc) / static_cast<double>(cs) : 1.0;
    if (pbf > conf) ++wins;
  }

  ExperimentConfig growth_cfg;
  growth_cfg.scene.num_scenes = 100;
  growth_cfg.epochs = 10;
  growth_cfg.seed = 77;
  const ExperimentReport growth = run_experiment(growth_cfg);
  bool monotone = growth.epochs.size() == 11;
  for (std::size_t i = 1; i < growth.epochs.size(); ++i)
    monotone = monotone && growth.epochs[i].bank_size >= growth.epochs[i - 1].bank_size;

  note << "bootstrap wins " << wins << "/" << resamples << ", bank "
       << growth.epochs.front().bank_size << " -> " << growth.epochs.back().bank_size;
  return wins >= 950 && monotone;
}

// ----- criterion 8: serialization bit-exactness ------------------------

Label3D random_disk_label(SplitMix64& rng) {
  static const char* kClasses[] = {"Car", "Van", "Truck", "Pedestrian"};
  Label3D label;
  label.class_name = kClasses[rng.next_below(4)];
  label.truncation = rng.uniform(0.0, 1.0);
  label.occlusion = static_cast<int>(rng.next_below(4));
  label.alpha = rng.uniform(-kPi, kPi);
  const double left = rng.uniform(0.0, 1200.0);
  const double top = rng.uniform(0.0, 350.0);
  label.bbox2d = {left, top, left + rng.uniform(1.0, 40.0), top + rng.uniform(1.0, 25.0)};
  label.height = rng.uniform(1.2, 2.2);
  label.width = rng.uniform(1.4, 2.0);
  label.length = rng.uniform(3.0, 5.5);
  label.location = Vec3(rng.uniform(-30.0, 30.0), rng.uniform(0.5, 2.5),
                        rng.uniform(2.0, 80.0));
  label.rotation_y = rng.uniform(-kPi, kPi);
  if (rng.next_below(2) == 0) label.score = rng.uniform(0.0, 1.0);
  return label;
}

bool criterion_io(std::ostringstream& note) {
  SplitMix64 rng(808);
  int label_bad = 0, calib_bad = 0, mask_bad = 0, bank_bad = 0;

  for (int t = 0; t < 1000; ++t) {
    LabelFile file;
    file.image_id = "000123";
    const int n = 1 + static_cast<int>(rng.next_below(8));
    for (int i = 0; i < n; ++i) file.labels.push_back(random_disk_label(rng));
    const std::string s1 = format_label_file(file);
    if (format_label_file(parse_label_file(s1, file.image_id)) != s1) ++label_bad;
  }

  for (int t = 0; t < 1000; ++t) {
    CalibFile calib;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) calib.p2(r, c) = rng.uniform(-1000.0, 1000.0);
    if (rng.next_below(2) == 0) {
      Mat34 p0;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) p0(r, c) = rng.uniform(-1000.0, 1000.0);
      calib.p0 = p0;
    }
    if (rng.next_below(2) == 0) {
      Eigen::Matrix3d r0;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) r0(r, c) = rng.uniform(-1.0, 1.0);
      calib.r0_rect = r0;
    }
    if (rng.next_below(2) == 0) {
      Mat34 tr;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) tr(r, c) = rng.uniform(-5.0, 5.0);
      calib.tr_velo_to_cam = tr;
    }
    if (rng.next_below(2) == 0)
      calib.image_size = {1 + static_cast<int>(rng.next_below(2000)),
                          1 + static_cast<int>(rng.next_below(1000))};
    const std::string s1 = format_calib_file(calib);
    if (format_calib_file(parse_calib_file(s1)) != s1) ++calib_bad;
  }

  for (int t = 0; t < 1000; ++t) {
    const int w = 1 + static_cast<int>(rng.next_below(32));
    const int h = 1 + static_cast<int>(rng.next_below(32));
    MaskRaster mask = MaskRaster::filled(w, h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        mask.set(x, y, rng.next_below(2) == 0 ? 0 : 255);
    const std::vector<std::uint8_t> b1 = format_mask(mask);
    if (format_mask(parse_mask(b1)) != b1) ++mask_bad;
  }

  for (int t = 0; t < 1000; ++t) {
    GtBank bank;
    const int images = 1 + static_cast<int>(rng.next_below(3));
    for (int j = 0; j < images; ++j) {
      char id[8];
      std::snprintf(id, sizeof id, "%06d", t * 4 + j);
      std::vector<GtBankEntry>& entries = bank[id];
      const int count = 1 + static_cast<int>(rng.next_below(3));
      for (int e = 0; e < count; ++e) {
        GtBankEntry entry;
        entry.label = random_disk_label(rng);
        // spread the footprints so the bank stays free of near duplicates
        entry.label.location = Vec3(-20.0 + 12.0 * e, 1.6, 6.0 + 15.0 * e);
        if (rng.next_below(2) == 0) {
          entry.source = GtSource::kSparseGt;
          entry.epoch_added = 0;
        } else {
          entry.source = GtSource::kPseudo;
          entry.epoch_added = 1 + static_cast<int>(rng.next_below(5));
          entry.s_depth = rng.uniform(0.0, 1.0);
          entry.s_proto = rng.uniform(0.0, 1.0);
        }
        entries.push_back(entry);
      }
    }
    const std::string s1 = format_gt_bank(bank);
    if (format_gt_bank(parse_gt_bank(s1)) != s1) ++bank_bad;
  }

  const std::string sample =
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 "
      "-1.59";
  const bool sample_ok = format_label_line(parse_label_line(sample)) == sample;

  note << "mismatches: labels " << label_bad << ", calib " << calib_bad << ", masks "
       << mask_bad << ", banks " << bank_bad << ", sample line "
       << (sample_ok ? "byte-identical" : "DIFFERS");
  return label_bad + calib_bad + mask_bad + bank_bad == 0 && sample_ok;
}

// ----- criterion 9: job-count determinism through the CLI --------------

bool criterion_determinism(const std::string& cli, std::ostringstream& note) {
  if (cli.empty()) {
    note << "missing CLI path argument";
    return false;
  }
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() /
                        ("sparse3d_accept_" + std::to_string(::getpid()));
  const fs::path out1 = base / "jobs1";
  const fs::path out8 = base / "jobs8";
  fs::create_directories(out1);
  fs::create_directories(out8);
  auto run = [&cli](const fs::path& out, int jobs) {
    const std::string cmd = "\"" + cli + "\" simulate --seed 42 --scenes 40 --epochs 4" +
                            " --jobs " + std::to_string(jobs) + " --out \"" +
                            out.string() + "\" > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
  };
  bool ok = false;
  if (run(out1, 1) && run(out8, 8)) {
    const auto csv1 = read_binary_file(out1 / "report.csv");
    const auto csv8 = read_binary_file(out8 / "report.csv");
    const auto json1 = read_binary_file(out1 / "report.json");
    const auto json8 = read_binary_file(out8 / "report.json");
    ok = csv1 == csv8 && json1 == json8;
    note << "report.csv " << csv1.size() << " B, report.json " << json1.size()
         << " B, --jobs 1 vs 8 " << (ok ? "byte-identical" : "DIFFER");
  } else {
    note << "cli invocation failed";
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  struct Entry {
    const char* title;
    std::function<bool(std::ostringstream&)> fn;
    double budget_s;  // enforced wall-clock bound, 0 when unbounded
  };
  const std::vector<Entry> entries = {
      {"camera transforms round-trip and preserve alpha", criterion_geometry, 5.0},
      {"placements pass an independent validity audit", criterion_rapa, 0.0},
      {"prototype updates contract at (1-beta)^n", criterion_contraction, 0.0},
      {"depth likelihood point values and monotonicity", criterion_depth, 0.0},
      {"rotated IoU matches a rasterization oracle", criterion_rotated_iou, 60.0},
      {"ap_r40 matches an exhaustive PR-curve oracle", criterion_ap, 0.0},
      {"prototype filtering beats the confidence baseline", criterion_pbf, 120.0},
      {"serialization round-trips are byte exact", criterion_io, 0.0},
      {"simulate reports match across --jobs 1 and 8",
       [&cli](std::ostringstream& note) { return criterion_determinism(cli, note); },
       0.0},
  };

  bool all_ok = true;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::ostringstream note;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = entries[i].fn(note);
    } catch (const std::exception& e) {
      note << "exception: " << e.what();
      ok = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (entries[i].budget_s > 0.0 && secs >= entries[i].budget_s) {
      ok = false;
      note << " [exceeded " << entries[i].budget_s << " s budget]";
    }
    std::printf("[%s] criterion %zu: %s (%s; %.2f s)\n", ok ? "PASS" : "FAIL", i + 1,
                entries[i].title, note.str().c_str(), secs);
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  std::printf("%s\n", all_ok ? "acceptance: 9/9 criteria passed"
                             : "acceptance: criteria FAILED");
  return all_ok ? 0 : 1;
}
