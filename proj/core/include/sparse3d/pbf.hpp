// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Prototype-based filtering of detector outputs.
//
// A capacity-bounded bank of feature prototypes summarizes what reliable
// objects of one class look like in feature space. Candidate detections
// pass through two gates: a depth-uncertainty gate on the detector's
// predicted log scale (S_depth = exp(-sigma) must exceed tau_depth) and
// an appearance gate (max cosine similarity against the bank must exceed
// tau_proto). Survivors become pseudo ground truth; their features are
// folded back into the bank with a small learning rate.

#ifndef SPARSE3D_PBF_HPP_
#define SPARSE3D_PBF_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparse3d/geometry.hpp"
#include "sparse3d/kitti_io.hpp"

namespace sparse3d {

using FeatureVec = Eigen::VectorXd;

struct BankConfig {
  int capacity = 256;         // maximum prototype count (K)
  double tau_new = 0.8;       // cosine at or above this merges instead of spawning
  double beta_init = 0.01;    // merge rate while building the bank
  double beta_train = 0.005;  // merge rate during refinement

  void validate() const;
};

struct PrototypeSlot {
  FeatureVec vector;
  std::int64_t update_count = 1;
};

struct PrototypeBank {
  BankConfig config;
  std::vector<PrototypeSlot> slots;
  std::int64_t zero_features_skipped = 0;

  bool empty() const { return slots.empty(); }
  int dim() const { return slots.empty() ? 0 : static_cast<int>(slots[0].vector.size()); }
};

// Banks keyed by class name.
using PrototypeBankSet = std::map<std::string, PrototypeBank>;

// One detector output: a scored label plus the two extra heads the
// filter consumes. sigma_raw is the unconstrained log-scale output; it
// may be negative (confident), so depth_score can exceed 1.
struct Prediction {
  std::int64_t id = -1;
  std::string image_id;
  Label3D label;        // score required downstream
  FeatureVec feature;
  double sigma_raw = 0.0;
};

struct PbfConfig {
  double tau_depth = 1.0;   // on S_depth = exp(-sigma_raw), strict >
  double tau_proto = 0.85;  // on max cosine, strict >

  void validate() const;
};

// Cosine similarity; throws ValidationError on a zero vector or a
// dimension mismatch.
double cosine_similarity(const FeatureVec& a, const FeatureVec& b);

// Highest cosine similarity between f and any prototype. Throws
// ValidationError on an empty bank.
double proto_score(const FeatureVec& f, const PrototypeBank& bank);

// Index of the most similar prototype; ties resolve to the lowest index.
int nearest_slot(const PrototypeBank& bank, const FeatureVec& f);

// Convex step of a prototype towards a feature:
//   p' = (1 - beta) * p + beta * f.
FeatureVec update_prototype(const FeatureVec& p, const FeatureVec& f, double beta);

// Builds a bank from features in arrival order. Each feature merges into
// its nearest prototype when similarity >= tau_new, opens a new slot
// while capacity remains, and otherwise merges into the nearest slot
// regardless of similarity. Zero features are skipped and counted.
PrototypeBank initialize_prototypes(const std::vector<FeatureVec>& features,
                                    const BankConfig& config);

// Folds features into an existing bank with beta_train, same merge rule.
void refine_prototypes(PrototypeBank& bank, const std::vector<FeatureVec>& features);

// Laplacian negative log-likelihood of a depth residual under scale
// sigma (positive domain): sqrt(2)/sigma * |d_gt - d_pred| + log(sigma).
double depth_nll(double d_gt, double d_pred, double sigma_scale);

// Depth-confidence score from the raw head output: exp(-sigma_raw).
double depth_score(double sigma_raw);

enum class RejectReason { kDepth, kProto };

struct ScoredPrediction {
  Prediction prediction;
  double s_depth = 0.0;
  std::optional<double> s_proto;   // absent when the depth gate already failed
};

struct RejectedPrediction {
  Prediction prediction;
  double s_depth = 0.0;
  std::optional<double> s_proto;
  RejectReason reason = RejectReason::kDepth;
};

struct SelectionResult {
  std::vector<ScoredPrediction> selected;
  std::vector<RejectedPrediction> rejected;
};

// Two-stage filter in input order: depth gate first (rejections carry no
// prototype score), then the appearance gate. Both comparisons are
// strict. Throws ValidationError on an empty bank.
SelectionResult select_pseudo_labels(const std::vector<Prediction>& predictions,
                                     const PrototypeBank& bank, const PbfConfig& config);

// Appends selected predictions of one image as pseudo ground truth at
// the given epoch. A candidate whose footprint overlaps any entry
// already stored for the image with rotated-BEV IoU > 0.5 is dropped;
// earlier candidates in the same call count as stored.
void gt_bank_insert(GtBank& bank, const std::string& image_id,
                    const std::vector<ScoredPrediction>& selected, int epoch);

// ----- persistence ----------------------------------------------------

// Detector outputs ride JSON lines:
//   {"image_id": "000123", "label": "<16-field line>",
//    "sigma": -0.2, "feature": [ ... ]}
// Ids are assigned from the 0-based position in the stream.
std::vector<Prediction> parse_predictions_jsonl(const std::string& text);
std::string format_predictions_jsonl(const std::vector<Prediction>& predictions);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path,
                      const std::vector<Prediction>& predictions);

// Bank sets persist as a single JSON document keyed by class name.
PrototypeBankSet parse_prototype_banks(const std::string& text);
std::string format_prototype_banks(const PrototypeBankSet& banks);
PrototypeBankSet load_prototype_banks(const std::filesystem::path& path);
void save_prototype_banks(const std::filesystem::path& path,
                          const PrototypeBankSet& banks);

}  // namespace sparse3d

#endif  // SPARSE3D_PBF_HPP_
