// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/pbf.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

#include "sparse3d/evalkit.hpp"

namespace sparse3d {

namespace {

using nlohmann::json;

bool is_zero_feature(const FeatureVec& f) {
  return f.size() == 0 || f.squaredNorm() == 0.0;
}

// Shared merge step for initialization and refinement.
void merge_feature(PrototypeBank& bank, const FeatureVec& f, double beta) {
  if (is_zero_feature(f)) {
    ++bank.zero_features_skipped;
    return;
  }
  if (bank.slots.empty()) {
    bank.slots.push_back({f, 1});
    return;
  }
  if (f.size() != bank.dim())
    throw ValidationError("prototype bank: feature dimension " +
                          std::to_string(f.size()) + " does not match bank dimension " +
                          std::to_string(bank.dim()));
  const int j = nearest_slot(bank, f);
  const double similarity = cosine_similarity(f, bank.slots[static_cast<std::size_t>(j)].vector);
  if (similarity >= bank.config.tau_new ||
      static_cast<int>(bank.slots.size()) >= bank.config.capacity) {
    PrototypeSlot& slot = bank.slots[static_cast<std::size_t>(j)];
    slot.vector = update_prototype(slot.vector, f, beta);
    ++slot.update_count;
  } else {
    bank.slots.push_back({f, 1});
  }
}

}  // namespace

void BankConfig::validate() const {
  if (capacity < 1)
    throw ValidationError("bank config: capacity must be at least 1");
  if (!(tau_new >= -1.0 && tau_new <= 1.0))
    throw ValidationError("bank config: tau_new must lie in [-1, 1]");
  if (!(beta_init > 0.0 && beta_init <= 1.0))
    throw ValidationError("bank config: beta_init must lie in (0, 1]");
  if (!(beta_train > 0.0 && beta_train <= 1.0))
    throw ValidationError("bank config: beta_train must lie in (0, 1]");
}

void PbfConfig::validate() const {
  if (!(tau_depth >= 0.0))
    throw ValidationError("pbf config: tau_depth must be non-negative");
  if (!(tau_proto <= 1.0))
    throw ValidationError("pbf config: tau_proto must not exceed 1");
}

double cosine_similarity(const FeatureVec& a, const FeatureVec& b) {
  if (a.size() != b.size())
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine: undefined for a zero vector");
  return a.dot(b) / (na * nb);
}

double proto_score(const FeatureVec& f, const PrototypeBank& bank) {
  if (bank.empty())
    throw ValidationError("proto_score: bank has no prototypes");
  double best = -2.0;
  for (const PrototypeSlot& slot : bank.slots)
    best = std::max(best, cosine_similarity(f, slot.vector));
  return best;
}

int nearest_slot(const PrototypeBank& bank, const FeatureVec& f) {
  if (bank.empty())
    throw ValidationError("nearest_slot: bank has no prototypes");
  int best = 0;
  double best_sim = cosine_similarity(f, bank.slots[0].vector);
  for (std::size_t i = 1; i < bank.slots.size(); ++i) {
    const double sim = cosine_similarity(f, bank.slots[i].vector);
    if (sim > best_sim) {
      best_sim = sim;
      best = static_cast<int>(i);
    }
  }
  return best;
}

FeatureVec update_prototype(const FeatureVec& p, const FeatureVec& f, double beta) {
  if (p.size() != f.size())
    throw ValidationError("update_prototype: dimension mismatch");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ValidationError("update_prototype: beta must lie in [0, 1]");
  return (1.0 - beta) * p + beta * f;
}

PrototypeBank initialize_prototypes(const std::vector<FeatureVec>& features,
                                    const BankConfig& config) {
  config.validate();
  PrototypeBank bank;
  bank.config = config;
  for (const FeatureVec& f : features) merge_feature(bank, f, config.beta_init);
  return bank;
}

void refine_prototypes(PrototypeBank& bank, const std::vector<FeatureVec>& features) {
  bank.config.validate();
  for (const FeatureVec& f : features) merge_feature(bank, f, bank.config.beta_train);
}

double depth_nll(double d_gt, double d_pred, double sigma_scale) {
  if (!(sigma_scale > 0.0))
    throw ValidationError("depth_nll: sigma must be positive");
  return std::sqrt(2.0) / sigma_scale * std::abs(d_gt - d_pred) + std::log(sigma_scale);
}

double depth_score(double sigma_raw) { return std::exp(-sigma_raw); }

SelectionResult select_pseudo_labels(const std::vector<Prediction>& predictions,
                                     const PrototypeBank& bank, const PbfConfig& config) {
  config.validate();
  if (bank.empty())
    throw ValidationError("select_pseudo_labels: bank has no prototypes");
  SelectionResult result;
  for (const Prediction& pred : predictions) {
    const double s_depth = depth_score(pred.sigma_raw);
    if (!(s_depth > config.tau_depth)) {
      result.rejected.push_back({pred, s_depth, std::nullopt, RejectReason::kDepth});
      continue;
    }
    const double s_proto = proto_score(pred.feature, bank);
    if (!(s_proto > config.tau_proto)) {
      result.rejected.push_back({pred, s_depth, s_proto, RejectReason::kProto});
      continue;
    }
    result.selected.push_back({pred, s_depth, s_proto});
  }
  return result;
}

void gt_bank_insert(GtBank& bank, const std::string& image_id,
                    const std::vector<ScoredPrediction>& selected, int epoch) {
  if (epoch < 1)
    throw ValidationError("gt_bank_insert: pseudo labels require epoch >= 1");
  auto& entries = bank[image_id];
  for (const ScoredPrediction& sp : selected) {
    const BevBox candidate = footprint(sp.prediction.label);
    bool duplicate = false;
    for (const GtBankEntry& entry : entries) {
      if (rotated_bev_iou(candidate, footprint(entry.label)) > 0.5) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    GtBankEntry entry;
    entry.label = sp.prediction.label;
    entry.source = GtSource::kPseudo;
    entry.epoch_added = epoch;
    entry.s_depth = sp.s_depth;
    entry.s_proto = sp.s_proto;
    entries.push_back(std::move(entry));
  }
}

// ----- persistence ----------------------------------------------------

std::vector<Prediction> parse_predictions_jsonl(const std::string& text) {
  std::vector<Prediction> predictions;
  int line_number = 0;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("predictions: malformed JSON (line " +
                       std::to_string(line_number) + "): " + e.what());
    }
    try {
      Prediction pred;
      pred.id = static_cast<std::int64_t>(predictions.size());
      pred.image_id = j.at("image_id").get<std::string>();
      pred.label = parse_label_line(j.at("label").get<std::string>(), line_number);
      if (!pred.label.score.has_value())
        throw ParseError("predictions: label must carry a score (line " +
                         std::to_string(line_number) + ")");
      pred.sigma_raw = j.at("sigma").get<double>();
      const auto& feature = j.at("feature");
      pred.feature.resize(static_cast<Eigen::Index>(feature.size()));
      for (std::size_t i = 0; i < feature.size(); ++i)
        pred.feature[static_cast<Eigen::Index>(i)] = feature.at(i).get<double>();
      predictions.push_back(std::move(pred));
    } catch (const json::exception& e) {
      throw ParseError("predictions: bad record (line " + std::to_string(line_number) +
                       "): " + e.what());
    }
  }
  return predictions;
}

std::string format_predictions_jsonl(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const Prediction& pred : predictions) {
    if (!pred.label.score.has_value())
      throw ValidationError("predictions: label without a score cannot be serialized");
    json j;
    j["image_id"] = pred.image_id;
    j["label"] = format_label_line(pred.label);
    j["sigma"] = pred.sigma_raw;
    json feature = json::array();
    for (Eigen::Index i = 0; i < pred.feature.size(); ++i)
      feature.push_back(pred.feature[i]);
    j["feature"] = std::move(feature);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  return parse_predictions_jsonl(read_text_file(path));
}

void save_predictions(const std::filesystem::path& path,
                      const std::vector<Prediction>& predictions) {
  write_text_file(path, format_predictions_jsonl(predictions));
}

namespace {

json bank_to_json(const PrototypeBank& bank) {
  json j;
  j["capacity"] = bank.config.capacity;
  j["tau_new"] = bank.config.tau_new;
  j["beta_init"] = bank.config.beta_init;
  j["beta_train"] = bank.config.beta_train;
  j["zero_features_skipped"] = bank.zero_features_skipped;
  json slots = json::array();
  for (const PrototypeSlot& slot : bank.slots) {
    json sj;
    sj["update_count"] = slot.update_count;
    json vec = json::array();
    for (Eigen::Index i = 0; i < slot.vector.size(); ++i) vec.push_back(slot.vector[i]);
    sj["vector"] = std::move(vec);
    slots.push_back(std::move(sj));
  }
  j["slots"] = std::move(slots);
  return j;
}

PrototypeBank bank_from_json(const json& j) {
  PrototypeBank bank;
  bank.config.capacity = j.at("capacity").get<int>();
  bank.config.tau_new = j.at("tau_new").get<double>();
  bank.config.beta_init = j.at("beta_init").get<double>();
  bank.config.beta_train = j.at("beta_train").get<double>();
  bank.zero_features_skipped = j.at("zero_features_skipped").get<std::int64_t>();
  for (const auto& sj : j.at("slots")) {
    PrototypeSlot slot;
    slot.update_count = sj.at("update_count").get<std::int64_t>();
    const auto& vec = sj.at("vector");
    slot.vector.resize(static_cast<Eigen::Index>(vec.size()));
    for (std::size_t i = 0; i < vec.size(); ++i)
      slot.vector[static_cast<Eigen::Index>(i)] = vec.at(i).get<double>();
    bank.slots.push_back(std::move(slot));
  }
  bank.config.validate();
  return bank;
}

}  // namespace

PrototypeBankSet parse_prototype_banks(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("prototype banks: malformed JSON: ") + e.what());
  }
  PrototypeBankSet banks;
  try {
    for (const auto& [class_name, bj] : j.at("classes").items())
      banks.emplace(class_name, bank_from_json(bj));
  } catch (const json::exception& e) {
    throw ParseError(std::string("prototype banks: bad document: ") + e.what());
  }
  return banks;
}

std::string format_prototype_banks(const PrototypeBankSet& banks) {
  json classes = json::object();
  for (const auto& [class_name, bank] : banks) classes[class_name] = bank_to_json(bank);
  json j;
  j["classes"] = std::move(classes);
  return j.dump(2) + "\n";
}

PrototypeBankSet load_prototype_banks(const std::filesystem::path& path) {
  return parse_prototype_banks(read_text_file(path));
}

void save_prototype_banks(const std::filesystem::path& path,
                          const PrototypeBankSet& banks) {
  write_text_file(path, format_prototype_banks(banks));
}

}  // namespace sparse3d
