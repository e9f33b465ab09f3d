// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/rapa.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "sparse3d/rng.hpp"

namespace sparse3d {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct IntRect {
  int x0, y0, x1, y1;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

// Integer raster cells covered by a pixel rectangle, clamped to bounds.
IntRect rasterize(const BBox2D& box, int width, int height) {
  IntRect r;
  r.x0 = std::max(0, static_cast<int>(std::floor(box.left)));
  r.y0 = std::max(0, static_cast<int>(std::floor(box.top)));
  r.x1 = std::min(width, static_cast<int>(std::ceil(box.right)));
  r.y1 = std::min(height, static_cast<int>(std::ceil(box.bottom)));
  return r;
}

// Source observation angle; labels using the out-of-range "unknown"
// sentinel fall back to rotation_y minus the viewing angle.
double source_alpha(const Label3D& label) {
  if (label.alpha >= -kPi - 1e-9 && label.alpha <= kPi + 1e-9)
    return wrap_angle(label.alpha);
  return alpha_from_rotation(label.rotation_y,
                             viewing_angle(label.location.x(), label.location.z()));
}

std::uint8_t blend_channel(double alpha, double patch_value, std::uint8_t target_value) {
  const long a = std::lround(alpha);
  const long p = std::lround(patch_value);
  return static_cast<std::uint8_t>(
      (a * p + (255 - a) * static_cast<long>(target_value) + 127) / 255);
}

}  // namespace

void RapaConfig::validate() const {
  if (!(delta >= 0.0)) throw ValidationError("rapa config: delta must be >= 0");
  if (num_offsets < 1) throw ValidationError("rapa config: need at least one offset");
  if (!(tau_road >= 0.0 && tau_road <= 1.0))
    throw ValidationError("rapa config: tau_road must lie in [0, 1]");
  if (!(tau_overlap >= 0.0 && tau_overlap <= 1.0))
    throw ValidationError("rapa config: tau_overlap must lie in [0, 1]");
  if (max_trials < 1) throw ValidationError("rapa config: need at least one trial");
  if (!(depth_min > 0.0 && depth_min < depth_max))
    throw ValidationError("rapa config: depth window must satisfy 0 < min < max");
  if (patches_per_image < 0)
    throw ValidationError("rapa config: patches_per_image must be >= 0");
}

std::vector<Label3D> extract_patch_candidates(const std::vector<Label3D>& labels,
                                              const RapaConfig& config) {
  config.validate();
  std::vector<Label3D> out;
  for (const Label3D& label : labels) {
    if (label.class_name != "Car") continue;
    if (label.truncation != 0.0) continue;
    if (label.occlusion != 0) continue;
    const double z = label.location.z();
    if (!(z >= config.depth_min && z < config.depth_max)) continue;
    if (!label.bbox2d.is_valid() || label.bbox2d.area() <= 0.0) continue;
    out.push_back(label);
  }
  return out;
}

double road_overlap_ratio(const BBox2D& box, const MaskRaster& road_mask) {
  const IntRect r = rasterize(box, road_mask.width, road_mask.height);
  if (r.empty()) return 0.0;
  long total = 0;
  long road = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      ++total;
      if (road_mask.foreground(x, y)) ++road;
    }
  }
  return static_cast<double>(road) / static_cast<double>(total);
}

double max_overlap_with_existing(const BBox2D& box,
                                 const std::vector<BBox2D>& existing) {
  double best = 0.0;
  for (const BBox2D& other : existing) best = std::max(best, iou2d(box, other));
  return best;
}

std::optional<Placement> find_placement(const ObjectPatch& patch,
                                        const CameraRig& target_rig,
                                        const MaskRaster& road_mask,
                                        const std::vector<BBox2D>& existing,
                                        const RapaConfig& config, std::uint64_t seed,
                                        PlacementSearch* search) {
  config.validate();
  if (search) search->trials = 0;
  if (road_mask.width <= 0 || road_mask.height <= 0) return std::nullopt;

  const Label3D& src = patch.source_label;
  const Vec3 base = transform_center(src.location, patch.source_rig.extrinsic,
                                     target_rig.extrinsic);
  const double alpha = source_alpha(src);

  const int m = config.num_offsets;
  std::vector<double> offsets(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    offsets[static_cast<std::size_t>(i)] =
        m == 1 ? 0.0
               : -config.delta + 2.0 * config.delta * static_cast<double>(i) /
                                     static_cast<double>(m - 1);
  }
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);

  for (int t = 0; t < config.max_trials; ++t) {
    if (t % m == 0) rng.shuffle(order);
    const double offset = offsets[static_cast<std::size_t>(order[static_cast<std::size_t>(t % m)])];
    if (search) ++search->trials;

    const Vec3 candidate = apply_horizontal_offset(base, offset);
    if (!(candidate.z() >= config.depth_min && candidate.z() < config.depth_max))
      continue;

    Label3D placed = src;
    placed.location = candidate;
    placed.alpha = alpha;
    placed.rotation_y =
        rotation_from_alpha(alpha, viewing_angle(candidate.x(), candidate.z()));

    const auto corners = box3d_corners(placed);
    bool behind = false;
    for (const Vec3& c : corners)
      if (c.z() <= kMinCameraDepth) { behind = true; break; }
    if (behind) continue;

    placed.bbox2d = project_box(corners, target_rig);
    if (placed.bbox2d.area() <= 0.0) continue;

    const double road_ratio = road_overlap_ratio(placed.bbox2d, road_mask);
    if (road_ratio < config.tau_road) continue;

    const double overlap = max_overlap_with_existing(placed.bbox2d, existing);
    if (overlap >= config.tau_overlap) continue;

    return Placement{placed, offset, road_ratio, overlap};
  }
  return std::nullopt;
}

ImageRgba composite_patch(const ImageRgba& target, const ObjectPatch& patch,
                          const Placement& placement, bool* degenerate) {
  if (degenerate) *degenerate = false;
  ImageRgba out = target;

  const BBox2D& box = placement.label.bbox2d;
  const IntRect r = rasterize(box, target.width, target.height);
  if (r.empty() || box.width() <= 0.0 || box.height() <= 0.0 ||
      patch.raster.width <= 0 || patch.raster.height <= 0) {
    if (degenerate) *degenerate = true;
    return out;
  }

  const auto sample = [&](double u, double v, int channel) {
    // Bilinear with clamped edges; u/v are continuous patch coordinates.
    const double x = std::clamp(u, 0.0, static_cast<double>(patch.raster.width - 1));
    const double y = std::clamp(v, 0.0, static_cast<double>(patch.raster.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, patch.raster.width - 1);
    const int y1 = std::min(y0 + 1, patch.raster.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double v00 = patch.raster.pixel(x0, y0)[channel];
    const double v10 = patch.raster.pixel(x1, y0)[channel];
    const double v01 = patch.raster.pixel(x0, y1)[channel];
    const double v11 = patch.raster.pixel(x1, y1)[channel];
    return (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) +
           (v01 * (1.0 - fx) + v11 * fx) * fy;
  };

  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const double u =
          (x + 0.5 - box.left) / box.width() * patch.raster.width - 0.5;
      const double v =
          (y + 0.5 - box.top) / box.height() * patch.raster.height - 0.5;
      const double alpha = sample(u, v, 3);
      std::uint8_t* dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) dst[c] = blend_channel(alpha, sample(u, v, c), dst[c]);
      dst[3] = blend_channel(alpha, 255.0, dst[3]);
    }
  }
  return out;
}

AugmentResult augment_scene(const ImageRgba& image, const std::string& image_id,
                            const std::vector<Label3D>& labels, const CameraRig& rig,
                            const MaskRaster& road_mask,
                            const std::vector<ObjectPatch>& library,
                            const RapaConfig& config, std::uint64_t seed) {
  config.validate();
  AugmentResult result;
  result.image = image;
  result.labels = labels;

  std::vector<BBox2D> existing;
  for (const Label3D& label : labels)
    if (label.bbox2d.is_valid() && label.bbox2d.area() > 0.0)
      existing.push_back(label.bbox2d);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < library.size(); ++i)
    if (library[i].source_image_id != image_id) eligible.push_back(i);

  SplitMix64 rng(seed);
  rng.shuffle(eligible);
  const std::size_t attempts =
      std::min(static_cast<std::size_t>(config.patches_per_image), eligible.size());

  struct Accepted {
    Placement placement;
    std::size_t patch_index;
  };
  std::vector<Accepted> accepted;
  for (std::size_t k = 0; k < attempts; ++k) {
    ++result.attempts;
    const std::size_t patch_index = eligible[k];
    const std::uint64_t trial_seed = hash_combine(seed, k + 1);
    const auto placement = find_placement(library[patch_index], rig, road_mask,
                                          existing, config, trial_seed);
    if (!placement) continue;
    existing.push_back(placement->label.bbox2d);
    accepted.push_back({*placement, patch_index});
  }

  // Painter's algorithm: composite the farthest placement first.
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const Accepted& a, const Accepted& b) {
                     return a.placement.label.location.z() > b.placement.label.location.z();
                   });
  for (const Accepted& a : accepted) {
    result.image = composite_patch(result.image, library[a.patch_index], a.placement);
    result.labels.push_back(a.placement.label);
    result.placements.push_back(a.placement);
  }
  return result;
}

std::uint64_t scene_seed(std::uint64_t global_seed, std::string_view image_id,
                         int epoch) {
  return seed_from(global_seed, image_id, static_cast<std::uint64_t>(epoch));
}

// ----- patch container ------------------------------------------------

ObjectPatch parse_patch(const std::vector<std::uint8_t>& bytes,
                        std::string source_image_id) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "PATCH1", 6) != 0)
    throw ParseError("patch: missing PATCH1 magic");
  ObjectPatch patch;
  patch.source_image_id = std::move(source_image_id);
  std::size_t pos = 6;
  patch.raster.width = static_cast<int>(read_u32le(bytes.data() + pos));
  patch.raster.height = static_cast<int>(read_u32le(bytes.data() + pos + 4));
  pos += 8;
  const std::uint64_t raster_bytes = 4ULL *
                                     static_cast<std::uint64_t>(patch.raster.width) *
                                     static_cast<std::uint64_t>(patch.raster.height);
  if (bytes.size() - pos < raster_bytes) throw ParseError("patch: raster truncated");
  patch.raster.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + raster_bytes));
  pos += raster_bytes;

  const auto read_section = [&](const char* what) {
    if (bytes.size() - pos < 4)
      throw ParseError(std::string("patch: missing ") + what + " section");
    const std::uint32_t len = read_u32le(bytes.data() + pos);
    pos += 4;
    if (bytes.size() - pos < len)
      throw ParseError(std::string("patch: ") + what + " section truncated");
    std::string text(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    return text;
  };

  patch.source_label = parse_label_line(read_section("label"));
  const CalibFile calib = parse_calib_file(read_section("calib"));
  if (!calib.image_size)
    throw ParseError("patch: calibration section lacks IMAGE_SIZE");
  patch.source_rig =
      rig_from_calib(calib, calib.image_size->first, calib.image_size->second);
  return patch;
}

std::vector<std::uint8_t> format_patch(const ObjectPatch& patch) {
  const std::uint64_t raster_bytes = 4ULL *
                                     static_cast<std::uint64_t>(patch.raster.width) *
                                     static_cast<std::uint64_t>(patch.raster.height);
  if (patch.raster.data.size() != raster_bytes)
    throw ValidationError("patch: raster byte count does not match its size");
  std::vector<std::uint8_t> out = {'P', 'A', 'T', 'C', 'H', '1'};
  put_u32le(out, static_cast<std::uint32_t>(patch.raster.width));
  put_u32le(out, static_cast<std::uint32_t>(patch.raster.height));
  out.insert(out.end(), patch.raster.data.begin(), patch.raster.data.end());

  const std::string label = format_label_line(patch.source_label);
  put_u32le(out, static_cast<std::uint32_t>(label.size()));
  out.insert(out.end(), label.begin(), label.end());

  const std::string calib = format_calib_file(calib_from_rig(patch.source_rig));
  put_u32le(out, static_cast<std::uint32_t>(calib.size()));
  out.insert(out.end(), calib.begin(), calib.end());
  return out;
}

ObjectPatch load_patch(const std::filesystem::path& path) {
  std::string stem = path.stem().string();
  const std::size_t underscore = stem.rfind('_');
  if (underscore != std::string::npos) stem.resize(underscore);
  try {
    return parse_patch(read_binary_file(path), std::move(stem));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_patch(const std::filesystem::path& path, const ObjectPatch& patch) {
  write_binary_file(path, format_patch(patch));
}

}  // namespace sparse3d
