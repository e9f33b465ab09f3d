// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact readers and writers for the on-disk exchange formats:
//   - label files: one object per line, 15 fields (16 with a score),
//     printed with two decimals like the reference devkit;
//   - calibration files: "KEY: v0 v1 ..." lines, P2 mandatory, doubles
//     printed as %.17g so values survive a round trip exactly;
//   - road / object masks: binary PGM (P5), maxval 255, any nonzero
//     byte reads as foreground;
//   - RGBA rasters: "IMG1" container (magic, u32le width/height, then
//     width*height*4 RGBA bytes);
//   - the ground-truth bank: JSON lines, one record per image, sorted
//     by image id, written atomically (temp file + rename).

#ifndef SPARSE3D_KITTI_IO_HPP_
#define SPARSE3D_KITTI_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparse3d/geometry.hpp"

namespace sparse3d {

// ----- labels ---------------------------------------------------------

// Parses one label line. line_number (1-based) is only used to build
// error messages; pass 0 when there is no file context.
Label3D parse_label_line(std::string_view line, int line_number = 0);

// Two-decimal fixed-point line, 15 fields, 16 when a score is present.
std::string format_label_line(const Label3D& label);

struct LabelFile {
  std::string image_id;
  std::vector<Label3D> labels;
};

LabelFile parse_label_file(const std::string& text, std::string image_id);
std::string format_label_file(const LabelFile& file);
LabelFile load_label_file(const std::filesystem::path& path);
void save_label_file(const std::filesystem::path& path, const LabelFile& file);

// ----- calibration ----------------------------------------------------

struct CalibFile {
  std::optional<Mat34> p0, p1, p3;
  Mat34 p2 = Mat34::Zero();
  std::optional<Eigen::Matrix3d> r0_rect;
  std::optional<Mat34> tr_velo_to_cam;
  // Extension key IMAGE_SIZE (width, height); written by patch files so
  // a patch remembers its source image bounds.
  std::optional<std::pair<int, int>> image_size;
};

CalibFile parse_calib_file(const std::string& text);
std::string format_calib_file(const CalibFile& calib);
CalibFile load_calib_file(const std::filesystem::path& path);
void save_calib_file(const std::filesystem::path& path, const CalibFile& calib);

// Camera rig for the left color camera: projection = P2, extrinsic =
// R0_rect * Tr_velo_to_cam when both are present (else whichever exists,
// else identity).
CameraRig rig_from_calib(const CalibFile& calib, int image_width, int image_height);

// Inverse of rig_from_calib up to representation: P2 = projection,
// Tr_velo_to_cam = extrinsic, IMAGE_SIZE = image bounds.
CalibFile calib_from_rig(const CameraRig& rig);

// ----- masks ----------------------------------------------------------

struct MaskRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;   // row-major, 0 or 255 after reads

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  void set(int x, int y, std::uint8_t v) {
    data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
         static_cast<std::size_t>(x)] = v;
  }
  bool foreground(int x, int y) const { return at(x, y) != 0; }

  static MaskRaster filled(int width, int height, std::uint8_t value);
};

MaskRaster parse_mask(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> format_mask(const MaskRaster& mask);
MaskRaster load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const MaskRaster& mask);

// ----- RGBA rasters ---------------------------------------------------

struct ImageRgba {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;   // row-major RGBA

  const std::uint8_t* pixel(int x, int y) const {
    return data.data() +
           4 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x));
  }
  std::uint8_t* pixel(int x, int y) {
    return data.data() +
           4 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x));
  }

  static ImageRgba filled(int width, int height, std::uint8_t r, std::uint8_t g,
                          std::uint8_t b, std::uint8_t a = 255);
};

ImageRgba parse_image(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> format_image(const ImageRgba& image);
ImageRgba load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ImageRgba& image);

// ----- ground-truth bank ----------------------------------------------

enum class GtSource { kSparseGt, kPseudo };

struct GtBankEntry {
  Label3D label;
  GtSource source = GtSource::kSparseGt;
  int epoch_added = 0;
  std::optional<double> s_depth;
  std::optional<double> s_proto;
};

// Keyed by image id; map iteration order doubles as the serialization
// order.
using GtBank = std::map<std::string, std::vector<GtBankEntry>>;

GtBank parse_gt_bank(const std::string& text);
std::string format_gt_bank(const GtBank& bank);
GtBank load_gt_bank(const std::filesystem::path& path);
// Writes to "<path>.tmp" and renames, so readers never observe a
// partial bank.
void save_gt_bank(const std::filesystem::path& path, const GtBank& bank);

// Enforces the bank invariants: per-image entries pairwise rotated-BEV
// IoU <= 0.5, sparse_gt entries at epoch 0, pseudo entries at epoch >= 1.
void validate_gt_bank(const GtBank& bank);

// ----- low-level helpers ----------------------------------------------

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::uint32_t read_u32le(const std::uint8_t* p);
void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v);

}  // namespace sparse3d

#endif  // SPARSE3D_KITTI_IO_HPP_
