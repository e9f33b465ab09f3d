// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparse3d/kitti_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparse3d/evalkit.hpp"

namespace sparse3d {

namespace {

using nlohmann::json;

std::string line_context(int line_number) {
  return line_number > 0 ? " (line " + std::to_string(line_number) + ")" : "";
}

double parse_double_token(std::string_view token, int line_number) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError("label: non-numeric field '" + std::string(token) + "'" +
                     line_context(line_number));
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void append_formatted(std::string& out, const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  out += buf;
}

json label_to_json(const Label3D& label) {
  json j;
  j["type"] = label.class_name;
  j["truncation"] = label.truncation;
  j["occlusion"] = label.occlusion;
  j["alpha"] = label.alpha;
  j["bbox"] = {label.bbox2d.left, label.bbox2d.top, label.bbox2d.right,
               label.bbox2d.bottom};
  j["dimensions"] = {label.height, label.width, label.length};
  j["location"] = {label.location.x(), label.location.y(), label.location.z()};
  j["rotation_y"] = label.rotation_y;
  if (label.score.has_value()) j["score"] = *label.score;
  return j;
}

Label3D json_to_label(const json& j) {
  Label3D label;
  label.class_name = j.at("type").get<std::string>();
  label.truncation = j.at("truncation").get<double>();
  label.occlusion = j.at("occlusion").get<int>();
  label.alpha = j.at("alpha").get<double>();
  const auto& bbox = j.at("bbox");
  label.bbox2d = {bbox.at(0).get<double>(), bbox.at(1).get<double>(),
                  bbox.at(2).get<double>(), bbox.at(3).get<double>()};
  const auto& dim = j.at("dimensions");
  label.height = dim.at(0).get<double>();
  label.width = dim.at(1).get<double>();
  label.length = dim.at(2).get<double>();
  const auto& loc = j.at("location");
  label.location =
      Vec3(loc.at(0).get<double>(), loc.at(1).get<double>(), loc.at(2).get<double>());
  label.rotation_y = j.at("rotation_y").get<double>();
  if (j.contains("score")) label.score = j.at("score").get<double>();
  return label;
}

}  // namespace

// ----- labels ---------------------------------------------------------

Label3D parse_label_line(std::string_view line, int line_number) {
  const auto tokens = split_ws(line);
  if (tokens.size() != 15 && tokens.size() != 16)
    throw ParseError("label: expected 15 or 16 fields, got " +
                     std::to_string(tokens.size()) + line_context(line_number));

  Label3D label;
  label.class_name = std::string(tokens[0]);
  label.truncation = parse_double_token(tokens[1], line_number);
  label.occlusion =
      static_cast<int>(std::lround(parse_double_token(tokens[2], line_number)));
  label.alpha = parse_double_token(tokens[3], line_number);
  label.bbox2d.left = parse_double_token(tokens[4], line_number);
  label.bbox2d.top = parse_double_token(tokens[5], line_number);
  label.bbox2d.right = parse_double_token(tokens[6], line_number);
  label.bbox2d.bottom = parse_double_token(tokens[7], line_number);
  label.height = parse_double_token(tokens[8], line_number);
  label.width = parse_double_token(tokens[9], line_number);
  label.length = parse_double_token(tokens[10], line_number);
  label.location = Vec3(parse_double_token(tokens[11], line_number),
                        parse_double_token(tokens[12], line_number),
                        parse_double_token(tokens[13], line_number));
  label.rotation_y = parse_double_token(tokens[14], line_number);
  if (tokens.size() == 16) label.score = parse_double_token(tokens[15], line_number);
  return label;
}

std::string format_label_line(const Label3D& label) {
  std::string out = label.class_name;
  append_formatted(out, " %.2f", label.truncation);
  out += ' ';
  out += std::to_string(label.occlusion);
  append_formatted(out, " %.2f", label.alpha);
  append_formatted(out, " %.2f", label.bbox2d.left);
  append_formatted(out, " %.2f", label.bbox2d.top);
  append_formatted(out, " %.2f", label.bbox2d.right);
  append_formatted(out, " %.2f", label.bbox2d.bottom);
  append_formatted(out, " %.2f", label.height);
  append_formatted(out, " %.2f", label.width);
  append_formatted(out, " %.2f", label.length);
  append_formatted(out, " %.2f", label.location.x());
  append_formatted(out, " %.2f", label.location.y());
  append_formatted(out, " %.2f", label.location.z());
  append_formatted(out, " %.2f", label.rotation_y);
  if (label.score.has_value()) append_formatted(out, " %.2f", *label.score);
  return out;
}

LabelFile parse_label_file(const std::string& text, std::string image_id) {
  LabelFile file;
  file.image_id = std::move(image_id);
  int line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (eol == std::string::npos ? text.size() : eol) - pos);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!split_ws(line).empty())
      file.labels.push_back(parse_label_line(line, line_number));
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return file;
}

std::string format_label_file(const LabelFile& file) {
  std::string out;
  for (const Label3D& label : file.labels) {
    out += format_label_line(label);
    out += '\n';
  }
  return out;
}

LabelFile load_label_file(const std::filesystem::path& path) {
  return parse_label_file(read_text_file(path), path.stem().string());
}

void save_label_file(const std::filesystem::path& path, const LabelFile& file) {
  write_text_file(path, format_label_file(file));
}

// ----- calibration ----------------------------------------------------

namespace {

std::vector<double> parse_calib_values(std::string_view rest, std::size_t expected,
                                       const std::string& key, int line_number) {
  const auto tokens = split_ws(rest);
  if (tokens.size() != expected)
    throw ParseError("calib: key " + key + " expects " + std::to_string(expected) +
                     " values, got " + std::to_string(tokens.size()) +
                     line_context(line_number));
  std::vector<double> values;
  values.reserve(tokens.size());
  for (const auto token : tokens) values.push_back(parse_double_token(token, line_number));
  return values;
}

Mat34 mat34_from(const std::vector<double>& v) {
  Mat34 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
  return m;
}

void append_calib_line(std::string& out, const std::string& key, const double* values,
                       std::size_t count) {
  out += key;
  out += ':';
  char buf[64];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), " %.17g", values[i]);
    out += buf;
  }
  out += '\n';
}

}  // namespace

CalibFile parse_calib_file(const std::string& text) {
  CalibFile calib;
  bool have_p2 = false;
  int line_number = 0;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_ws(line).empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("calib: missing ':' separator" + line_context(line_number));
    std::string key = line.substr(0, colon);
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back())))
      key.pop_back();
    const std::string_view rest = std::string_view(line).substr(colon + 1);

    if (key == "P0") calib.p0 = mat34_from(parse_calib_values(rest, 12, key, line_number));
    else if (key == "P1") calib.p1 = mat34_from(parse_calib_values(rest, 12, key, line_number));
    else if (key == "P2") { calib.p2 = mat34_from(parse_calib_values(rest, 12, key, line_number)); have_p2 = true; }
    else if (key == "P3") calib.p3 = mat34_from(parse_calib_values(rest, 12, key, line_number));
    else if (key == "R0_rect") {
      const auto v = parse_calib_values(rest, 9, key, line_number);
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = v[static_cast<std::size_t>(r * 3 + c)];
      calib.r0_rect = m;
    } else if (key == "Tr_velo_to_cam") {
      calib.tr_velo_to_cam = mat34_from(parse_calib_values(rest, 12, key, line_number));
    } else if (key == "IMAGE_SIZE") {
      const auto v = parse_calib_values(rest, 2, key, line_number);
      calib.image_size = {static_cast<int>(std::lround(v[0])),
                          static_cast<int>(std::lround(v[1]))};
    }
    // Unknown keys are tolerated and dropped.
  }
  if (!have_p2) throw ParseError("calib: required key P2 is missing");
  return calib;
}

std::string format_calib_file(const CalibFile& calib) {
  std::string out;
  const auto mat34_row_major = [](const Mat34& m) {
    std::vector<double> v(12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) v[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
    return v;
  };
  if (calib.p0) append_calib_line(out, "P0", mat34_row_major(*calib.p0).data(), 12);
  if (calib.p1) append_calib_line(out, "P1", mat34_row_major(*calib.p1).data(), 12);
  {
    const auto v = mat34_row_major(calib.p2);
    append_calib_line(out, "P2", v.data(), 12);
  }
  if (calib.p3) append_calib_line(out, "P3", mat34_row_major(*calib.p3).data(), 12);
  if (calib.r0_rect) {
    std::vector<double> v(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        v[static_cast<std::size_t>(r * 3 + c)] = (*calib.r0_rect)(r, c);
    append_calib_line(out, "R0_rect", v.data(), 9);
  }
  if (calib.tr_velo_to_cam)
    append_calib_line(out, "Tr_velo_to_cam", mat34_row_major(*calib.tr_velo_to_cam).data(), 12);
  if (calib.image_size) {
    const double v[2] = {static_cast<double>(calib.image_size->first),
                         static_cast<double>(calib.image_size->second)};
    append_calib_line(out, "IMAGE_SIZE", v, 2);
  }
  return out;
}

CalibFile load_calib_file(const std::filesystem::path& path) {
  try {
    return parse_calib_file(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_calib_file(const std::filesystem::path& path, const CalibFile& calib) {
  write_text_file(path, format_calib_file(calib));
}

CameraRig rig_from_calib(const CalibFile& calib, int image_width, int image_height) {
  CameraRig rig;
  rig.projection = calib.p2;
  rig.image_width = image_width;
  rig.image_height = image_height;
  if (calib.tr_velo_to_cam) {
    rig.extrinsic.rotation = calib.tr_velo_to_cam->topLeftCorner<3, 3>();
    rig.extrinsic.translation = calib.tr_velo_to_cam->topRightCorner<3, 1>();
    if (calib.r0_rect) {
      rig.extrinsic.rotation = *calib.r0_rect * rig.extrinsic.rotation;
      rig.extrinsic.translation = *calib.r0_rect * rig.extrinsic.translation;
    }
  } else if (calib.r0_rect) {
    rig.extrinsic.rotation = *calib.r0_rect;
  }
  return rig;
}

CalibFile calib_from_rig(const CameraRig& rig) {
  CalibFile calib;
  calib.p2 = rig.projection;
  Mat34 tr;
  tr.topLeftCorner<3, 3>() = rig.extrinsic.rotation;
  tr.topRightCorner<3, 1>() = rig.extrinsic.translation;
  calib.tr_velo_to_cam = tr;
  calib.image_size = {rig.image_width, rig.image_height};
  return calib;
}

// ----- masks ----------------------------------------------------------

MaskRaster MaskRaster::filled(int width, int height, std::uint8_t value) {
  MaskRaster m;
  m.width = width;
  m.height = height;
  m.data.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                value);
  return m;
}

namespace {

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string next_pgm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]))
    token += static_cast<char>(bytes[pos++]);
  if (token.empty()) throw ParseError("mask: truncated PGM header");
  return token;
}

int parse_pgm_int(const std::string& token, const char* what) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value < 0)
    throw ParseError(std::string("mask: bad PGM ") + what + " '" + token + "'");
  return value;
}

}  // namespace

MaskRaster parse_mask(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (next_pgm_token(bytes, pos) != "P5")
    throw ParseError("mask: not a binary PGM (magic is not P5)");
  MaskRaster mask;
  mask.width = parse_pgm_int(next_pgm_token(bytes, pos), "width");
  mask.height = parse_pgm_int(next_pgm_token(bytes, pos), "height");
  const int maxval = parse_pgm_int(next_pgm_token(bytes, pos), "maxval");
  if (maxval < 1 || maxval > 255)
    throw ParseError("mask: unsupported PGM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw ParseError("mask: missing separator after PGM header");
  ++pos;
  const std::size_t need =
      static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height);
  if (bytes.size() - pos < need)
    throw ParseError("mask: PGM pixel data truncated");
  mask.data.resize(need);
  for (std::size_t i = 0; i < need; ++i)
    mask.data[i] = bytes[pos + i] != 0 ? 255 : 0;
  return mask;
}

std::vector<std::uint8_t> format_mask(const MaskRaster& mask) {
  std::string header = "P5\n" + std::to_string(mask.width) + " " +
                       std::to_string(mask.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + mask.data.size());
  for (const std::uint8_t v : mask.data) out.push_back(v != 0 ? 255 : 0);
  return out;
}

MaskRaster load_mask(const std::filesystem::path& path) {
  try {
    return parse_mask(read_binary_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_mask(const std::filesystem::path& path, const MaskRaster& mask) {
  write_binary_file(path, format_mask(mask));
}

// ----- RGBA rasters ---------------------------------------------------

ImageRgba ImageRgba::filled(int width, int height, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b, std::uint8_t a) {
  ImageRgba img;
  img.width = width;
  img.height = height;
  img.data.resize(4 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < img.data.size(); i += 4) {
    img.data[i] = r;
    img.data[i + 1] = g;
    img.data[i + 2] = b;
    img.data[i + 3] = a;
  }
  return img;
}

ImageRgba parse_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "IMG1", 4) != 0)
    throw ParseError("image: missing IMG1 magic");
  ImageRgba img;
  img.width = static_cast<int>(read_u32le(bytes.data() + 4));
  img.height = static_cast<int>(read_u32le(bytes.data() + 8));
  const std::uint64_t need = 4ULL * static_cast<std::uint64_t>(img.width) *
                             static_cast<std::uint64_t>(img.height);
  if (bytes.size() - 12 < need) throw ParseError("image: pixel data truncated");
  img.data.assign(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(need));
  return img;
}

std::vector<std::uint8_t> format_image(const ImageRgba& image) {
  std::vector<std::uint8_t> out = {'I', 'M', 'G', '1'};
  put_u32le(out, static_cast<std::uint32_t>(image.width));
  put_u32le(out, static_cast<std::uint32_t>(image.height));
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

ImageRgba load_image(const std::filesystem::path& path) {
  try {
    return parse_image(read_binary_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_image(const std::filesystem::path& path, const ImageRgba& image) {
  write_binary_file(path, format_image(image));
}

// ----- ground-truth bank ----------------------------------------------

namespace {

std::string source_to_string(GtSource source) {
  return source == GtSource::kSparseGt ? "sparse_gt" : "pseudo";
}

GtSource source_from_string(const std::string& s) {
  if (s == "sparse_gt") return GtSource::kSparseGt;
  if (s == "pseudo") return GtSource::kPseudo;
  throw ParseError("gt bank: unknown source '" + s + "'");
}

}  // namespace

GtBank parse_gt_bank(const std::string& text) {
  GtBank bank;
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
      throw ParseError("gt bank: malformed JSON" + line_context(line_number) + ": " +
                       e.what());
    }
    try {
      std::string image_id = j.at("image_id").get<std::string>();
      if (bank.count(image_id))
        throw ParseError("gt bank: duplicate image_id '" + image_id + "'" +
                         line_context(line_number));
      std::vector<GtBankEntry> entries;
      for (const auto& ej : j.at("entries")) {
        GtBankEntry entry;
        entry.label = json_to_label(ej.at("label"));
        entry.source = source_from_string(ej.at("source").get<std::string>());
        entry.epoch_added = ej.at("epoch_added").get<int>();
        if (ej.contains("s_depth")) entry.s_depth = ej.at("s_depth").get<double>();
        if (ej.contains("s_proto")) entry.s_proto = ej.at("s_proto").get<double>();
        entries.push_back(std::move(entry));
      }
      bank.emplace(std::move(image_id), std::move(entries));
    } catch (const json::exception& e) {
      throw ParseError("gt bank: bad record" + line_context(line_number) + ": " +
                       e.what());
    }
  }
  return bank;
}

std::string format_gt_bank(const GtBank& bank) {
  std::string out;
  for (const auto& [image_id, entries] : bank) {
    json record;
    record["image_id"] = image_id;
    json entry_array = json::array();
    for (const GtBankEntry& entry : entries) {
      json ej;
      ej["label"] = label_to_json(entry.label);
      ej["source"] = source_to_string(entry.source);
      ej["epoch_added"] = entry.epoch_added;
      if (entry.s_depth) ej["s_depth"] = *entry.s_depth;
      if (entry.s_proto) ej["s_proto"] = *entry.s_proto;
      entry_array.push_back(std::move(ej));
    }
    record["entries"] = std::move(entry_array);
    out += record.dump();
    out += '\n';
  }
  return out;
}

GtBank load_gt_bank(const std::filesystem::path& path) {
  GtBank bank = parse_gt_bank(read_text_file(path));
  validate_gt_bank(bank);
  return bank;
}

void save_gt_bank(const std::filesystem::path& path, const GtBank& bank) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_text_file(tmp, format_gt_bank(bank));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("gt bank: cannot rename " + tmp.string() + " to " + path.string() +
                  ": " + ec.message());
  }
}

void validate_gt_bank(const GtBank& bank) {
  for (const auto& [image_id, entries] : bank) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const GtBankEntry& entry = entries[i];
      if (entry.source == GtSource::kSparseGt && entry.epoch_added != 0)
        throw ValidationError("gt bank: sparse_gt entry with epoch " +
                              std::to_string(entry.epoch_added) + " in image " + image_id);
      if (entry.source == GtSource::kPseudo && entry.epoch_added < 1)
        throw ValidationError("gt bank: pseudo entry with epoch " +
                              std::to_string(entry.epoch_added) + " in image " + image_id);
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        const double iou =
            rotated_bev_iou(footprint(entry.label), footprint(entries[j].label));
        if (iou > 0.5)
          throw ValidationError("gt bank: entries " + std::to_string(i) + " and " +
                                std::to_string(j) + " of image " + image_id +
                                " overlap with BEV IoU " + std::to_string(iou));
      }
    }
  }
}

// ----- low-level helpers ----------------------------------------------

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(stream)),
                                  std::istreambuf_iterator<char>());
  if (stream.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_binary_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream stream(path, std::ios::binary | std::ios::trunc);
  if (!stream) throw IoError("cannot open " + path.string() + " for writing");
  stream.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
  stream.flush();
  if (!stream) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_binary_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

}  // namespace sparse3d
