#include "carfollow/ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::ingest {

namespace {

constexpr std::string_view kDepthMagic = "DMAP";
constexpr std::size_t kDepthHeaderBytes = 12;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= std::uint32_t{static_cast<unsigned char>(bytes[offset + i])} << (8 * i);
  }
  return v;
}

bool is_blank(std::string_view line) { return text::trim(line).empty(); }

std::string line_context(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

}  // namespace

std::string_view to_string(ClassLabel c) {
  switch (c) {
    case ClassLabel::car: return "car";
    case ClassLabel::truck: return "truck";
    case ClassLabel::traffic_sign: return "traffic_sign";
    case ClassLabel::traffic_signal: return "traffic_signal";
  }
  return "car";
}

ClassLabel parse_class_label(std::string_view s) {
  if (s == "car") return ClassLabel::car;
  if (s == "truck") return ClassLabel::truck;
  if (s == "traffic_sign") return ClassLabel::traffic_sign;
  if (s == "traffic_signal") return ClassLabel::traffic_signal;
  throw FormatError("unknown class label '" + std::string(s) + "'");
}

DriverGroup DriverGroup::parse(std::string_view s) {
  if (s == "elderly_woman") return {Kind::elderly_woman, {}};
  if (s == "elderly_man") return {Kind::elderly_man, {}};
  if (s == "young_man_1") return {Kind::young_man_1, {}};
  if (s == "young_man_2") return {Kind::young_man_2, {}};
  if (s.empty() || s.find_first_of(" \t\r\n,;=:") != std::string_view::npos) {
    throw FormatError("invalid driver group '" + std::string(s) + "'");
  }
  return {Kind::other, std::string(s)};
}

std::string DriverGroup::id() const {
  switch (kind) {
    case Kind::elderly_woman: return "elderly_woman";
    case Kind::elderly_man: return "elderly_man";
    case Kind::young_man_1: return "young_man_1";
    case Kind::young_man_2: return "young_man_2";
    case Kind::other: return tag;
  }
  return tag;
}

std::string DriverGroup::display_name() const {
  switch (kind) {
    case Kind::elderly_woman: return "Elderly woman";
    case Kind::elderly_man: return "Elderly man";
    case Kind::young_man_1: return "Young man 1";
    case Kind::young_man_2: return "Young man 2";
    case Kind::other: return tag;
  }
  return tag;
}

// --- validation -----------------------------------------------------------

void validate(const Detection& det, std::uint32_t image_width, std::uint32_t image_height) {
  const auto& b = det.bbox;
  if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
      !std::isfinite(b.y_max)) {
    throw DataError("non-finite bounding box");
  }
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) throw DataError("degenerate bounding box");
  if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) throw DataError("confidence outside [0,1]");
  if (b.x_min < 0 || b.y_min < 0 || b.x_max > image_width || b.y_max > image_height) {
    throw DataError("bounding box outside image bounds");
  }
}

void validate(const DepthMap& map) {
  if (map.values.size() != std::size_t{map.width} * map.height) {
    throw ShapeError("depth map value count does not match width*height");
  }
  for (double v : map.values) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("depth map holds a negative or non-finite value");
  }
}

void validate(const DriveManifest& manifest) {
  if (manifest.drive_id.empty()) throw DataError("empty drive_id");
  if (manifest.image_width == 0 || manifest.image_height == 0) throw DataError("image dimensions must be positive");
  if (!(manifest.frame_rate_hz > 0) || !std::isfinite(manifest.frame_rate_hz)) {
    throw DataError("frame_rate_hz must be positive");
  }
}

// --- depth maps -------------------------------------------------------------

std::string encode_depth_map(const DepthMap& map) {
  validate(map);
  std::string out;
  out.reserve(kDepthHeaderBytes + 4 * map.values.size());
  out.append(kDepthMagic);
  put_u32(out, map.width);
  put_u32(out, map.height);
  for (double v : map.values) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw DataError("depth value overflows f32");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

DepthMap decode_depth_map(std::string_view bytes) {
  if (bytes.size() < kDepthHeaderBytes || bytes.substr(0, 4) != kDepthMagic) {
    throw FormatError("missing DMAP header");
  }
  DepthMap map;
  map.width = get_u32(bytes, 4);
  map.height = get_u32(bytes, 8);
  const std::size_t count = std::size_t{map.width} * map.height;
  if (bytes.size() - kDepthHeaderBytes != 4 * count) {
    throw FormatError("depth payload holds " + std::to_string((bytes.size() - kDepthHeaderBytes) / 4) +
                      " values, header promises " + std::to_string(count));
  }
  map.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, kDepthHeaderBytes + 4 * i));
    if (!std::isfinite(f) || f < 0.0f) {
      throw DataError("depth value " + std::to_string(i) + " is negative or non-finite");
    }
    map.values[i] = f;
  }
  return map;
}

DepthMap read_depth_map(const std::filesystem::path& path) {
  try {
    return decode_depth_map(text::read_file(path));
  } catch (const Error& e) {
    // keep the error type, add the file name
    if (dynamic_cast<const DataError*>(&e)) throw DataError(path.string() + ": " + e.what());
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_depth_map(const std::filesystem::path& path, const DepthMap& map) {
  text::write_file_atomic(path, encode_depth_map(map));
}

// --- frame records ------------------------------------------------------------

std::string format_frame(const FrameRecord& f) {
  std::string line = std::to_string(f.frame_index);
  line += ',';
  line += text::format_double(f.timestamp_s);
  line += ',';
  line += text::format_optional(f.ego_speed_mps);
  line += ',';
  line += text::format_optional(f.ego_accel_mps2);
  line += ',';
  if (f.depth_ref) line += *f.depth_ref;
  line += ',';
  for (std::size_t i = 0; i < f.detections.size(); ++i) {
    const auto& d = f.detections[i];
    if (i) line += ';';
    line += to_string(d.class_label);
    for (double v : {d.confidence, d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}) {
      line += ':';
      line += text::format_double(v);
    }
  }
  return line;
}

FrameRecord parse_frame(std::string_view line) {
  const auto fields = text::split(line, ',');
  if (fields.size() != 5 && fields.size() != 6) {
    throw FormatError("frame record needs 5 or 6 comma-separated fields, got " + std::to_string(fields.size()));
  }
  FrameRecord f;
  f.frame_index = text::parse_int(fields[0], "frame_index");
  f.timestamp_s = text::parse_double(fields[1], "timestamp_s");
  f.ego_speed_mps = text::parse_optional_double(fields[2], "ego_speed_mps");
  f.ego_accel_mps2 = text::parse_optional_double(fields[3], "ego_accel_mps2");
  if (!fields[4].empty()) f.depth_ref = std::string(fields[4]);
  if (fields.size() == 6 && !fields[5].empty()) {
    for (auto group : text::split(fields[5], ';')) {
      const auto parts = text::split(group, ':');
      if (parts.size() != 6) throw FormatError("detection group needs class:conf:xmin:ymin:xmax:ymax");
      Detection d;
      d.class_label = parse_class_label(parts[0]);
      d.confidence = text::parse_double(parts[1], "confidence");
      d.bbox.x_min = text::parse_double(parts[2], "x_min");
      d.bbox.y_min = text::parse_double(parts[3], "y_min");
      d.bbox.x_max = text::parse_double(parts[4], "x_max");
      d.bbox.y_max = text::parse_double(parts[5], "y_max");
      f.detections.push_back(d);
    }
  }
  return f;
}

std::string format_frames(std::span<const FrameRecord> frames) {
  std::string out;
  for (const auto& f : frames) {
    out += format_frame(f);
    out += '\n';
  }
  return out;
}

std::vector<FrameRecord> parse_frames(std::string_view contents, const DriveManifest& manifest) {
  std::vector<FrameRecord> frames;
  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;
    try {
      FrameRecord f = parse_frame(line);
      if (!std::isfinite(f.timestamp_s)) throw DataError("non-finite timestamp");
      for (const auto& v : {f.ego_speed_mps, f.ego_accel_mps2}) {
        if (v && !std::isfinite(*v)) throw DataError("non-finite telemetry");
      }
      for (const auto& d : f.detections) validate(d, manifest.image_width, manifest.image_height);
      frames.push_back(std::move(f));
    } catch (const DataError& e) {
      throw DataError(e.what() + line_context(line_no));
    } catch (const FormatError& e) {
      throw FormatError(e.what() + line_context(line_no));
    }
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const FrameRecord& a, const FrameRecord& b) { return a.frame_index < b.frame_index; });
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_index == frames[i - 1].frame_index) {
      throw DataError("duplicate frame_index " + std::to_string(frames[i].frame_index));
    }
    if (!(frames[i].timestamp_s > frames[i - 1].timestamp_s)) {
      throw DataError("timestamps not strictly increasing at frame " + std::to_string(frames[i].frame_index));
    }
  }
  return frames;
}

std::vector<FrameRecord> read_frames(const std::filesystem::path& path, const DriveManifest& manifest) {
  return parse_frames(text::read_file(path), manifest);
}

void write_frames(const std::filesystem::path& path, std::span<const FrameRecord> frames) {
  text::write_file_atomic(path, format_frames(frames));
}

// --- lidar ----------------------------------------------------------------------

std::string format_lidar(std::span<const LidarSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += std::to_string(s.frame_index);
    out += ',';
    out += text::format_double(s.u);
    out += ',';
    out += text::format_double(s.v);
    out += ',';
    out += text::format_double(s.true_distance_m);
    out += '\n';
  }
  return out;
}

std::vector<LidarSample> parse_lidar(std::string_view contents, const DriveManifest& manifest) {
  std::vector<LidarSample> samples;
  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 4) throw FormatError("lidar sample needs 4 fields" + line_context(line_no));
    LidarSample s;
    s.frame_index = text::parse_int(fields[0], "frame_index");
    s.u = text::parse_double(fields[1], "u");
    s.v = text::parse_double(fields[2], "v");
    s.true_distance_m = text::parse_double(fields[3], "true_distance_m");
    if (!(s.true_distance_m > 0) || !std::isfinite(s.true_distance_m)) {
      throw DataError("lidar distance must be positive" + line_context(line_no));
    }
    if (!(s.u >= 0 && s.u < manifest.image_width && s.v >= 0 && s.v < manifest.image_height)) {
      throw DataError("lidar pixel outside image" + line_context(line_no));
    }
    samples.push_back(s);
  }
  return samples;
}

std::vector<LidarSample> read_lidar(const std::filesystem::path& path, const DriveManifest& manifest) {
  return parse_lidar(text::read_file(path), manifest);
}

void write_lidar(const std::filesystem::path& path, std::span<const LidarSample> samples) {
  text::write_file_atomic(path, format_lidar(samples));
}

// --- manifest -------------------------------------------------------------------

std::string format_manifest(const DriveManifest& m) {
  std::string out;
  out += "drive_id=" + m.drive_id + "\n";
  out += "driver_group=" + m.driver_group.id() + "\n";
  out += "image_width=" + std::to_string(m.image_width) + "\n";
  out += "image_height=" + std::to_string(m.image_height) + "\n";
  out += "frame_rate_hz=" + text::format_double(m.frame_rate_hz) + "\n";
  return out;
}

DriveManifest parse_manifest(std::string_view contents) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : text::split(contents, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("manifest line without '='");
    std::string key(line.substr(0, eq));
    if (!kv.emplace(key, std::string(line.substr(eq + 1))).second) {
      throw FormatError("duplicate manifest key '" + key + "'");
    }
  }
  static constexpr std::array<std::string_view, 5> kKeys = {"drive_id", "driver_group", "image_width",
                                                            "image_height", "frame_rate_hz"};
  for (const auto& [key, _] : kv) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw FormatError("unknown manifest key '" + key + "'");
    }
  }
  for (auto key : kKeys) {
    if (!kv.contains(key)) throw FormatError("manifest missing key '" + std::string(key) + "'");
  }
  DriveManifest m;
  m.drive_id = kv.find("drive_id")->second;
  if (m.drive_id.find_first_of(" \t/\\,") != std::string::npos) throw FormatError("invalid drive_id");
  m.driver_group = DriverGroup::parse(kv.find("driver_group")->second);
  m.image_width = text::parse_u32(kv.find("image_width")->second, "image_width");
  m.image_height = text::parse_u32(kv.find("image_height")->second, "image_height");
  m.frame_rate_hz = text::parse_double(kv.find("frame_rate_hz")->second, "frame_rate_hz");
  validate(m);
  return m;
}

DriveManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(text::read_file(path)); }

void write_manifest(const std::filesystem::path& path, const DriveManifest& manifest) {
  text::write_file_atomic(path, format_manifest(manifest));
}

// --- flow ---------------------------------------------------------------------------

std::string format_flow(std::span<const FlowSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += std::to_string(s.frame_index) + "," + text::format_double(s.v_rel_mps) + "\n";
  }
  return out;
}

std::vector<FlowSample> parse_flow(std::string_view contents) {
  std::vector<FlowSample> out;
  for (auto line : text::split(contents, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) throw FormatError("flow sample needs frame_index,v_rel_mps");
    FlowSample s{text::parse_int(fields[0], "frame_index"), text::parse_double(fields[1], "v_rel_mps")};
    if (!std::isfinite(s.v_rel_mps)) throw DataError("non-finite flow velocity");
    out.push_back(s);
  }
  return out;
}

std::vector<FlowSample> read_flow(const std::filesystem::path& path) { return parse_flow(text::read_file(path)); }

}  // namespace carfollow::ingest
