#pragma once

// Input/output artifacts of the pipeline and their on-disk formats.
//
//   depth map   "DMAP" | u32 width | u32 height | width*height f32, all LE, row-major
//   frames      frame_index,timestamp_s,ego_speed,ego_accel,depth_ref,dets
//               dets = class:conf:xmin:ymin:xmax:ymax joined by ';'
//   lidar       frame_index,u,v,true_distance_m
//   manifest    key=value lines
//
// Empty numeric fields mean "absent". Absent telemetry stays absent; it is
// never replaced by zero.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carfollow::ingest {

enum class ClassLabel { car, truck, traffic_sign, traffic_signal };

std::string_view to_string(ClassLabel c);
ClassLabel parse_class_label(std::string_view s);
inline bool is_vehicle(ClassLabel c) { return c == ClassLabel::car || c == ClassLabel::truck; }

struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool operator==(const BBox&) const = default;
};

struct Detection {
  ClassLabel class_label = ClassLabel::car;
  BBox bbox;
  double confidence = 0.0;
  bool operator==(const Detection&) const = default;
};

struct FrameRecord {
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;
  std::vector<Detection> detections;
  std::optional<std::string> depth_ref;
  std::optional<double> ego_speed_mps;
  std::optional<double> ego_accel_mps2;
  bool operator==(const FrameRecord&) const = default;
};

// Single-channel raster. Stored as f32 on disk; held as double in memory so
// metrics and calibration run at full precision. Writing rounds to f32.
struct DepthMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;

  double at(std::uint32_t row, std::uint32_t col) const { return values[std::size_t{row} * width + col]; }
  double& at(std::uint32_t row, std::uint32_t col) { return values[std::size_t{row} * width + col]; }
  std::size_t size() const { return values.size(); }
  bool operator==(const DepthMap&) const = default;
};

struct LidarSample {
  std::int64_t frame_index = 0;
  double u = 0, v = 0;
  double true_distance_m = 0;
  bool operator==(const LidarSample&) const = default;
};

// Canonical study groups plus a free-form tag for anything else.
struct DriverGroup {
  enum class Kind { elderly_woman, elderly_man, young_man_1, young_man_2, other };
  Kind kind = Kind::other;
  std::string tag;  // only meaningful for Kind::other

  static DriverGroup parse(std::string_view s);
  std::string id() const;            // serialized form
  std::string display_name() const;  // "Elderly woman", ...
  bool is_young() const { return kind == Kind::young_man_1 || kind == Kind::young_man_2; }
  bool is_elderly() const { return kind == Kind::elderly_woman || kind == Kind::elderly_man; }
  bool operator==(const DriverGroup&) const = default;
};

struct DriveManifest {
  std::string drive_id;
  DriverGroup driver_group;
  std::uint32_t image_width = 0;
  std::uint32_t image_height = 0;
  double frame_rate_hz = 0;
  bool operator==(const DriveManifest&) const = default;
};

// --- validation -----------------------------------------------------------

void validate(const Detection& det, std::uint32_t image_width, std::uint32_t image_height);
void validate(const DepthMap& map);
void validate(const DriveManifest& manifest);

// --- depth maps -------------------------------------------------------------

std::string encode_depth_map(const DepthMap& map);
DepthMap decode_depth_map(std::string_view bytes);
DepthMap read_depth_map(const std::filesystem::path& path);
void write_depth_map(const std::filesystem::path& path, const DepthMap& map);

// --- frame records ------------------------------------------------------------

std::string format_frame(const FrameRecord& frame);
FrameRecord parse_frame(std::string_view line);
std::string format_frames(std::span<const FrameRecord> frames);
// Parses, sorts by frame_index and enforces every FrameRecord invariant
// against the manifest's image bounds.
std::vector<FrameRecord> parse_frames(std::string_view text, const DriveManifest& manifest);
std::vector<FrameRecord> read_frames(const std::filesystem::path& path, const DriveManifest& manifest);
void write_frames(const std::filesystem::path& path, std::span<const FrameRecord> frames);

// --- lidar ----------------------------------------------------------------------

std::string format_lidar(std::span<const LidarSample> samples);
std::vector<LidarSample> parse_lidar(std::string_view text, const DriveManifest& manifest);
std::vector<LidarSample> read_lidar(const std::filesystem::path& path, const DriveManifest& manifest);
void write_lidar(const std::filesystem::path& path, std::span<const LidarSample> samples);

// --- manifest -------------------------------------------------------------------

std::string format_manifest(const DriveManifest& manifest);
DriveManifest parse_manifest(std::string_view text);
DriveManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DriveManifest& manifest);

// --- optional flow-velocity override ------------------------------------------
// frame_index,v_rel_mps per line; ingested relative velocity (e.g. from optical
// flow) that replaces the differentiated distance where present.

struct FlowSample {
  std::int64_t frame_index = 0;
  double v_rel_mps = 0;
  bool operator==(const FlowSample&) const = default;
};

std::string format_flow(std::span<const FlowSample> samples);
std::vector<FlowSample> parse_flow(std::string_view text);
std::vector<FlowSample> read_flow(const std::filesystem::path& path);

}  // namespace carfollow::ingest
