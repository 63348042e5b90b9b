#pragma once

// Leading-vehicle identification. The ego lane is approximated by a triangle
// whose base spans a fraction of the image bottom edge and whose apex sits at
// the image centre (taken as the lane vanishing point). A car or truck is the
// leading vehicle when both bottom corners of its box fall inside.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carfollow/ingest.hpp"

namespace carfollow::leadvehicle {

struct Point {
  double x = 0, y = 0;
};

struct LaneTriangle {
  Point left_base;
  Point right_base;
  Point apex;
};

struct TriangleFactors {
  double left = 0.2;
  double right = 0.8;
};

// Throws GeometryError for non-positive dimensions, factors outside (0,1)
// or left >= right.
LaneTriangle make_lane_triangle(double image_width, double image_height, TriangleFactors factors = {});

// Boundary counts as inside.
bool point_in_triangle(Point p, const LaneTriangle& tri);

double iou(const ingest::BBox& a, const ingest::BBox& b);

// Among cars/trucks with both bottom corners inside `tri`, the one lowest in
// the image (largest y_max); ties go to the larger box, then the earlier one.
std::optional<ingest::Detection> find_leading(const ingest::FrameRecord& frame, const LaneTriangle& tri);

struct FrameInterval {
  std::int64_t first = 0;  // inclusive frame_index bounds
  std::int64_t last = 0;
  bool operator==(const FrameInterval&) const = default;
};

struct TrackEntry {
  std::int64_t frame_index = 0;
  ingest::Detection detection;
  std::optional<double> distance_m;
  std::size_t segment = 0;  // index into LeadTrack::segments
};

struct LeadTrack {
  std::vector<TrackEntry> entries;
  std::vector<FrameInterval> segments;  // runs of linked entries
  std::vector<FrameInterval> gaps;      // runs of frames with no leading vehicle
};

inline constexpr double kLinkIou = 0.3;

// Frames must be sorted by frame_index. Successive leading boxes stay in one
// segment while IoU >= link_iou; a lower IoU starts a new segment and a frame
// without a leading vehicle closes it and opens a gap.
LeadTrack build_track(std::span<const ingest::FrameRecord> frames, const LaneTriangle& tri,
                      double link_iou = kLinkIou);

// frame_index,x_min,y_min,x_max,y_max,distance_m
std::string format_track(const LeadTrack& track);

}  // namespace carfollow::leadvehicle
