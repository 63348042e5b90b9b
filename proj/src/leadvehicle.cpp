#include "carfollow/leadvehicle.hpp"

#include <algorithm>
#include <cmath>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::leadvehicle {

namespace {

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

}  // namespace

LaneTriangle make_lane_triangle(double image_width, double image_height, TriangleFactors factors) {
  if (!(image_width > 0) || !(image_height > 0)) throw GeometryError("image dimensions must be positive");
  if (!(factors.left > 0 && factors.left < factors.right && factors.right < 1)) {
    throw GeometryError("triangle factors must satisfy 0 < left < right < 1");
  }
  LaneTriangle tri{{factors.left * image_width, image_height},
                   {factors.right * image_width, image_height},
                   {image_width / 2, image_height / 2}};
  if (cross(tri.left_base, tri.right_base, tri.apex) == 0) throw GeometryError("collinear lane triangle");
  return tri;
}

bool point_in_triangle(Point p, const LaneTriangle& tri) {
  const double d1 = cross(tri.left_base, tri.right_base, p);
  const double d2 = cross(tri.right_base, tri.apex, p);
  const double d3 = cross(tri.apex, tri.left_base, p);
  const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(has_neg && has_pos);
}

double iou(const ingest::BBox& a, const ingest::BBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::optional<ingest::Detection> find_leading(const ingest::FrameRecord& frame, const LaneTriangle& tri) {
  std::optional<ingest::Detection> best;
  for (const auto& det : frame.detections) {
    if (!ingest::is_vehicle(det.class_label)) continue;
    const Point left{det.bbox.x_min, det.bbox.y_max};
    const Point right{det.bbox.x_max, det.bbox.y_max};
    if (!point_in_triangle(left, tri) || !point_in_triangle(right, tri)) continue;
    if (!best || det.bbox.y_max > best->bbox.y_max ||
        (det.bbox.y_max == best->bbox.y_max && det.bbox.area() > best->bbox.area())) {
      best = det;
    }
  }
  return best;
}

LeadTrack build_track(std::span<const ingest::FrameRecord> frames, const LaneTriangle& tri, double link_iou) {
  LeadTrack track;
  std::optional<FrameInterval> open_gap;
  bool segment_open = false;
  for (const auto& frame : frames) {
    auto lead = find_leading(frame, tri);
    if (!lead) {
      segment_open = false;
      if (open_gap) {
        open_gap->last = frame.frame_index;
      } else {
        open_gap = FrameInterval{frame.frame_index, frame.frame_index};
      }
      continue;
    }
    if (open_gap) {
      track.gaps.push_back(*open_gap);
      open_gap.reset();
    }
    if (segment_open && iou(track.entries.back().detection.bbox, lead->bbox) >= link_iou) {
      track.segments.back().last = frame.frame_index;
    } else {
      track.segments.push_back({frame.frame_index, frame.frame_index});
      segment_open = true;
    }
    track.entries.push_back({frame.frame_index, *lead, std::nullopt, track.segments.size() - 1});
  }
  if (open_gap) track.gaps.push_back(*open_gap);
  return track;
}

std::string format_track(const LeadTrack& track) {
  std::string out;
  for (const auto& e : track.entries) {
    const auto& b = e.detection.bbox;
    out += std::to_string(e.frame_index);
    for (double v : {b.x_min, b.y_min, b.x_max, b.y_max}) {
      out += ',';
      out += text::format_double(v);
    }
    out += ',';
    out += text::format_optional(e.distance_m);
    out += '\n';
  }
  return out;
}

}  // namespace carfollow::leadvehicle
