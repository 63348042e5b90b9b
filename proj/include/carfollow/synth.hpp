#pragma once

// Synthetic two-vehicle drives with exact kinematic ground truth.
//
// Both vehicles follow piecewise-constant acceleration profiles integrated in
// closed form. The leading vehicle is rendered by pinhole projection with the
// horizon on the image centre row: a vehicle of width W and height Hv at
// distance Z, camera height Hc, focal length f spans
//
//     x ∈ cx ± f·W/(2Z),   y_max = cy + f·Hc/Z,   y_min = y_max − f·Hv/Z.
//
// Depth maps hold the background distance everywhere except the vehicle's
// pixels, which hold the true gap plus seeded Gaussian noise. Each frame draws
// from its own child seed, so any frame can be rendered independently.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "carfollow/ingest.hpp"

namespace carfollow::synth {

struct AccelSegment {
  double duration_s = 0;
  double accel_mps2 = 0;
};

struct DriverProfile {
  std::vector<AccelSegment> accel_segments;
  double initial_speed_mps = 0;
  double initial_position_m = 0;

  double duration() const;
};

// Throws ScenarioError for non-positive durations, an empty profile or a
// speed that would turn negative.
void validate(const DriverProfile& profile);

struct KinematicState {
  double position_m = 0;
  double velocity_mps = 0;
  double accel_mps2 = 0;  // acceleration of the segment starting at or before t
};

KinematicState state_at(const DriverProfile& profile, double t);
// Throws DomainError when a grid time falls outside [0, duration].
std::vector<KinematicState> integrate(const DriverProfile& profile, std::span<const double> t_grid);

struct SceneConfig {
  std::uint32_t image_width = 320;
  std::uint32_t image_height = 180;
  double focal_px = 320;
  double frame_rate_hz = 10;
  double depth_noise_sigma_m = 0.05;
  double bbox_jitter_px = 0.5;
  double vehicle_width_m = 1.8;
  double vehicle_height_m = 1.5;
  double camera_height_m = 1.2;
  double background_depth_m = 80;
  std::uint32_t lidar_every = 10;  // one lidar sample every n frames
};

void validate(const SceneConfig& scene);

struct Scenario {
  DriverProfile lead;
  DriverProfile ego;
  SceneConfig scene;
  std::string drive_id = "synthetic";
  ingest::DriverGroup driver_group = ingest::DriverGroup::parse("young_man_1");
  std::uint64_t seed = 0;
};

// 60 s at 10 Hz: the leader brakes at −2 m/s², cruises, then accelerates; the
// ego repeats the manoeuvre two seconds later.
Scenario default_scenario();

// key=value text. Profiles are "duration:accel;duration:accel;...".
Scenario parse_scenario(std::string_view text);
std::string format_scenario(const Scenario& scenario);

struct TruthRow {
  double t = 0;
  double gap_m = 0;
  double v_rel_mps = 0;  // lead speed − ego speed; positive when the gap opens
  double a_ego = 0;
  double a_lv = 0;
};

// t,gap_m,v_rel_mps,a_ego,a_lv
std::string format_truth(std::span<const TruthRow> rows);
std::vector<TruthRow> parse_truth(std::string_view text);

class SyntheticDrive {
 public:
  // Throws ScenarioError when the gap closes or the box leaves the image.
  explicit SyntheticDrive(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const ingest::DriveManifest& manifest() const { return manifest_; }
  const std::vector<ingest::FrameRecord>& frames() const { return frames_; }
  const std::vector<TruthRow>& truth() const { return truth_; }
  const std::vector<ingest::LidarSample>& lidar() const { return lidar_; }
  const ingest::BBox& true_bbox(std::size_t frame) const { return true_boxes_[frame]; }

  // Values are rounded to f32, exactly what a written file holds.
  ingest::DepthMap depth_map(std::size_t frame) const;
  ingest::DepthMap truth_depth_map(std::size_t frame) const;

  // manifest.txt, frames.csv, lidar.csv, truth.csv, scenario.txt,
  // depth/<ref>.dmap for every frame, depth_truth/<ref>.dmap for lidar frames.
  void write(const std::filesystem::path& dir) const;

 private:
  ingest::DepthMap render(std::size_t frame, bool noisy) const;

  Scenario scenario_;
  ingest::DriveManifest manifest_;
  std::vector<ingest::FrameRecord> frames_;
  std::vector<TruthRow> truth_;
  std::vector<ingest::LidarSample> lidar_;
  std::vector<ingest::BBox> true_boxes_;
};

// Deterministic child seed for (parent, frame, stream).
std::uint64_t child_seed(std::uint64_t parent, std::uint64_t frame, std::uint64_t stream);

}  // namespace carfollow::synth
