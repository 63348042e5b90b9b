#pragma once

// Car-following kinematics from a leading-vehicle distance track.
//
// Over one step of length t the relative motion of ego and leading vehicle
// obeys the differenced equation of motion
//
//     Δs = Δu·t + ½·Δa·t²
//
// where every Δ is "ego minus leading vehicle": Δs is how much more ground the
// ego covered (the gap closed by Δs), Δu is the closing speed at the start of
// the step and Δa = a_ego − a_lv. Solving for Δa gives the leading-vehicle
// acceleration from the ego telemetry.
//
// Sign convention of the exported series: v_rel > 0 means the gap is opening,
// so Δs = −(d[k+1] − d[k]) and Δu = −v_rel[k].

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carfollow/ingest.hpp"
#include "carfollow/leadvehicle.hpp"

namespace carfollow::kinematics {

enum class DeltaSMode {
  change,    // Δs = change of following distance over the step (default)
  absolute,  // Δs = following distance itself, literal reading kept for comparison
};

struct Options {
  int smoothing_window = 5;  // centred moving average on v_rel; odd, >= 1
  int distance_window = 9;   // centred moving average on d before differencing; odd, >= 1
  int accel_window = 5;      // centred moving average on the per-step Δa estimates; odd, >= 1
  DeltaSMode delta_s = DeltaSMode::change;
};

struct FollowingSeries {
  std::vector<double> t;
  std::vector<std::optional<double>> d;
  std::vector<std::optional<double>> v_rel;
  std::vector<std::optional<double>> a_ego;
  std::vector<std::optional<double>> a_lv;

  std::size_t size() const { return t.size(); }
};

// Centred moving average. Near the ends the window shrinks symmetrically, so
// linear sequences pass through unchanged. Throws ConfigError for an even or
// non-positive window.
std::vector<double> moving_average(std::span<const double> values, int window);

// Derivative of d over t: second-order three-point differences (central in
// the interior, one-sided at the ends; plain two-point for two samples).
// Exact for quadratics on any strictly increasing grid.
std::vector<double> differentiate(std::span<const double> d, std::span<const double> t);

// differentiate() followed by moving_average(window). Throws DataError for
// fewer than two samples or non-increasing time.
std::vector<double> relative_velocity(std::span<const double> d, std::span<const double> t, int window = 5);

// a_lv = a_ego − Δa with Δa = 2(Δs − Δu·t_step)/t_step². Throws DomainError
// for t_step <= 0.
double lv_acceleration(double delta_s, double delta_u, double a_ego, double t_step);

// Track entries must carry distance_m. Output rows span the first to the
// last tracked frame; gap frames have d, v_rel and a_lv absent. Inside a
// segment every frame except a singleton gets a_lv; the last frame of a
// segment reuses the step that ends on it. Per-step Δa values are smoothed
// (accel_window) before a_lv = a_ego − Δa. A frame without ego acceleration
// gets a_lv absent, never zero. `flow` optionally overrides v_rel per frame.
FollowingSeries build_following_series(const leadvehicle::LeadTrack& track,
                                       std::span<const ingest::FrameRecord> frames,
                                       const ingest::DriveManifest& manifest, const Options& options = {},
                                       std::span<const ingest::FlowSample> flow = {});

// t,d,v_rel,a_ego,a_lv per row; absent values empty.
std::string format_series(const FollowingSeries& series);
FollowingSeries parse_series(std::string_view text);
FollowingSeries read_series(const std::filesystem::path& path);

}  // namespace carfollow::kinematics
