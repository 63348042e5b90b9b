#pragma once

// End-to-end orchestration behind the command line tool.
//
// A drive directory holds manifest.txt, frames.csv, lidar.csv and one
// subdirectory of depth maps per depth model (<ref>.dmap, ref taken from the
// frame records). depth_truth/ optionally holds dense reference maps for the
// lidar frames; when present calibrate also scores every model against them.
//
// Every command returns a process exit code: 0 success, 1 partial failure
// (some drives failed, others were written), 2 invalid input or config.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "carfollow/depthmetrics.hpp"
#include "carfollow/gbt.hpp"
#include "carfollow/kinematics.hpp"
#include "carfollow/leadvehicle.hpp"

namespace carfollow::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::vector<fs::path> drives;
  std::vector<std::string> depth_models{"depth"};  // subdirectories, named "model 1", "model 2", ... in order
  std::string truth_depth_dir = "depth_truth";
  std::string flow_file;  // optional per-drive relative velocity override
  fs::path calibration;   // empty: <out>/calibration.txt
  fs::path out = "out";

  leadvehicle::TriangleFactors triangle;
  double link_iou = leadvehicle::kLinkIou;
  kinematics::Options kinematics;
  depthmetrics::SsimForm ssim_form = depthmetrics::SsimForm::shifted;
  double depth_weight = depthmetrics::kDepthWeight;

  gbt::TrainParams gbt;
  double train_fraction = 0.7;
  double alpha = 0.05;
  std::size_t density_points = 512;

  std::uint64_t seed = 0;
  bool seed_set = false;  // true once a config file or flag names a seed
  int workers = 1;

  fs::path calibration_path() const { return calibration.empty() ? out / "calibration.txt" : calibration; }
};

// Applies one key=value setting. Throws ConfigError for unknown keys or
// unparsable values. List values (drives, depth_models) are comma-separated.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

// key=value lines; '#' starts a comment line. Later lines win.
PipelineConfig parse_config(std::string_view text);
std::string format_config(const PipelineConfig& config);

// Throws ConfigError when an invariant fails.
void validate(const PipelineConfig& config);

// Reads `path` (if non-empty), then applies `overrides` in order, logging
// each one that replaces an earlier value.
PipelineConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides);

struct CalibrationRecord {
  std::string model_id;
  std::string depth_dir;
  depthmetrics::CalibrationFit fit;
  bool operator==(const CalibrationRecord&) const;
};

// model_id, depth_dir, scale, offset, rmse_m, n_samples
std::string format_calibration(const CalibrationRecord& record);
CalibrationRecord parse_calibration(std::string_view text);

enum class TrainTarget { ego, lv };

TrainTarget parse_target(std::string_view s);
std::string_view to_string(TrainTarget target);

// Feature rows from series files. ego: distance, v_rel → a_ego.
// lv: distance, v_rel, a_ego → a_lv. Rows with any absent value are skipped.
gbt::Dataset assemble_dataset(const std::vector<kinematics::FollowingSeries>& series, TrainTarget target);

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions escaping
// fn are rethrown after all threads join (first index wins).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

int cmd_calibrate(const PipelineConfig& config, std::ostream& out);
int cmd_extract(const PipelineConfig& config, std::ostream& out);
// groups: "label=series_path" entries; repeated labels pool their values.
int cmd_groups(const PipelineConfig& config, const std::vector<std::string>& groups, std::ostream& out);
int cmd_train(const PipelineConfig& config, const std::vector<fs::path>& series, TrainTarget target,
              std::ostream& out);
// Writes the drive into config.out. No scenario file means the default one.
int cmd_simulate(const PipelineConfig& config, const fs::path& scenario, std::ostream& out);

}  // namespace carfollow::pipeline
