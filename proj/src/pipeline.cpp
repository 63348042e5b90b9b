#include "carfollow/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "carfollow/errors.hpp"
#include "carfollow/ingest.hpp"
#include "carfollow/stats.hpp"
#include "carfollow/synth.hpp"
#include "carfollow/text.hpp"

namespace carfollow::pipeline {

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kInvalid = 2;

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (auto part : text::split(value, ',')) {
    part = text::trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

int parse_int_setting(std::string_view value, std::string_view key) {
  const auto v = text::parse_int(value, key);
  if (v < -1'000'000'000 || v > 1'000'000'000) throw ConfigError(std::string(key) + " out of range");
  return static_cast<int>(v);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

void require_dir(const fs::path& p, std::string_view what) {
  if (!fs::is_directory(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

void require_file(const fs::path& p, std::string_view what) {
  if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

fs::path depth_path(const fs::path& drive, const std::string& dir, const ingest::FrameRecord& frame) {
  if (!frame.depth_ref) {
    throw DataError("frame " + std::to_string(frame.frame_index) + " has no depth reference");
  }
  return drive / dir / (*frame.depth_ref + ".dmap");
}

struct DriveInputs {
  ingest::DriveManifest manifest;
  std::vector<ingest::FrameRecord> frames;
};

DriveInputs read_drive(const fs::path& drive) {
  require_dir(drive, "drive directory");
  require_file(drive / "manifest.txt", "manifest");
  require_file(drive / "frames.csv", "frame records");
  DriveInputs in;
  in.manifest = ingest::read_manifest(drive / "manifest.txt");
  in.frames = ingest::read_frames(drive / "frames.csv", in.manifest);
  return in;
}

const ingest::FrameRecord& frame_by_index(const std::vector<ingest::FrameRecord>& frames, std::int64_t index) {
  auto it = std::lower_bound(frames.begin(), frames.end(), index,
                             [](const ingest::FrameRecord& f, std::int64_t i) { return f.frame_index < i; });
  if (it == frames.end() || it->frame_index != index) {
    throw DataError("lidar sample refers to unknown frame " + std::to_string(index));
  }
  return *it;
}

// Runs `body` and maps library errors to exit code 2 with a logged message.
template <class F>
int guarded(std::string_view command, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    spdlog::error("{}: {}", command, e.what());
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}: {}", command, e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    spdlog::error("{}: unexpected failure: {}", command, e.what());
    return kInvalid;
  }
}

// --- calibrate --------------------------------------------------------------

std::vector<std::vector<depthmetrics::DepthPair>> collect_pairs(const fs::path& drive, const PipelineConfig& config) {
  const auto in = read_drive(drive);
  require_file(drive / "lidar.csv", "lidar samples");
  const auto lidar = ingest::read_lidar(drive / "lidar.csv", in.manifest);
  std::vector<std::vector<depthmetrics::DepthPair>> pairs(config.depth_models.size());
  for (std::size_t m = 0; m < config.depth_models.size(); ++m) {
    require_dir(drive / config.depth_models[m], "depth model directory");
    for (const auto& sample : lidar) {
      const auto& frame = frame_by_index(in.frames, sample.frame_index);
      const auto map = ingest::read_depth_map(depth_path(drive, config.depth_models[m], frame));
      if (map.width != in.manifest.image_width || map.height != in.manifest.image_height) {
        throw ShapeError("depth map size differs from the manifest image size");
      }
      const auto col = static_cast<std::uint32_t>(std::floor(sample.u));
      const auto row = static_cast<std::uint32_t>(std::floor(sample.v));
      pairs[m].push_back({map.at(row, col), sample.true_distance_m});
    }
  }
  return pairs;
}

struct DriveReports {
  std::vector<std::vector<depthmetrics::DepthQualityReport>> reports;  // per model, per truth frame
  std::vector<std::size_t> pixels;                                    // per truth frame
};

// Scores calibrated model maps against the dense reference maps of the lidar frames.
DriveReports collect_reports(const fs::path& drive, const PipelineConfig& config,
                             const std::vector<depthmetrics::CalibrationFit>& fits) {
  DriveReports r;
  r.reports.resize(fits.size());
  if (config.truth_depth_dir.empty() || !fs::is_directory(drive / config.truth_depth_dir)) return r;
  const auto in = read_drive(drive);
  const auto lidar = ingest::read_lidar(drive / "lidar.csv", in.manifest);
  for (const auto& sample : lidar) {
    const auto& frame = frame_by_index(in.frames, sample.frame_index);
    const auto truth_file = depth_path(drive, config.truth_depth_dir, frame);
    if (!fs::exists(truth_file)) continue;
    const auto truth = ingest::read_depth_map(truth_file);
    for (std::size_t m = 0; m < fits.size(); ++m) {
      auto pred = ingest::read_depth_map(depth_path(drive, config.depth_models[m], frame));
      for (auto& v : pred.values) v = fits[m].apply(v);
      r.reports[m].push_back(depthmetrics::quality_report(truth, pred, config.depth_weight, config.ssim_form));
    }
    r.pixels.push_back(truth.size());
  }
  return r;
}

// --- extract ----------------------------------------------------------------

struct ExtractResult {
  std::string drive_id;
  std::string series;
  std::string track;
  std::size_t rows = 0;
};

ExtractResult extract_drive(const fs::path& drive, const PipelineConfig& config, const CalibrationRecord& cal) {
  const auto in = read_drive(drive);
  const auto tri = leadvehicle::make_lane_triangle(in.manifest.image_width, in.manifest.image_height, config.triangle);
  auto track = leadvehicle::build_track(in.frames, tri, config.link_iou);
  for (auto& entry : track.entries) {
    const auto& frame = frame_by_index(in.frames, entry.frame_index);
    const auto map = ingest::read_depth_map(depth_path(drive, cal.depth_dir, frame));
    entry.distance_m = depthmetrics::bbox_distance(map, entry.detection.bbox, cal.fit);
  }
  std::vector<ingest::FlowSample> flow;
  if (!config.flow_file.empty() && fs::exists(drive / config.flow_file)) {
    flow = ingest::read_flow(drive / config.flow_file);
  }
  ExtractResult r;
  r.drive_id = in.manifest.drive_id;
  if (track.entries.empty()) {
    spdlog::warn("extract: drive '{}' has no leading vehicle in any frame", r.drive_id);
  }
  const auto series = kinematics::build_following_series(track, in.frames, in.manifest, config.kinematics, flow);
  r.series = kinematics::format_series(series);
  r.track = leadvehicle::format_track(track);
  r.rows = series.size();
  return r;
}

std::vector<kinematics::FollowingSeries> read_all_series(const std::vector<fs::path>& paths) {
  std::vector<kinematics::FollowingSeries> out;
  for (const auto& p : paths) {
    require_file(p, "series file");
    out.push_back(kinematics::read_series(p));
  }
  return out;
}

}  // namespace

// --- config -------------------------------------------------------------------

void apply_setting(PipelineConfig& c, std::string_view key, std::string_view value) {
  key = text::trim(key);
  value = text::trim(value);
  try {
    auto num = [&] { return text::parse_double(value, key); };
    if (key == "drives") {
      c.drives.clear();
      for (const auto& d : split_list(value)) c.drives.emplace_back(d);
    } else if (key == "depth_models") {
      c.depth_models = split_list(value);
    } else if (key == "truth_depth_dir") {
      c.truth_depth_dir = std::string(value);
    } else if (key == "flow_file") {
      c.flow_file = std::string(value);
    } else if (key == "calibration") {
      c.calibration = std::string(value);
    } else if (key == "out") {
      c.out = std::string(value);
    } else if (key == "triangle_left") {
      c.triangle.left = num();
    } else if (key == "triangle_right") {
      c.triangle.right = num();
    } else if (key == "link_iou") {
      c.link_iou = num();
    } else if (key == "smoothing_window") {
      c.kinematics.smoothing_window = parse_int_setting(value, key);
    } else if (key == "distance_window") {
      c.kinematics.distance_window = parse_int_setting(value, key);
    } else if (key == "accel_window") {
      c.kinematics.accel_window = parse_int_setting(value, key);
    } else if (key == "delta_s") {
      if (value == "change") c.kinematics.delta_s = kinematics::DeltaSMode::change;
      else if (value == "absolute") c.kinematics.delta_s = kinematics::DeltaSMode::absolute;
      else throw ConfigError("delta_s must be change or absolute");
    } else if (key == "ssim_form") {
      if (value == "shifted") c.ssim_form = depthmetrics::SsimForm::shifted;
      else if (value == "conventional") c.ssim_form = depthmetrics::SsimForm::conventional;
      else throw ConfigError("ssim_form must be shifted or conventional");
    } else if (key == "depth_weight") {
      c.depth_weight = num();
    } else if (key == "rounds") {
      c.gbt.rounds = parse_int_setting(value, key);
    } else if (key == "learning_rate") {
      c.gbt.learning_rate = num();
    } else if (key == "max_depth") {
      c.gbt.max_depth = parse_int_setting(value, key);
    } else if (key == "min_child_weight") {
      c.gbt.min_child_weight = num();
    } else if (key == "reg_lambda") {
      c.gbt.reg_lambda = num();
    } else if (key == "base_score") {
      c.gbt.base_score = num();
    } else if (key == "train_fraction") {
      c.train_fraction = num();
    } else if (key == "alpha") {
      c.alpha = num();
    } else if (key == "density_points") {
      const int n = parse_int_setting(value, key);
      if (n < 2) throw ConfigError("density_points must be at least 2");
      c.density_points = static_cast<std::size_t>(n);
    } else if (key == "seed") {
      const auto s = text::parse_int(value, key);
      if (s < 0) throw ConfigError("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
      c.seed_set = true;
    } else if (key == "workers") {
      c.workers = parse_int_setting(value, key);
    } else {
      throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig parse_config(std::string_view contents) {
  PipelineConfig c;
  for (auto line : text::split(contents, '\n')) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line without '=': " + std::string(line));
    apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

std::string format_config(const PipelineConfig& c) {
  std::vector<std::string> drives;
  for (const auto& d : c.drives) drives.push_back(d.string());
  std::string out;
  auto kv = [&](std::string_view k, const std::string& v) { out += std::string(k) + "=" + v + "\n"; };
  auto num = [](double v) { return text::format_double(v); };
  kv("drives", join(drives));
  kv("depth_models", join(c.depth_models));
  kv("truth_depth_dir", c.truth_depth_dir);
  kv("flow_file", c.flow_file);
  kv("calibration", c.calibration.string());
  kv("out", c.out.string());
  kv("triangle_left", num(c.triangle.left));
  kv("triangle_right", num(c.triangle.right));
  kv("link_iou", num(c.link_iou));
  kv("smoothing_window", std::to_string(c.kinematics.smoothing_window));
  kv("distance_window", std::to_string(c.kinematics.distance_window));
  kv("accel_window", std::to_string(c.kinematics.accel_window));
  kv("delta_s", c.kinematics.delta_s == kinematics::DeltaSMode::change ? "change" : "absolute");
  kv("ssim_form", c.ssim_form == depthmetrics::SsimForm::shifted ? "shifted" : "conventional");
  kv("depth_weight", num(c.depth_weight));
  kv("rounds", std::to_string(c.gbt.rounds));
  kv("learning_rate", num(c.gbt.learning_rate));
  kv("max_depth", std::to_string(c.gbt.max_depth));
  kv("min_child_weight", num(c.gbt.min_child_weight));
  kv("reg_lambda", num(c.gbt.reg_lambda));
  kv("base_score", num(c.gbt.base_score));
  kv("train_fraction", num(c.train_fraction));
  kv("alpha", num(c.alpha));
  kv("density_points", std::to_string(c.density_points));
  if (c.seed_set) kv("seed", std::to_string(c.seed));
  kv("workers", std::to_string(c.workers));
  return out;
}

void validate(const PipelineConfig& c) {
  const auto& f = c.triangle;
  if (!(f.left > 0 && f.left < 1 && f.right > 0 && f.right < 1 && f.left < f.right)) {
    throw ConfigError("triangle factors must lie in (0,1) with left < right");
  }
  if (!(c.link_iou >= 0 && c.link_iou <= 1)) throw ConfigError("link_iou must lie in [0,1]");
  for (int w : {c.kinematics.smoothing_window, c.kinematics.distance_window, c.kinematics.accel_window}) {
    if (w < 1 || w % 2 == 0) throw ConfigError("smoothing windows must be odd and positive");
  }
  if (c.depth_models.empty()) throw ConfigError("depth_models must name at least one directory");
  if (!(c.depth_weight >= 0) || !std::isfinite(c.depth_weight)) throw ConfigError("depth_weight must be >= 0");
  gbt::validate(c.gbt);
  if (!(c.train_fraction > 0 && c.train_fraction < 1)) throw ConfigError("train_fraction must lie in (0,1)");
  if (!(c.alpha > 0 && c.alpha < 1)) throw ConfigError("alpha must lie in (0,1)");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.out.empty()) throw ConfigError("out directory must be set");
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  PipelineConfig c;
  std::map<std::string, std::string> seen;
  auto record = [&](std::string_view key, std::string_view value, const char* source) {
    const std::string k(text::trim(key));
    const auto it = seen.find(k);
    if (it != seen.end() && it->second != text::trim(value)) {
      spdlog::info("config: {} overrides {}={} with {}", source, k, it->second, text::trim(value));
    }
    seen[k] = std::string(text::trim(value));
  };
  if (!path.empty()) {
    require_file(path, "config file");
    for (const auto& line : text::read_lines(path)) {
      const auto l = text::trim(line);
      if (l.empty() || l.front() == '#') continue;
      const auto eq = l.find('=');
      if (eq == std::string_view::npos) throw ConfigError("config line without '=': " + std::string(l));
      record(l.substr(0, eq), l.substr(eq + 1), "config file");
      apply_setting(c, l.substr(0, eq), l.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : overrides) {
    record(k, v, "command line");
    apply_setting(c, k, v);
  }
  validate(c);
  return c;
}

bool CalibrationRecord::operator==(const CalibrationRecord& o) const {
  return model_id == o.model_id && depth_dir == o.depth_dir && fit.scale == o.fit.scale &&
         fit.offset == o.fit.offset && fit.rmse_m == o.fit.rmse_m && fit.n_samples == o.fit.n_samples;
}

std::string format_calibration(const CalibrationRecord& r) {
  return "model_id=" + r.model_id + "\ndepth_dir=" + r.depth_dir + "\nscale=" + text::format_double(r.fit.scale) +
         "\noffset=" + text::format_double(r.fit.offset) + "\nrmse_m=" + text::format_double(r.fit.rmse_m) +
         "\nn_samples=" + std::to_string(r.fit.n_samples) + "\n";
}

CalibrationRecord parse_calibration(std::string_view contents) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : text::split(contents, '\n')) {
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("calibration line without '='");
    if (!kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))).second) {
      throw FormatError("duplicate calibration key");
    }
  }
  for (const char* k : {"model_id", "depth_dir", "scale", "offset", "rmse_m", "n_samples"}) {
    if (!kv.count(k)) throw FormatError(std::string("calibration lacks ") + k);
  }
  if (kv.size() != 6) throw FormatError("unknown calibration key");
  CalibrationRecord r;
  r.model_id = kv["model_id"];
  r.depth_dir = kv["depth_dir"];
  r.fit.scale = text::parse_double(kv["scale"], "scale");
  r.fit.offset = text::parse_double(kv["offset"], "offset");
  r.fit.rmse_m = text::parse_double(kv["rmse_m"], "rmse_m");
  const auto n = text::parse_int(kv["n_samples"], "n_samples");
  if (n < 0) throw FormatError("n_samples must be non-negative");
  r.fit.n_samples = static_cast<std::size_t>(n);
  if (r.depth_dir.empty()) throw FormatError("calibration depth_dir is empty");
  return r;
}

TrainTarget parse_target(std::string_view s) {
  if (s == "ego") return TrainTarget::ego;
  if (s == "lv") return TrainTarget::lv;
  throw ConfigError("target must be ego or lv");
}

std::string_view to_string(TrainTarget target) { return target == TrainTarget::ego ? "ego" : "lv"; }

gbt::Dataset assemble_dataset(const std::vector<kinematics::FollowingSeries>& series, TrainTarget target) {
  gbt::Dataset ds;
  ds.feature_names = {"distance", "v_rel"};
  if (target == TrainTarget::lv) ds.feature_names.push_back("a_ego");
  std::vector<double> row;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s.d[i] || !s.v_rel[i] || !s.a_ego[i]) continue;
      row = {*s.d[i], *s.v_rel[i]};
      if (target == TrainTarget::ego) {
        ds.add_row(row, *s.a_ego[i]);
      } else {
        if (!s.a_lv[i]) continue;
        row.push_back(*s.a_ego[i]);
        ds.add_row(row, *s.a_lv[i]);
      }
    }
  }
  if (ds.rows() == 0) {
    throw SchemaError("no series row holds every column the " + std::string(to_string(target)) + " target needs");
  }
  return ds;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// --- commands -------------------------------------------------------------------

int cmd_calibrate(const PipelineConfig& config, std::ostream& out) {
  return guarded("calibrate", [&] {
    if (config.drives.empty()) throw ConfigError("no drives configured");
    const std::size_t n_models = config.depth_models.size();
    const std::size_t n_drives = config.drives.size();
    std::vector<std::vector<std::vector<depthmetrics::DepthPair>>> per_drive(n_drives);
    parallel_for(n_drives, config.workers, [&](std::size_t i) { per_drive[i] = collect_pairs(config.drives[i], config); });

    std::vector<depthmetrics::ModelScore> scores;
    std::vector<CalibrationRecord> records;
    std::vector<depthmetrics::CalibrationFit> fits;
    for (std::size_t m = 0; m < n_models; ++m) {
      std::vector<depthmetrics::DepthPair> pairs;
      for (const auto& d : per_drive) pairs.insert(pairs.end(), d[m].begin(), d[m].end());
      if (pairs.empty()) throw CalibrationError("no lidar samples available");
      records.push_back({"model " + std::to_string(m + 1), config.depth_models[m], depthmetrics::fit_calibration(pairs)});
      scores.push_back({records.back().model_id, records.back().fit.rmse_m});
      fits.push_back(records.back().fit);
    }

    std::vector<DriveReports> drive_reports(n_drives);
    parallel_for(n_drives, config.workers,
                 [&](std::size_t i) { drive_reports[i] = collect_reports(config.drives[i], config, fits); });
    std::vector<std::string> report_texts;
    for (std::size_t m = 0; m < n_models; ++m) {
      std::vector<depthmetrics::DepthQualityReport> reports;
      std::vector<std::size_t> pixels;
      for (const auto& d : drive_reports) {
        reports.insert(reports.end(), d.reports[m].begin(), d.reports[m].end());
        pixels.insert(pixels.end(), d.pixels.begin(), d.pixels.end());
      }
      std::string report = "model_id=" + records[m].model_id + "\ndepth_dir=" + records[m].depth_dir + "\n";
      report += "lidar_rmse_m=" + text::format_double(records[m].fit.rmse_m) + "\n";
      if (!reports.empty()) report += depthmetrics::format_report(depthmetrics::combine_reports(reports, pixels));
      report_texts.push_back(std::move(report));
    }

    const auto selected = depthmetrics::select_model(scores);
    const auto& chosen = *std::find_if(records.begin(), records.end(),
                                       [&](const CalibrationRecord& r) { return r.model_id == selected; });
    // everything is computed before the first write, so a bad input leaves no outputs
    for (std::size_t m = 0; m < n_models; ++m) {
      text::write_file_atomic(config.out / ("quality_model_" + std::to_string(m + 1) + ".txt"), report_texts[m]);
    }
    text::write_file_atomic(config.calibration_path(), format_calibration(chosen));
    for (const auto& s : scores) out << s.model_id << ": rmse_m=" << text::format_double(s.rmse_m) << "\n";
    out << "selected model: " << selected << "\n";
    return kOk;
  });
}

int cmd_extract(const PipelineConfig& config, std::ostream& out) {
  return guarded("extract", [&] {
    if (config.drives.empty()) throw ConfigError("no drives configured");
    require_file(config.calibration_path(), "calibration (run calibrate first)");
    const auto cal = parse_calibration(text::read_file(config.calibration_path()));

    std::vector<std::optional<ExtractResult>> results(config.drives.size());
    std::vector<std::string> failures(config.drives.size());
    parallel_for(config.drives.size(), config.workers, [&](std::size_t i) {
      try {
        results[i] = extract_drive(config.drives[i], config, cal);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });

    std::set<std::string> ids;
    for (const auto& r : results) {
      if (r && !ids.insert(r->drive_id).second) throw ConfigError("drive id '" + r->drive_id + "' appears twice");
    }
    std::size_t ok = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i]) {
        spdlog::error("extract: drive {} failed: {}", config.drives[i].string(), failures[i]);
        out << config.drives[i].string() << ": failed\n";
        continue;
      }
      const auto dir = config.out / results[i]->drive_id;
      text::write_file_atomic(dir / "series.csv", results[i]->series);
      text::write_file_atomic(dir / "track.csv", results[i]->track);
      out << results[i]->drive_id << ": " << results[i]->rows << " rows\n";
      ++ok;
    }
    if (ok == results.size()) return kOk;
    return ok == 0 ? kInvalid : kPartial;
  });
}

int cmd_groups(const PipelineConfig& config, const std::vector<std::string>& groups, std::ostream& out) {
  return guarded("groups", [&] {
    std::vector<stats::GroupSample> samples;
    for (const auto& entry : groups) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) throw ConfigError("group argument must be label=series_path");
      const auto group = ingest::DriverGroup::parse(std::string_view(entry).substr(0, eq));
      if (group.id().find_first_of("/\\") != std::string::npos || group.id().starts_with(".")) {
        throw ConfigError("group label cannot be used as a file name");
      }
      const fs::path path = entry.substr(eq + 1);
      require_file(path, "series file");
      const auto series = kinematics::read_series(path);
      auto it = std::find_if(samples.begin(), samples.end(),
                             [&](const stats::GroupSample& s) { return s.group == group; });
      if (it == samples.end()) {
        samples.push_back({group, {}});
        it = samples.end() - 1;
      }
      for (const auto& d : series.d) {
        if (d) it->values.push_back(*d);
      }
    }
    if (samples.size() < 2) throw ConfigError("groups needs at least two labelled groups");

    const auto rows = stats::compare_groups(samples, config.alpha);
    std::vector<std::pair<std::string, std::string>> densities;
    for (const auto& s : samples) {
      densities.emplace_back("density_" + s.group.id() + ".csv",
                             stats::format_density(stats::density_estimate(s.values, {}, config.density_points)));
    }
    const auto table = stats::format_table(rows);
    text::write_file_atomic(config.out / "groups.csv", table);
    for (const auto& [name, body] : densities) text::write_file_atomic(config.out / name, body);
    out << table;
    return kOk;
  });
}

int cmd_train(const PipelineConfig& config, const std::vector<fs::path>& series, TrainTarget target,
              std::ostream& out) {
  return guarded("train", [&] {
    if (series.empty()) throw ConfigError("train needs at least one series file");
    const auto ds = assemble_dataset(read_all_series(series), target);
    const auto [train_set, test_set] = gbt::split_dataset(ds, {config.train_fraction, config.seed});
    const auto model = gbt::train(train_set, config.gbt);
    const double train_rmse = gbt::evaluate(model, train_set);
    const double test_rmse = gbt::evaluate(model, test_set);

    std::string metrics = "target=" + std::string(to_string(target)) + "\n";
    metrics += "n_train=" + std::to_string(train_set.rows()) + "\n";
    metrics += "n_test=" + std::to_string(test_set.rows()) + "\n";
    metrics += "train_rmse=" + text::format_double(train_rmse) + "\n";
    metrics += "test_rmse=" + text::format_double(test_rmse) + "\n";
    for (const auto& [name, gain] : gbt::feature_importance(model)) {
      metrics += "importance." + name + "=" + text::format_double(gain) + "\n";
    }
    const auto suffix = std::string(to_string(target));
    gbt::write_model(config.out / ("model_" + suffix + ".txt"), model);
    text::write_file_atomic(config.out / ("metrics_" + suffix + ".txt"), metrics);
    out << metrics;
    return kOk;
  });
}

int cmd_simulate(const PipelineConfig& config, const fs::path& scenario_path, std::ostream& out) {
  return guarded("simulate", [&] {
    auto scenario = synth::default_scenario();
    if (!scenario_path.empty()) {
      require_file(scenario_path, "scenario file");
      scenario = synth::parse_scenario(text::read_file(scenario_path));
    }
    if (config.seed_set) scenario.seed = config.seed;
    const synth::SyntheticDrive drive(scenario);

    const fs::path target = config.out;
    if (fs::exists(target) && !(fs::is_directory(target) && fs::exists(target / "manifest.txt"))) {
      throw ConfigError("refusing to replace " + target.string() + ": not a drive directory");
    }
    fs::path staging = target;
    staging += ".partial";
    fs::remove_all(staging);
    drive.write(staging);
    fs::remove_all(target);
    fs::rename(staging, target);
    out << "wrote " << drive.frames().size() << " frames to " << target.string() << "\n";
    return kOk;
  });
}

}  // namespace carfollow::pipeline
