#pragma once

// Random but valid artifacts for round-trip properties.

#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "carfollow/depthmetrics.hpp"
#include "carfollow/gbt.hpp"
#include "carfollow/ingest.hpp"
#include "carfollow/kinematics.hpp"
#include "carfollow/pipeline.hpp"
#include "carfollow/synth.hpp"

namespace gen {

namespace ci = carfollow::ingest;

// Finite double with a random exponent and mantissa in [-scale, scale].
inline double any_double(std::mt19937_64& rng, double scale = 1e3) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> e(-30, 0);
  return u(rng) * scale * std::ldexp(1.0, e(rng));
}

inline double positive(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

inline std::string word(std::mt19937_64& rng, std::size_t min_len = 1, std::size_t max_len = 8) {
  static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyz0123456789_";
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), ch(0, sizeof(kChars) - 2);
  std::string s(len(rng), 'a');
  for (auto& c : s) c = kChars[ch(rng)];
  s[0] = 'a' + static_cast<char>(rng() % 26);
  return s;
}

inline std::optional<double> maybe(std::mt19937_64& rng, double v) {
  return coin(rng, 0.8) ? std::optional<double>(v) : std::nullopt;
}

inline ci::DriveManifest manifest(std::mt19937_64& rng) {
  static const char* kGroups[] = {"elderly_woman", "elderly_man", "young_man_1", "young_man_2"};
  ci::DriveManifest m;
  m.drive_id = word(rng);
  m.driver_group = coin(rng, 0.8) ? ci::DriverGroup::parse(kGroups[rng() % 4]) : ci::DriverGroup::parse(word(rng));
  m.image_width = 16 + static_cast<std::uint32_t>(rng() % 2000);
  m.image_height = 16 + static_cast<std::uint32_t>(rng() % 2000);
  m.frame_rate_hz = positive(rng, 1, 120);
  return m;
}

// Values are exactly representable in f32, as a written map always is.
inline ci::DepthMap depth_map(std::mt19937_64& rng) {
  ci::DepthMap m;
  m.width = 1 + static_cast<std::uint32_t>(rng() % 24);
  m.height = 1 + static_cast<std::uint32_t>(rng() % 24);
  m.values.resize(std::size_t{m.width} * m.height);
  for (auto& v : m.values) {
    float f = 0;
    do {
      f = std::bit_cast<float>(static_cast<std::uint32_t>(rng() & 0x7fffffffu));
    } while (!std::isfinite(f));
    v = coin(rng, 0.1) ? 0.0 : f;
  }
  return m;
}

inline ci::BBox bbox(std::mt19937_64& rng, const ci::DriveManifest& m) {
  const double x0 = positive(rng, 0, m.image_width - 1), y0 = positive(rng, 0, m.image_height - 1);
  return {x0, y0, positive(rng, x0, m.image_width), positive(rng, y0, m.image_height)};
}

inline std::vector<ci::FrameRecord> frames(std::mt19937_64& rng, const ci::DriveManifest& m) {
  static const ci::ClassLabel kLabels[] = {ci::ClassLabel::car, ci::ClassLabel::truck,
                                           ci::ClassLabel::traffic_sign, ci::ClassLabel::traffic_signal};
  std::vector<ci::FrameRecord> out(rng() % 20);
  std::int64_t index = static_cast<std::int64_t>(rng() % 100);
  double t = any_double(rng);
  for (auto& f : out) {
    f.frame_index = index;
    f.timestamp_s = t;
    index += 1 + static_cast<std::int64_t>(rng() % 3);
    t = std::nextafter(t, INFINITY) + positive(rng, 0, 0.2);
    f.ego_speed_mps = maybe(rng, positive(rng, 0, 40));
    f.ego_accel_mps2 = maybe(rng, any_double(rng, 5));
    if (coin(rng, 0.9)) f.depth_ref = word(rng);
    const auto n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      f.detections.push_back({kLabels[rng() % 4], bbox(rng, m), positive(rng, 0, 1)});
    }
  }
  return out;
}

inline std::vector<ci::LidarSample> lidar(std::mt19937_64& rng, const ci::DriveManifest& m) {
  std::vector<ci::LidarSample> out(rng() % 20);
  for (auto& s : out) {
    s = {static_cast<std::int64_t>(rng() % 1000), positive(rng, 0, m.image_width), positive(rng, 0, m.image_height),
         positive(rng, 0.5, 200)};
  }
  return out;
}

inline std::vector<ci::FlowSample> flow(std::mt19937_64& rng) {
  std::vector<ci::FlowSample> out(rng() % 20);
  for (auto& s : out) s = {static_cast<std::int64_t>(rng() % 1000), any_double(rng, 10)};
  return out;
}

inline carfollow::kinematics::FollowingSeries series(std::mt19937_64& rng) {
  carfollow::kinematics::FollowingSeries s;
  const std::size_t n = rng() % 30;
  double t = any_double(rng);
  for (std::size_t i = 0; i < n; ++i) {
    s.t.push_back(t);
    t = std::nextafter(t, INFINITY) + positive(rng, 0, 0.2);
    s.d.push_back(maybe(rng, positive(rng, 0.1, 100)));
    s.v_rel.push_back(maybe(rng, any_double(rng, 10)));
    s.a_ego.push_back(maybe(rng, any_double(rng, 5)));
    s.a_lv.push_back(maybe(rng, any_double(rng, 5)));
  }
  return s;
}

inline std::vector<carfollow::synth::TruthRow> truth(std::mt19937_64& rng) {
  std::vector<carfollow::synth::TruthRow> out(rng() % 30);
  for (auto& r : out) r = {any_double(rng), any_double(rng), any_double(rng), any_double(rng), any_double(rng)};
  return out;
}

inline carfollow::synth::DriverProfile profile(std::mt19937_64& rng) {
  carfollow::synth::DriverProfile p;
  p.initial_speed_mps = positive(rng, 0, 40);
  p.initial_position_m = any_double(rng);
  const auto n = 1 + rng() % 6;
  for (std::size_t i = 0; i < n; ++i) p.accel_segments.push_back({positive(rng, 0.1, 20), any_double(rng, 3)});
  return p;
}

inline carfollow::synth::Scenario scenario(std::mt19937_64& rng) {
  carfollow::synth::Scenario s;
  s.lead = profile(rng);
  s.ego = profile(rng);
  s.drive_id = word(rng);
  s.driver_group = manifest(rng).driver_group;
  s.seed = rng();
  auto& sc = s.scene;
  sc.image_width = 1 + static_cast<std::uint32_t>(rng() % 4000);
  sc.image_height = 1 + static_cast<std::uint32_t>(rng() % 4000);
  sc.focal_px = positive(rng, 10, 5000);
  sc.frame_rate_hz = positive(rng, 1, 100);
  sc.depth_noise_sigma_m = positive(rng, 0, 1);
  sc.bbox_jitter_px = positive(rng, 0, 3);
  sc.vehicle_width_m = positive(rng, 1, 3);
  sc.vehicle_height_m = positive(rng, 1, 4);
  sc.camera_height_m = positive(rng, 0.5, 3);
  sc.background_depth_m = positive(rng, 20, 300);
  sc.lidar_every = 1 + static_cast<std::uint32_t>(rng() % 50);
  return s;
}

inline carfollow::depthmetrics::DepthQualityReport report(std::mt19937_64& rng) {
  return {positive(rng, 0, 50), positive(rng, 0, 50), positive(rng, 0, 50), positive(rng, 0, 1),
          positive(rng, 0, 60), positive(rng, 0, 5), positive(rng, 0, 1)};
}

inline carfollow::pipeline::CalibrationRecord calibration(std::mt19937_64& rng) {
  carfollow::pipeline::CalibrationRecord r;
  r.model_id = "model " + std::to_string(1 + rng() % 9);
  r.depth_dir = word(rng);
  r.fit = {any_double(rng, 10), any_double(rng, 10), positive(rng, 0, 10), static_cast<std::size_t>(rng() % 10000)};
  return r;
}

inline carfollow::gbt::Dataset dataset(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  carfollow::gbt::Dataset ds;
  for (std::size_t c = 0; c < cols; ++c) ds.feature_names.push_back("f" + std::to_string(c));
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : x) v = coin(rng, 0.3) ? std::round(n(rng) * 2) : n(rng);
    ds.add_row(x, std::sin(x[0]) + 0.3 * n(rng));
  }
  return ds;
}

// A real trained model, so node structure and weights are realistic.
inline carfollow::gbt::BoostedModel model(std::mt19937_64& rng) {
  const auto ds = dataset(rng, 10 + rng() % 40, 1 + rng() % 3);
  carfollow::gbt::TrainParams p;
  p.rounds = 1 + static_cast<int>(rng() % 5);
  p.max_depth = 1 + static_cast<int>(rng() % 4);
  p.learning_rate = positive(rng, 0.01, 1);
  p.reg_lambda = positive(rng, 0, 2);
  p.min_child_weight = positive(rng, 0, 3);
  p.base_score = any_double(rng, 2);
  return carfollow::gbt::train(ds, p);
}

inline carfollow::pipeline::PipelineConfig config(std::mt19937_64& rng) {
  carfollow::pipeline::PipelineConfig c;
  const auto n = rng() % 4;
  for (std::size_t i = 0; i < n; ++i) c.drives.emplace_back(word(rng) + "/" + word(rng));
  c.depth_models = {word(rng), word(rng)};
  c.truth_depth_dir = word(rng);
  if (coin(rng)) c.flow_file = word(rng) + ".csv";
  if (coin(rng)) c.calibration = word(rng) + "/cal.txt";
  c.out = word(rng);
  c.triangle = {positive(rng, 0.01, 0.45), positive(rng, 0.55, 0.99)};
  c.link_iou = positive(rng, 0, 1);
  c.kinematics.smoothing_window = 1 + 2 * static_cast<int>(rng() % 6);
  c.kinematics.distance_window = 1 + 2 * static_cast<int>(rng() % 6);
  c.kinematics.accel_window = 1 + 2 * static_cast<int>(rng() % 6);
  c.kinematics.delta_s = coin(rng) ? carfollow::kinematics::DeltaSMode::change : carfollow::kinematics::DeltaSMode::absolute;
  c.ssim_form = coin(rng) ? carfollow::depthmetrics::SsimForm::shifted : carfollow::depthmetrics::SsimForm::conventional;
  c.depth_weight = positive(rng, 0, 1);
  c.gbt.rounds = 1 + static_cast<int>(rng() % 500);
  c.gbt.learning_rate = positive(rng, 0.001, 1);
  c.gbt.max_depth = 1 + static_cast<int>(rng() % 10);
  c.gbt.min_child_weight = positive(rng, 0, 5);
  c.gbt.reg_lambda = positive(rng, 0, 5);
  c.gbt.base_score = any_double(rng, 3);
  c.train_fraction = positive(rng, 0.1, 0.9);
  c.alpha = positive(rng, 0.001, 0.2);
  c.density_points = 2 + rng() % 1000;
  c.seed_set = coin(rng);
  if (c.seed_set) c.seed = rng() >> 1;
  c.workers = 1 + static_cast<int>(rng() % 16);
  return c;
}

}  // namespace gen
