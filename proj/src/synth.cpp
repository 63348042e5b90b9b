#include "carfollow/synth.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::synth {

namespace {

constexpr double kTimeSlack = 1e-9;
constexpr std::uint64_t kStreamJitter = 1;
constexpr std::uint64_t kStreamDepth = 2;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Box–Muller on 53-bit uniforms; identical output on every standard library.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform_open() { return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0;
  bool has_spare_ = false;
};

std::string frame_ref(std::size_t k) {
  std::string digits = std::to_string(k);
  return "f" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

std::vector<AccelSegment> parse_segments(std::string_view s) {
  std::vector<AccelSegment> out;
  for (auto part : text::split(s, ';')) {
    part = text::trim(part);
    if (part.empty()) continue;
    const auto f = text::split(part, ':');
    if (f.size() != 2) throw FormatError("profile segment needs duration:accel");
    out.push_back({text::parse_double(f[0], "segment duration"), text::parse_double(f[1], "segment accel")});
  }
  return out;
}

std::uint64_t parse_seed(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("invalid seed");
  return v;
}

std::string format_segments(const std::vector<AccelSegment>& segs) {
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i) out += ';';
    out += text::format_double(segs[i].duration_s) + ":" + text::format_double(segs[i].accel_mps2);
  }
  return out;
}

}  // namespace

std::uint64_t child_seed(std::uint64_t parent, std::uint64_t frame, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(parent) ^ frame) ^ (stream * 0xD1B54A32D192ED03ull));
}

double DriverProfile::duration() const {
  double total = 0;
  for (const auto& s : accel_segments) total += s.duration_s;
  return total;
}

void validate(const DriverProfile& p) {
  if (p.accel_segments.empty()) throw ScenarioError("profile has no segments");
  if (!std::isfinite(p.initial_speed_mps) || p.initial_speed_mps < 0) {
    throw ScenarioError("initial speed must be non-negative");
  }
  if (!std::isfinite(p.initial_position_m)) throw ScenarioError("initial position must be finite");
  double v = p.initial_speed_mps;
  for (const auto& s : p.accel_segments) {
    if (!(s.duration_s > 0) || !std::isfinite(s.duration_s)) throw ScenarioError("segment durations must be positive");
    if (!std::isfinite(s.accel_mps2)) throw ScenarioError("segment acceleration must be finite");
    v += s.accel_mps2 * s.duration_s;
    if (v < -1e-9) throw ScenarioError("profile reverses (speed would turn negative)");
  }
}

KinematicState state_at(const DriverProfile& p, double t) {
  const double total = p.duration();
  if (!(t >= -kTimeSlack && t <= total + kTimeSlack)) throw DomainError("time outside the profile duration");
  double start = 0, x = p.initial_position_m, v = p.initial_speed_mps;
  for (std::size_t i = 0; i < p.accel_segments.size(); ++i) {
    const auto& s = p.accel_segments[i];
    const bool last = i + 1 == p.accel_segments.size();
    if (t < start + s.duration_s || last) {
      const double tau = t - start;
      return {x + v * tau + 0.5 * s.accel_mps2 * tau * tau, v + s.accel_mps2 * tau, s.accel_mps2};
    }
    x += v * s.duration_s + 0.5 * s.accel_mps2 * s.duration_s * s.duration_s;
    v += s.accel_mps2 * s.duration_s;
    start += s.duration_s;
  }
  return {x, v, 0.0};
}

std::vector<KinematicState> integrate(const DriverProfile& profile, std::span<const double> t_grid) {
  validate(profile);
  std::vector<KinematicState> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(state_at(profile, t));
  return out;
}

void validate(const SceneConfig& s) {
  if (s.image_width == 0 || s.image_height == 0) throw ScenarioError("image dimensions must be positive");
  for (double v : {s.focal_px, s.frame_rate_hz, s.vehicle_width_m, s.vehicle_height_m, s.camera_height_m,
                   s.background_depth_m}) {
    if (!(v > 0) || !std::isfinite(v)) throw ScenarioError("scene parameters must be positive");
  }
  if (!(s.depth_noise_sigma_m >= 0) || !(s.bbox_jitter_px >= 0)) throw ScenarioError("noise levels must be >= 0");
  if (s.lidar_every == 0) throw ScenarioError("lidar_every must be positive");
}

Scenario default_scenario() {
  Scenario s;
  s.lead.initial_speed_mps = 20;
  s.lead.initial_position_m = 25;
  s.lead.accel_segments = {{20, 0}, {4, -2}, {10, 0}, {6, 1.5}, {20, 0}};
  s.ego.initial_speed_mps = 20;
  s.ego.initial_position_m = 0;
  s.ego.accel_segments = {{22, 0}, {4, -2}, {10, 0}, {6, 1.5}, {18, 0}};
  s.seed = 7;
  return s;
}

Scenario parse_scenario(std::string_view contents) {
  Scenario s = default_scenario();
  for (auto line : text::split(contents, '\n')) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("scenario line without '='");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    auto num = [&] { return text::parse_double(value, key); };
    if (key == "drive_id") s.drive_id = std::string(value);
    else if (key == "driver_group") s.driver_group = ingest::DriverGroup::parse(value);
    else if (key == "seed") s.seed = parse_seed(value);
    else if (key == "image_width") s.scene.image_width = text::parse_u32(value, key);
    else if (key == "image_height") s.scene.image_height = text::parse_u32(value, key);
    else if (key == "focal_px") s.scene.focal_px = num();
    else if (key == "frame_rate_hz") s.scene.frame_rate_hz = num();
    else if (key == "depth_noise_sigma_m") s.scene.depth_noise_sigma_m = num();
    else if (key == "bbox_jitter_px") s.scene.bbox_jitter_px = num();
    else if (key == "vehicle_width_m") s.scene.vehicle_width_m = num();
    else if (key == "vehicle_height_m") s.scene.vehicle_height_m = num();
    else if (key == "camera_height_m") s.scene.camera_height_m = num();
    else if (key == "background_depth_m") s.scene.background_depth_m = num();
    else if (key == "lidar_every") s.scene.lidar_every = text::parse_u32(value, key);
    else if (key == "lead_speed_mps") s.lead.initial_speed_mps = num();
    else if (key == "lead_position_m") s.lead.initial_position_m = num();
    else if (key == "lead_segments") s.lead.accel_segments = parse_segments(value);
    else if (key == "ego_speed_mps") s.ego.initial_speed_mps = num();
    else if (key == "ego_position_m") s.ego.initial_position_m = num();
    else if (key == "ego_segments") s.ego.accel_segments = parse_segments(value);
    else throw FormatError("unknown scenario key '" + std::string(key) + "'");
  }
  return s;
}

std::string format_scenario(const Scenario& s) {
  std::string out;
  auto kv = [&](const char* key, const std::string& value) { out += std::string(key) + "=" + value + "\n"; };
  auto num = [](double v) { return text::format_double(v); };
  kv("drive_id", s.drive_id);
  kv("driver_group", s.driver_group.id());
  kv("seed", std::to_string(s.seed));
  kv("image_width", std::to_string(s.scene.image_width));
  kv("image_height", std::to_string(s.scene.image_height));
  kv("focal_px", num(s.scene.focal_px));
  kv("frame_rate_hz", num(s.scene.frame_rate_hz));
  kv("depth_noise_sigma_m", num(s.scene.depth_noise_sigma_m));
  kv("bbox_jitter_px", num(s.scene.bbox_jitter_px));
  kv("vehicle_width_m", num(s.scene.vehicle_width_m));
  kv("vehicle_height_m", num(s.scene.vehicle_height_m));
  kv("camera_height_m", num(s.scene.camera_height_m));
  kv("background_depth_m", num(s.scene.background_depth_m));
  kv("lidar_every", std::to_string(s.scene.lidar_every));
  kv("lead_speed_mps", num(s.lead.initial_speed_mps));
  kv("lead_position_m", num(s.lead.initial_position_m));
  kv("lead_segments", format_segments(s.lead.accel_segments));
  kv("ego_speed_mps", num(s.ego.initial_speed_mps));
  kv("ego_position_m", num(s.ego.initial_position_m));
  kv("ego_segments", format_segments(s.ego.accel_segments));
  return out;
}

std::string format_truth(std::span<const TruthRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += text::format_double(r.t) + "," + text::format_double(r.gap_m) + "," + text::format_double(r.v_rel_mps) +
           "," + text::format_double(r.a_ego) + "," + text::format_double(r.a_lv) + "\n";
  }
  return out;
}

std::vector<TruthRow> parse_truth(std::string_view contents) {
  std::vector<TruthRow> rows;
  for (auto line : text::split(contents, '\n')) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 5) throw FormatError("truth row needs t,gap_m,v_rel_mps,a_ego,a_lv");
    rows.push_back({text::parse_double(f[0], "t"), text::parse_double(f[1], "gap_m"),
                    text::parse_double(f[2], "v_rel_mps"), text::parse_double(f[3], "a_ego"),
                    text::parse_double(f[4], "a_lv")});
  }
  return rows;
}

SyntheticDrive::SyntheticDrive(Scenario scenario) : scenario_(std::move(scenario)) {
  const auto& sc = scenario_.scene;
  validate(sc);
  validate(scenario_.lead);
  validate(scenario_.ego);

  manifest_.drive_id = scenario_.drive_id;
  manifest_.driver_group = scenario_.driver_group;
  manifest_.image_width = sc.image_width;
  manifest_.image_height = sc.image_height;
  manifest_.frame_rate_hz = sc.frame_rate_hz;
  ingest::validate(manifest_);

  const double horizon = std::min(scenario_.lead.duration(), scenario_.ego.duration());
  const auto n_frames = static_cast<std::size_t>(std::floor(horizon * sc.frame_rate_hz + kTimeSlack)) + 1;
  const double W = sc.image_width, H = sc.image_height;
  const double cx = W / 2, cy = H / 2;

  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / sc.frame_rate_hz;
    const auto lead = state_at(scenario_.lead, t);
    const auto ego = state_at(scenario_.ego, t);
    const double gap = lead.position_m - ego.position_m;
    if (!(gap > 0)) throw ScenarioError("vehicles collide at t=" + text::format_double(t));

    const double half_w = sc.focal_px * sc.vehicle_width_m / (2 * gap);
    ingest::BBox box;
    box.x_min = cx - half_w;
    box.x_max = cx + half_w;
    box.y_max = cy + sc.focal_px * sc.camera_height_m / gap;
    box.y_min = box.y_max - sc.focal_px * sc.vehicle_height_m / gap;
    if (box.x_min < 0 || box.y_min < 0 || box.x_max > W || box.y_max > H) {
      throw ScenarioError("leading vehicle leaves the image at t=" + text::format_double(t));
    }
    true_boxes_.push_back(box);

    ingest::BBox seen = box;
    if (sc.bbox_jitter_px > 0) {
      NormalStream jitter(child_seed(scenario_.seed, k, kStreamJitter));
      seen.x_min += sc.bbox_jitter_px * jitter.next();
      seen.y_min += sc.bbox_jitter_px * jitter.next();
      seen.x_max += sc.bbox_jitter_px * jitter.next();
      seen.y_max += sc.bbox_jitter_px * jitter.next();
      if (seen.x_min < 0 || seen.y_min < 0 || seen.x_max > W || seen.y_max > H || !(seen.x_min < seen.x_max) ||
          !(seen.y_min < seen.y_max)) {
        throw ScenarioError("jittered box leaves the image at t=" + text::format_double(t));
      }
    }

    ingest::FrameRecord frame;
    frame.frame_index = static_cast<std::int64_t>(k);
    frame.timestamp_s = t;
    frame.ego_speed_mps = ego.velocity_mps;
    frame.ego_accel_mps2 = ego.accel_mps2;
    frame.depth_ref = frame_ref(k);
    frame.detections.push_back({ingest::ClassLabel::car, seen, 0.9});
    frame.detections.push_back({ingest::ClassLabel::traffic_sign, {0.85 * W, 0.1 * H, 0.9 * W, 0.2 * H}, 0.8});
    frames_.push_back(std::move(frame));

    truth_.push_back({t, gap, lead.velocity_mps - ego.velocity_mps, ego.accel_mps2, lead.accel_mps2});

    if (k % sc.lidar_every == 0) {
      lidar_.push_back({static_cast<std::int64_t>(k), std::floor((box.x_min + box.x_max) / 2),
                        std::floor((box.y_min + box.y_max) / 2), gap});
    }
  }
}

ingest::DepthMap SyntheticDrive::render(std::size_t frame, bool noisy) const {
  const auto& sc = scenario_.scene;
  ingest::DepthMap map;
  map.width = sc.image_width;
  map.height = sc.image_height;
  map.values.assign(std::size_t{map.width} * map.height, static_cast<float>(sc.background_depth_m));
  const auto& box = true_boxes_.at(frame);
  const double gap = truth_[frame].gap_m;
  NormalStream noise(child_seed(scenario_.seed, frame, kStreamDepth));
  const bool add_noise = noisy && sc.depth_noise_sigma_m > 0;
  // pixels whose centre lies inside the vehicle's box
  const auto c0 = static_cast<std::uint32_t>(std::max(0.0, std::ceil(box.x_min - 0.5)));
  const auto c1 = static_cast<std::uint32_t>(std::min<double>(map.width, std::floor(box.x_max - 0.5) + 1));
  const auto r0 = static_cast<std::uint32_t>(std::max(0.0, std::ceil(box.y_min - 0.5)));
  const auto r1 = static_cast<std::uint32_t>(std::min<double>(map.height, std::floor(box.y_max - 0.5) + 1));
  for (auto r = r0; r < r1; ++r) {
    for (auto c = c0; c < c1; ++c) {
      double v = gap;
      if (add_noise) v = std::max(0.0, gap + sc.depth_noise_sigma_m * noise.next());
      map.at(r, c) = static_cast<float>(v);
    }
  }
  return map;
}

ingest::DepthMap SyntheticDrive::depth_map(std::size_t frame) const { return render(frame, true); }

ingest::DepthMap SyntheticDrive::truth_depth_map(std::size_t frame) const { return render(frame, false); }

void SyntheticDrive::write(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "depth_truth");
  for (std::size_t k = 0; k < frames_.size(); ++k) {
    ingest::write_depth_map(dir / "depth" / (*frames_[k].depth_ref + ".dmap"), depth_map(k));
  }
  for (const auto& s : lidar_) {
    const auto k = static_cast<std::size_t>(s.frame_index);
    ingest::write_depth_map(dir / "depth_truth" / (*frames_[k].depth_ref + ".dmap"), truth_depth_map(k));
  }
  ingest::write_frames(dir / "frames.csv", frames_);
  ingest::write_lidar(dir / "lidar.csv", lidar_);
  text::write_file_atomic(dir / "truth.csv", format_truth(truth_));
  text::write_file_atomic(dir / "scenario.txt", format_scenario(scenario_));
  ingest::write_manifest(dir / "manifest.txt", manifest_);
}

}  // namespace carfollow::synth
