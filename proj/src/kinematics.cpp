#include "carfollow/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "carfollow/errors.hpp"
#include "carfollow/text.hpp"

namespace carfollow::kinematics {

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("smoothing window must be odd and positive");
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t r = std::min({half, i, n - 1 - i});
    double sum = 0;
    for (std::ptrdiff_t j = i - r; j <= i + r; ++j) sum += values[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(2 * r + 1);
  }
  return out;
}

std::vector<double> differentiate(std::span<const double> d, std::span<const double> t) {
  if (d.size() != t.size()) throw DataError("distance and time series differ in length");
  const std::size_t n = d.size();
  if (n < 2) throw DataError("need at least two samples to differentiate");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t[i] > t[i - 1])) throw DataError("time must be strictly increasing");
  }
  std::vector<double> v(n);
  if (n == 2) {
    v[0] = v[1] = (d[1] - d[0]) / (t[1] - t[0]);
    return v;
  }
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    v[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * d[0] + (h1 + h2) / (h1 * h2) * d[1] - h1 / (h2 * (h1 + h2)) * d[2];
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
    v[k] = -h2 / (h1 * (h1 + h2)) * d[k - 1] + (h2 - h1) / (h1 * h2) * d[k] + h1 / (h2 * (h1 + h2)) * d[k + 1];
  }
  {
    const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
    v[n - 1] = h2 / (h1 * (h1 + h2)) * d[n - 3] - (h1 + h2) / (h1 * h2) * d[n - 2] +
               (h1 + 2 * h2) / (h2 * (h1 + h2)) * d[n - 1];
  }
  return v;
}

std::vector<double> relative_velocity(std::span<const double> d, std::span<const double> t, int window) {
  const auto raw = differentiate(d, t);
  return moving_average(raw, window);
}

double lv_acceleration(double delta_s, double delta_u, double a_ego, double t_step) {
  if (!(t_step > 0)) throw DomainError("time step must be positive");
  const double delta_a = 2.0 * (delta_s - delta_u * t_step) / (t_step * t_step);
  return a_ego - delta_a;
}

FollowingSeries build_following_series(const leadvehicle::LeadTrack& track,
                                       std::span<const ingest::FrameRecord> frames,
                                       const ingest::DriveManifest& manifest, const Options& options,
                                       std::span<const ingest::FlowSample> flow) {
  (void)manifest;  // time base comes from per-frame timestamps
  FollowingSeries series;
  if (track.entries.empty()) return series;

  std::unordered_map<std::int64_t, std::size_t> frame_pos;
  for (std::size_t i = 0; i < frames.size(); ++i) frame_pos.emplace(frames[i].frame_index, i);
  std::unordered_map<std::int64_t, double> flow_by_frame;
  for (const auto& s : flow) flow_by_frame[s.frame_index] = s.v_rel_mps;

  auto position_of = [&](std::int64_t frame_index) {
    auto it = frame_pos.find(frame_index);
    if (it == frame_pos.end()) throw DataError("track refers to unknown frame " + std::to_string(frame_index));
    return it->second;
  };

  const std::size_t first = position_of(track.entries.front().frame_index);
  const std::size_t last = position_of(track.entries.back().frame_index);
  const std::size_t rows = last - first + 1;
  series.t.resize(rows);
  series.d.assign(rows, std::nullopt);
  series.v_rel.assign(rows, std::nullopt);
  series.a_ego.assign(rows, std::nullopt);
  series.a_lv.assign(rows, std::nullopt);
  for (std::size_t r = 0; r < rows; ++r) {
    series.t[r] = frames[first + r].timestamp_s;
    series.a_ego[r] = frames[first + r].ego_accel_mps2;
  }

  // entries of one segment are contiguous in track.entries
  std::size_t begin = 0;
  while (begin < track.entries.size()) {
    std::size_t end = begin + 1;
    while (end < track.entries.size() && track.entries[end].segment == track.entries[begin].segment) ++end;

    const std::size_t m = end - begin;
    std::vector<std::size_t> row(m);
    std::vector<double> t(m), d(m);
    for (std::size_t k = 0; k < m; ++k) {
      const auto& e = track.entries[begin + k];
      if (!e.distance_m) throw DataError("track entry at frame " + std::to_string(e.frame_index) + " has no distance");
      row[k] = position_of(e.frame_index) - first;
      t[k] = series.t[row[k]];
      d[k] = *e.distance_m;
      series.d[row[k]] = d[k];
    }

    if (m >= 2) {
      const auto ds = moving_average(d, options.distance_window);
      auto v = relative_velocity(ds, t, options.smoothing_window);
      for (std::size_t k = 0; k < m; ++k) {
        auto it = flow_by_frame.find(track.entries[begin + k].frame_index);
        if (it != flow_by_frame.end()) v[k] = it->second;
        series.v_rel[row[k]] = v[k];
      }
      // step k -> k+1 in ego-minus-lead quantities; the last frame reuses the step ending on it
      std::vector<double> delta_a(m);
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t j = k + 1 < m ? k : k - 1;
        const double step = t[j + 1] - t[j];
        double delta_s = 0, delta_u = 0;
        if (options.delta_s == DeltaSMode::change) {
          delta_s = -(ds[j + 1] - ds[j]);
          delta_u = -v[j];
        } else {
          delta_s = ds[j];
          delta_u = v[j];
        }
        delta_a[k] = -lv_acceleration(delta_s, delta_u, 0.0, step);
      }
      delta_a = moving_average(delta_a, options.accel_window);
      for (std::size_t k = 0; k < m; ++k) {
        const auto& a_ego = series.a_ego[row[k]];
        if (a_ego) series.a_lv[row[k]] = *a_ego - delta_a[k];
      }
    }
    begin = end;
  }
  return series;
}

std::string format_series(const FollowingSeries& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += text::format_double(s.t[i]);
    for (const auto* col : {&s.d, &s.v_rel, &s.a_ego, &s.a_lv}) {
      out += ',';
      out += text::format_optional((*col)[i]);
    }
    out += '\n';
  }
  return out;
}

FollowingSeries parse_series(std::string_view contents) {
  FollowingSeries s;
  for (auto line : text::split(contents, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 5) throw FormatError("series row needs t,d,v_rel,a_ego,a_lv");
    s.t.push_back(text::parse_double(f[0], "t"));
    s.d.push_back(text::parse_optional_double(f[1], "d"));
    s.v_rel.push_back(text::parse_optional_double(f[2], "v_rel"));
    s.a_ego.push_back(text::parse_optional_double(f[3], "a_ego"));
    s.a_lv.push_back(text::parse_optional_double(f[4], "a_lv"));
  }
  for (std::size_t i = 1; i < s.t.size(); ++i) {
    if (!(s.t[i] > s.t[i - 1])) throw DataError("series time not strictly increasing");
  }
  return s;
}

FollowingSeries read_series(const std::filesystem::path& path) { return parse_series(text::read_file(path)); }

}  // namespace carfollow::kinematics
